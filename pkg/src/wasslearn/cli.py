"""Command-line front end.

Every subcommand writes ``<out>/<subcommand>.json`` holding the package
version, the full configuration and the result; sweeps also write a CSV.
Exit codes: 0 success, 1 usage error, 2 data error, 3 solver or verification
failure. The output directory defaults to ``$WASSLEARN_OUT`` or
``./wasslearn-out``.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import adaptation as adapt_mod
from . import casebook as cb
from . import verification
from .bounds import (
    EntropyProfile,
    adaptation_bound,
    comp_entropy_integral,
    corollary_constants,
    rademacher_phi_bound,
    theorem2_bound,
    theorem3_bound,
)
from .dual import local_worst_case_risk
from .erm import fixed_lambda_erm, minimax_erm, ordinary_erm
from .hypotheses import (
    linear_predictor,
    make_hinge_class,
    make_quadratic_class,
    make_rkhs_ball_class,
    make_sigmoid_network_class,
)
from .spaces import (
    AmbiguityBall,
    DataError,
    InstanceSpace,
    StructuralError,
    as_point_set,
    load_dataset,
    merge_points,
    read_rows,
    regular_candidates,
)
from .transport import SolverError, primal_worst_case_risk, wasserstein

OUT_ENV = "WASSLEARN_OUT"
DEFAULT_OUT = "wasslearn-out"


class UsageError(Exception):
    pass


class VerificationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------- output


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "handler"}


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def write_json(args, result: dict) -> Path:
    payload = {"version": __version__, "command": args.command, "config": _config(args), "result": result}
    path = _out_dir(args) / f"{args.command}.json"
    _atomic_write(path, json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_csv(args, name: str, rows: list[dict]) -> Path:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (format(v, ".17g") if isinstance(v, float) else v) for k, v in row.items()})
    path = _out_dir(args) / name
    _atomic_write(path, buf.getvalue())
    return path


# ---------------------------------------------------------------- inputs


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _vectors(text: str) -> list[list[float]]:
    return [_floats(part) for part in text.split(";") if part.strip()]


def _space_for(tables: list[np.ndarray], args) -> InstanceSpace:
    labeled = args.schema == "labeled"
    width = {t.shape[1] for t in tables}
    if len(width) != 1:
        raise DataError(f"input files have different column counts {sorted(width)}")
    d = width.pop() - labeled
    if d < 1:
        raise DataError("labeled data needs at least one feature column")
    stacked = np.vstack(tables)
    feats = stacked[:, :d]
    r0 = args.feature_bound if args.feature_bound is not None else float(np.linalg.norm(feats, axis=1).max())
    B = 0.0
    if labeled:
        B = args.label_bound if args.label_bound is not None else float(np.abs(stacked[:, -1]).max())
    kind = args.metric or ("euclidean_product" if labeled else "feature_only")
    return InstanceSpace(d, r0, B, kind, args.metric_order)


def _load(paths, args):
    tables = [read_rows(p) for p in paths]
    space = _space_for(tables, args)
    return [load_dataset(p, args.schema, space) for p in paths], space


def _candidates(spec: str, P, space: InstanceSpace, args):
    if spec == "support":
        return P.support
    if spec.startswith("grid:"):
        try:
            per_axis = int(spec[5:])
        except ValueError:
            raise UsageError(f"bad candidate grid {spec!r}") from None
        return merge_points([P.support, regular_candidates(space, per_axis)])
    if spec.startswith("file:"):
        return merge_points([P.support, load_dataset(spec[5:], args.schema, space).support])
    raise UsageError(f"unknown candidate spec {spec!r}; use support, grid:N or file:PATH")


def _build_class(args, space: InstanceSpace):
    grid = _vectors(args.grid) if args.grid else None
    d = space.dimension
    if grid is None:
        grid = [[0.0] * d] + [[0.5 * (i == k) for i in range(d)] for k in range(d)]
    for v in grid:
        if len(v) not in (d, d + 1):
            raise UsageError(f"grid vector {v} does not match dimension {d}")
    if args.hclass in ("quadratic", "hinge"):
        preds = [linear_predictor(v[:d], v[d] if len(v) > d else 0.0, space.feature_bound) for v in grid]
        return make_quadratic_class(preds, space) if args.hclass == "quadratic" else make_hinge_class(preds, space)
    if args.hclass == "network":
        return make_sigmoid_network_class([v[:d] for v in grid], space)
    if args.hclass == "rkhs":
        if not args.centers:
            raise UsageError("--class rkhs needs --centers")
        centers = _vectors(args.centers)
        return make_rkhs_ball_class(centers, grid, args.sigma, args.rkhs_radius, space)
    raise UsageError(f"unknown class {args.hclass!r}")


# ---------------------------------------------------------------- commands


def cmd_wass(args) -> int:
    (A, B), space = _load([args.source, args.target], args)
    value, plan = wasserstein(args.p, A, B, space)
    if args.plan_csv:
        plan.to_csv(args.plan_csv)
    write_json(args, {"wasserstein": value, "p": args.p, "transport_cost": plan.cost, "plan": plan.plan})
    print(value)
    return 0


def cmd_worst_case(args) -> int:
    (P,), space = _load([args.data], args)
    F = _build_class(args, space)
    cands = _candidates(args.candidates, P, space, args)
    ball = AmbiguityBall(args.p, args.rho)
    rows = []
    for name, f in zip(F.ids(), F):
        cert = primal_worst_case_risk(f, P, ball, cands, space)
        dual = local_worst_case_risk(f, P, ball, cands, space)
        rows.append({"id": name, "primal": cert.value, "dual": dual.value, "gap": abs(cert.value - dual.value),
                     "lambda_star": dual.lambda_star, "worst_distribution_weights": cert.distribution.weights})
        print(f"{name}\tprimal={cert.value!r}\tdual={dual.value!r}")
    write_json(args, {"candidate_count": len(as_point_set(cands)), "hypotheses": rows})
    return 0


def cmd_erm(args) -> int:
    (P,), space = _load([args.data], args)
    res = ordinary_erm(_build_class(args, space), P)
    write_json(args, res.to_dict())
    print(f"{res.per_hypothesis_values[res.selected_index][0]}\t{res.objective!r}")
    return 0


def cmd_minimax_erm(args) -> int:
    (P,), space = _load([args.data], args)
    F = _build_class(args, space)
    cands = _candidates(args.candidates, P, space, args)
    ball = AmbiguityBall(args.p, args.rho)
    if args.lambda_grid:
        res = fixed_lambda_erm(F, P, _floats(args.lambda_grid), ball, cands, space)
    else:
        res = minimax_erm(F, P, ball, cands, space)
    write_json(args, res.to_dict())
    print(f"{res.per_hypothesis_values[res.selected_index][0]}\t{res.objective!r}")
    return 0


def _bound_report(kind: str, args, n: int, rho: float):
    a = args
    if kind == "theorem2":
        return theorem2_bound(a.comp, a.lipschitz, a.diam, rho, a.p, a.M, n, a.delta)
    if kind == "theorem3":
        return theorem3_bound(a.comp, a.C0, a.diam, rho, a.p, a.M, n, a.delta)
    if kind == "rademacher":
        return rademacher_phi_bound(a.comp, a.C0, a.diam, rho, a.p, n)
    if kind == "adaptation":
        return adaptation_bound(a.comp, a.lipschitz, a.diam, rho, a.p, a.M, n, a.delta)
    if kind in ("corollary-network", "corollary-rkhs"):
        params = {"d": a.d, "r0": a.r0, "B": a.B}
        if kind == "corollary-network":
            params.update(s_sup=a.s_sup, s_prime_sup=a.s_prime_sup)
        else:
            params.update(sigma=a.sigma, r=a.rkhs_radius)
        return corollary_constants(kind.split("-")[1], n, a.delta, **params)
    raise UsageError(f"unknown bound kind {kind!r}")


def cmd_bounds(args) -> int:
    if args.kind.startswith("comp-"):
        which = args.kind[5:]
        if which == "finite":
            profile = EntropyProfile.finite(args.size, args.M)
        elif which == "network":
            profile = EntropyProfile.network(args.d, args.r0, args.B, args.s_sup, args.s_prime_sup)
        elif which == "rkhs":
            profile = EntropyProfile.rkhs(args.d, args.r0, args.sigma, args.rkhs_radius, args.B)
        else:
            raise UsageError(f"unknown bound kind {args.kind!r}")
        value = comp_entropy_integral(profile)
        write_json(args, {"comp": value, "profile": profile.kind})
        print(value)
        return 0
    ns = [int(v) for v in _floats(args.sweep_n)] if args.sweep_n else [args.n]
    rhos = _floats(args.sweep_rho) if args.sweep_rho else [args.rho]
    rows, reports = [], []
    for n in ns:
        for rho in rhos:
            rep = _bound_report(args.kind, args, n, rho)
            d = rep.to_dict()
            reports.append(d)
            value = d["bound"]["value"] if "bound" in d else d["value"]
            rows.append({"n": n, "rho": rho, "value": value})
    write_json(args, {"reports": reports})
    if len(rows) > 1:
        write_csv(args, "bounds.csv", rows)
    for row in rows:
        print(f"n={row['n']}\trho={row['rho']!r}\tvalue={row['value']!r}")
    return 0


def cmd_casebook(args) -> int:
    rows, details = [], []
    for rho in _floats(args.rho_list):
        inst = cb.IllustrativeInstance(args.alpha, args.p, args.n, rho, args.delta)
        prob = cb.selection_probability(inst)
        row = {
            "rho": rho,
            "analytic_risk": cb.analytic_population_worst_case(inst).value,
            "oracle_risk": cb.population_grid_oracle(inst, args.grid_size),
            "selection_probability": prob.value,
            "simulated_frequency": float("nan"),
        }
        extra = {"flags": list(prob.flags), "excess_risk_profile": cb.excess_risk_profile(inst)}
        if args.trials > 0:
            sim = cb.simulate_selection(inst, args.trials, args.seed)
            se = sim.standard_error(prob.value)
            row["simulated_frequency"] = sim.frequency
            extra.update(trials=args.trials, selected_f1=sim.selected_f1, standard_error=se,
                         z_score=(sim.frequency - prob.value) / se if se > 0 else None)
        rows.append(row)
        details.append({**row, **extra})
        print(f"rho={rho!r}\tanalytic={prob.value:.6g}\tsimulated={row['simulated_frequency']:.6g}")
    write_json(args, {"alpha": args.alpha, "p": args.p, "n": args.n, "rows": details})
    write_csv(args, "casebook.csv", rows)
    return 0


SCENARIO_KEYS = {"shift": float, "n": int, "m": int, "n_test": int, "delta": float, "ca": float, "cb": float,
                 "seed": int, "seeds": int, "noise": float, "alpha": float, "p": float}


def _scenario_settings(args) -> dict:
    settings = {"shift": 0.5, "n": 40, "m": 40, "n_test": 200, "delta": args.delta, "ca": adapt_mod.DEFAULT_CA,
                "cb": adapt_mod.DEFAULT_CB, "seed": args.seed, "seeds": 1, "noise": 0.3, "alpha": 1.0, "p": 1.0}
    if args.config:
        parser = configparser.ConfigParser()
        if not parser.read(args.config):
            raise DataError(f"{args.config}: cannot read scenario file")
        if "scenario" not in parser:
            raise DataError(f"{args.config}: missing [scenario] section")
        for key, raw in parser["scenario"].items():
            if key not in SCENARIO_KEYS:
                raise DataError(f"{args.config}: unknown key {key!r}")
            try:
                settings[key] = SCENARIO_KEYS[key](raw)
            except ValueError:
                raise DataError(f"{args.config}: bad value for {key!r}: {raw!r}") from None
    for key in SCENARIO_KEYS:
        value = getattr(args, f"scenario_{key}", None)
        if value is not None:
            settings[key] = value
    return settings


def cmd_adapt(args) -> int:
    s = _scenario_settings(args)
    space = InstanceSpace(3, 1.5, 0.6 if s["noise"] <= 0.35 else 0.25 + s["noise"], "lp_product", s["p"])
    F = adapt_mod.shift_trap_class(space, s["alpha"])
    scenario = adapt_mod.shift_trap_scenario(s["shift"], s["noise"])
    rows, first = [], None
    for k in range(s["seeds"]):
        data = adapt_mod.generate_drift(scenario, s["n"], s["m"], s["seed"] + k, s["n_test"])
        run = adapt_mod.run_adaptation(F, data, space, s["p"], s["delta"], s["ca"], s["cb"])
        first = first or run
        rows.append({"seed": s["seed"] + k, "w_hat": run.w_hat, "radius": run.radius,
                     "minimax": run.result.per_hypothesis_values[run.result.selected_index][0],
                     "ordinary": run.baseline.per_hypothesis_values[run.baseline.selected_index][0],
                     "minimax_target_risk": run.target_risk, "ordinary_target_risk": run.baseline_target_risk,
                     "bound": run.bound.value})
    robust = sum(r["minimax"] != "trap" for r in rows)
    write_json(args, {"settings": s, "first_run": first.to_dict(), "minimax_robust": robust,
                      "ordinary_robust": sum(r["ordinary"] != "trap" for r in rows), "runs": rows})
    if len(rows) > 1:
        write_csv(args, "adapt.csv", rows)
    print(f"radius={first.radius!r}\tminimax={rows[0]['minimax']}\tordinary={rows[0]['ordinary']}"
          f"\trobust_selections={robust}/{len(rows)}")
    return 0


def cmd_verify(args) -> int:
    count, seed = args.seeds, args.seed
    check = args.check
    if check == "duality":
        worst = float(verification.duality_gaps(count, seed).max())
        ok = worst <= 1e-6
    elif check == "bracket":
        worst = float(verification.bracket_excess(count, seed).max())
        ok = worst <= 1e-9
    elif check == "sandwich":
        slacks = verification.sandwich_slacks(count, 100, seed)
        worst = float(min(min(s.lower, s.upper) for s in slacks))
        ok = worst >= -1e-6
    elif check == "pushforward":
        worst = float(verification.pushforward_gaps(count, seed).max())
        ok = worst <= 1e-9
    elif check == "rho-zero":
        worst = float(verification.rho_zero_mismatches(count, seed))
        ok = worst == 0
    elif check == "rademacher":
        checks = verification.rademacher_checks(count, seed)
        worst = float(max(c.exact - c.bound for c in checks))
        ok = worst <= 0
    else:
        raise UsageError(f"unknown check {check!r}")
    write_json(args, {"check": check, "instances": count, "worst": worst, "passed": ok})
    print(f"{check}: {'pass' if ok else 'FAIL'} (worst {worst!r} over {count} instances)")
    if not ok:
        raise VerificationFailed(check)
    return 0


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, data: bool = True, rho: bool = True) -> None:
    p.add_argument("--p", type=float, default=1.0, help="Wasserstein order (>= 1)")
    if rho:
        p.add_argument("--rho", type=float, default=0.1, help="ambiguity radius")
    p.add_argument("--delta", type=float, default=0.05, help="confidence parameter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    if data:
        p.add_argument("--schema", choices=("labeled", "unlabeled"), default="labeled")
        p.add_argument("--metric", choices=("euclidean_product", "lp_product", "feature_only", "hinge_product"))
        p.add_argument("--metric-order", type=float, default=2.0)
        p.add_argument("--feature-bound", type=float, default=None, help="default: largest feature norm in the data")
        p.add_argument("--label-bound", type=float, default=None, help="default: largest |label| in the data")
        p.add_argument("--candidates", default="support", help="support | grid:N | file:PATH")


def _class_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--class", dest="hclass", choices=("quadratic", "hinge", "network", "rkhs"), default="quadratic")
    p.add_argument("--grid", default=None, help="semicolon-separated parameter vectors, e.g. '0,0;0.5,0'")
    p.add_argument("--centers", default=None, help="RKHS kernel centers, semicolon-separated")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--rkhs-radius", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wasslearn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("wass", help="Wasserstein distance between two datasets")
    p.add_argument("source")
    p.add_argument("target")
    _common(p)
    p.set_defaults(schema="unlabeled")
    p.add_argument("--plan-csv", default=None)
    p.set_defaults(handler=cmd_wass)

    for name, handler, helptext in (
        ("worst-case", cmd_worst_case, "primal and dual worst-case risk of each class member"),
        ("erm", cmd_erm, "ordinary empirical risk minimization"),
        ("minimax-erm", cmd_minimax_erm, "local minimax ERM over a Wasserstein ball"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("data")
        _common(p)
        _class_flags(p)
        if name == "minimax-erm":
            p.add_argument("--lambda-grid", default=None, help="fixed-lambda relaxation on this grid")
        p.set_defaults(handler=handler)

    p = sub.add_parser("bounds", help="evaluate a generalization bound or complexity constant")
    _common(p, data=False)
    p.add_argument("--kind", required=True, choices=("theorem2", "theorem3", "rademacher", "adaptation",
                                                     "corollary-network", "corollary-rkhs", "comp-finite",
                                                     "comp-network", "comp-rkhs"))
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--comp", type=float, default=1.0)
    p.add_argument("--lipschitz", "--L", dest="lipschitz", type=float, default=1.0)
    p.add_argument("--C0", type=float, default=1.0)
    p.add_argument("--diam", type=float, default=1.0)
    p.add_argument("--M", type=float, default=1.0)
    p.add_argument("--size", type=int, default=2)
    p.add_argument("--d", type=int, default=1)
    p.add_argument("--r0", type=float, default=1.0)
    p.add_argument("--B", type=float, default=1.0)
    p.add_argument("--s-sup", type=float, default=1.0)
    p.add_argument("--s-prime-sup", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--rkhs-radius", type=float, default=1.0)
    p.add_argument("--sweep-n", default=None)
    p.add_argument("--sweep-rho", default=None)
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("casebook", help="two-hypothesis example: closed forms and simulation")
    _common(p, data=False, rho=False)
    p.add_argument("--alpha", type=float, default=10.0)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--rho", dest="rho_list", default="0.05", help="radius or comma-separated radii")
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--grid-size", type=int, default=2000)
    p.set_defaults(handler=cmd_casebook)

    p = sub.add_parser("adapt", help="shift-drift adaptation scenario")
    _common(p, data=False)
    p.add_argument("--config", default=None, help="INI file with a [scenario] section")
    for key, typ in SCENARIO_KEYS.items():
        if key in ("delta", "seed", "p"):
            continue
        p.add_argument(f"--{key.replace('_', '-')}", dest=f"scenario_{key}", type=typ, default=None)
    p.set_defaults(handler=cmd_adapt)

    p = sub.add_parser("verify", help="randomized oracle checks")
    p.add_argument("check", choices=("duality", "bracket", "sandwich", "pushforward", "rho-zero", "rademacher"))
    p.add_argument("--seeds", type=int, default=100, help="number of random instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, StructuralError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 3
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
