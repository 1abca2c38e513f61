"""Acceptance criteria 1-10. Each test records one or more lines via the ``record`` fixture."""

import math
import time
import warnings

import numpy as np
import pytest
from scipy.special import gamma, gammaincc
from scipy.stats import binomtest

from wasslearn import adaptation as ad
from wasslearn import bounds as bd
from wasslearn import casebook as cb
from wasslearn import verification as vf
from wasslearn.cli import main
from wasslearn.spaces import EmpiricalDistribution, InstanceSpace, PointSet, save_dataset


def test_c01_strong_duality(record):
    start = time.perf_counter()
    gaps = vf.duality_gaps(500, seed=2024)
    elapsed = time.perf_counter() - start
    ok = gaps.max() <= 1e-6 and elapsed <= 120
    record(1, ok, f"max gap {gaps.max():.2e} over 500 instances in {elapsed:.1f}s")
    assert gaps.max() <= 1e-6
    assert elapsed <= 120


def test_c02_empirical_closed_form(record):
    rng = np.random.default_rng(7)
    worst, count = 0.0, 0
    for _ in range(200):
        alpha = float(rng.uniform(1.5, 20))
        p = float(rng.choice([1.0, 2.0]))
        n = int(rng.integers(1, 25))
        z = rng.uniform(0, 1, n)
        sample = EmpiricalDistribution.uniform(PointSet(z[:, None]))
        top = z.max()
        rho = float(rng.uniform(0, 1)) * (1 - top) * n ** (-1 / p)
        inst = cb.IllustrativeInstance(alpha, p, n, rho)
        closed = cb.analytic_empirical_worst_case(inst, sample)
        assert "empirical_regime_violated" not in closed.flags
        worst = max(worst, abs(closed.value - cb.empirical_oracle(inst, sample)))
        count += 1
    record(2, worst <= 1e-9, f"empirical closed form vs LP max diff {worst:.1e} ({count} samples)")
    assert worst <= 1e-9


def test_c02_population_closed_form(record):
    worst = 0.0
    for alpha in (2.0, 10.0):
        for p in (1.0, 2.0):
            inst0 = cb.IllustrativeInstance(alpha, p, 1, 0.0)
            for t in np.linspace(0.05, 0.95, 7):
                rho = inst0.lower_threshold + t * (inst0.upper_threshold - inst0.lower_threshold)
                inst = cb.IllustrativeInstance(alpha, p, 1, float(rho))
                closed = cb.analytic_population_worst_case(inst)
                if "beta_negative" in closed.flags:
                    continue
                oracle = cb.population_grid_oracle(inst, 2000)
                worst = max(worst, abs(closed.value - oracle) / oracle)
    record(2, worst <= 0.02, f"population closed form vs 2000-point grid max rel diff {worst:.2e}")
    assert worst <= 0.02


@pytest.mark.parametrize("n", [5, 10, 20])
@pytest.mark.parametrize("rho", [0.02, 0.05])
def test_c02_selection_probability(record, n, rho):
    inst = cb.IllustrativeInstance(10.0, 1.0, n, rho)
    prob = cb.selection_probability(inst).value
    sim = cb.simulate_selection(inst, 100_000, seed=1000 * n)
    se = sim.standard_error(prob)
    z = (sim.frequency - prob) / se if se > 0 else (0.0 if sim.frequency == prob else math.inf)
    ok = abs(z) <= 3
    record(2, ok, f"selection n={n} rho={rho}: analytic {prob:.5f} simulated {sim.frequency:.5f} z={z:.1f}")
    assert ok


def test_c03_lambda_bracket(record):
    excess = vf.bracket_excess(300, seed=31)
    record(3, excess.max() <= 1e-9, f"max lambda* - bracket {excess.max():.2e} over 300 instances")
    assert excess.max() <= 1e-9


def test_c04_sandwich(record):
    slacks = vf.sandwich_slacks(40, 100, seed=41)
    lo = min(s.lower for s in slacks)
    up = min(s.upper for s in slacks)
    ok = lo >= -1e-6 and up >= -1e-6
    record(4, ok, f"min lower slack {lo:.2e}, min upper slack {up:.2e} (40 instances x 100 perturbations)")
    assert ok


def test_c05_pushforward(record):
    gaps = vf.pushforward_gaps(100, seed=51)
    record(5, gaps.max() <= 1e-9, f"max |W_p(P,Q) - W_p(mu,nu)| {gaps.max():.2e} over 100 instances")
    assert gaps.max() <= 1e-9


def test_c06_rho_zero(record):
    bad = vf.rho_zero_mismatches(200, seed=61)
    record(6, bad == 0, f"{bad} mismatches over 200 instances")
    assert bad == 0


def test_c07_rademacher(record):
    checks = vf.rademacher_checks(50, seed=71, max_n=12)
    ratio = max(c.exact / c.bound for c in checks)
    ok = all(c.exact <= c.bound for c in checks)
    record(7, ok, f"max exact/bound ratio {ratio:.2e} over 50 instances")
    assert ok


def _c1_rkhs(d, r0, sigma):
    s = (d + 3) / 2
    upper = gammaincc(s, math.log(2)) * gamma(s)
    return 48 * d**0.5 * (2 * upper + math.log(2) ** ((d + 1) / 2)) * (32 + 2560 * d * r0**2 / sigma**2) ** ((d + 1) / 2)


def _rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def test_c08_bound_arithmetic(record):
    rng = np.random.default_rng(81)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 10**6))
        delta = float(rng.uniform(0.001, 0.5))
        d = int(rng.integers(1, 6))
        r0, B, s, ds = rng.uniform(0.1, 5, 4)
        net = bd.corollary_constants("network", n, delta, d=d, r0=r0, B=B, s_sup=s, s_prime_sup=ds)
        C1 = (B + s) * (144 * r0 * d**0.5 * ds + 192 * (1 + ds) * (2 * (r0**2 + B**2)) ** 0.5)
        expect = C1 / n**0.5 + 3 * (s + B) ** 2 * math.log(2 / delta) ** 0.5 / (2 * n) ** 0.5
        worst = max(worst, _rel(net.C1, C1), _rel(net.report.value, expect))
        sigma, r = rng.uniform(0.2, 3, 2)
        rk = bd.corollary_constants("rkhs", n, delta, d=d, r0=r0, B=B, sigma=sigma, r=r)
        C1 = _c1_rkhs(d, r0, sigma)
        expect = (C1 * (r**2 + B * r) / n**0.5
                  + 192 * 2**0.5 * (r + B) * (1 + r * 2**0.5 / sigma) * (r0**2 + B**2) ** 0.5 / n**0.5
                  + 6 * (r**2 + B**2) * math.log(2 / delta) ** 0.5 / (2 * n) ** 0.5)
        worst = max(worst, _rel(rk.C1, C1), _rel(rk.report.value, expect))
        comp, L, C0, diam, M = rng.uniform(0.1, 5, 5)
        rho = float(rng.uniform(0.01, 1))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        dev = 3 * M * (math.log(2 / delta) / (2 * n)) ** 0.5
        t2 = 48 * comp / n**0.5 + 48 * L * diam**p / (n**0.5 * rho ** (p - 1)) + dev
        t3 = 48 * comp / n**0.5 + 24 * C0 * (2 * diam) ** p / n**0.5 * (1 + (diam / rho) ** p) + dev
        worst = max(worst, _rel(bd.theorem2_bound(comp, L, diam, rho, p, M, n, delta).value, t2),
                    _rel(bd.theorem3_bound(comp, C0, diam, rho, p, M, n, delta).value, t3))
    record(8, worst <= 1e-12, f"max relative diff vs independent arithmetic {worst:.1e}")
    assert worst <= 1e-12


def _monotone(seq, increasing):
    a = np.asarray(seq)
    return bool(np.all(np.diff(a) >= 0)) if increasing else bool(np.all(np.diff(a) <= 0))


def test_c08_monotonicity(record):
    ns = np.unique(np.logspace(0, 7, 60).astype(int))
    rhos = np.linspace(0.01, 2, 60)
    deltas = np.linspace(0.001, 0.99, 60)
    base = dict(comp=1.3, diam=2.0, M=4.0)
    ok = True
    for p in (1.0, 2.0):
        ok &= _monotone([bd.theorem2_bound(base["comp"], 1.0, 2.0, 0.1, p, 4.0, int(n), 0.05).value for n in ns], False)
        ok &= _monotone([bd.theorem3_bound(1.3, 1.0, 2.0, 0.1, p, 4.0, int(n), 0.05).value for n in ns], False)
        ok &= _monotone([bd.theorem2_bound(1.3, 1.0, 2.0, r, p, 4.0, 100, 0.05).value for r in rhos], False)
        ok &= _monotone([bd.theorem3_bound(1.3, 1.0, 2.0, r, p, 4.0, 100, 0.05).value for r in rhos], False)
        ok &= _monotone([bd.theorem2_bound(1.3, 1.0, 2.0, 0.1, p, 4.0, 100, dl).value for dl in deltas], False)
        ok &= _monotone([bd.theorem3_bound(1.3, 1.0, 2.0, 0.1, p, 4.0, 100, dl).value for dl in deltas], False)
        ok &= _monotone([bd.rademacher_phi_bound(1.3, 1.0, 2.0, 0.1, p, int(n)).value for n in ns], False)
        ok &= _monotone([bd.adaptation_bound(1.3, 1.0, 2.0, r, 1.0, 4.0, 100, 0.05).value for r in rhos], True)
    for kind, params in (("network", dict(d=3, r0=1.0, B=1.0, s_sup=1.0, s_prime_sup=1.0)),
                         ("rkhs", dict(d=2, r0=1.0, B=1.0, sigma=1.0, r=1.0))):
        ok &= _monotone([bd.corollary_constants(kind, int(n), 0.05, **params).report.value for n in ns], False)
        ok &= _monotone([bd.corollary_constants(kind, 100, dl, **params).report.value for dl in deltas], False)
    ok &= _monotone([ad.adaptation_radius(0.3, int(n), int(n), 1.0, 3, 0.05) for n in ns], False)
    record(8, ok, "monotonicity in n, rho and delta on 60-point grids")
    assert ok


def test_c09_adaptation(record):
    space = InstanceSpace(3, 1.5, 0.6, "lp_product", 1.0)
    F = ad.shift_trap_class(space)
    scenario = ad.shift_trap_scenario()
    exact = True
    minimax_only = ordinary_only = both = 0
    for seed in range(200):
        data = ad.generate_drift(scenario, 40, 40, seed, 200)
        run = ad.run_adaptation(F, data, space, 1.0, 0.1)
        log_term = math.log(4 * ad.DEFAULT_CA / 0.1)
        expect = run.w_hat + (log_term / (ad.DEFAULT_CB * 40)) ** (1 / 3) + (log_term / (ad.DEFAULT_CB * 40)) ** (1 / 3)
        exact &= run.radius == expect
        a = run.result.selected.name != "trap"
        b = run.baseline.selected.name != "trap"
        minimax_only += a and not b
        ordinary_only += b and not a
        both += a and b
    discordant = minimax_only + ordinary_only
    pval = binomtest(minimax_only, discordant, 0.5, alternative="greater").pvalue if discordant else 1.0
    ok = exact and pval < 0.05
    record(9, exact, "radius rule recomputed exactly on 200 seeds")
    record(9, pval < 0.05, f"robust picks: minimax-only {minimax_only}, ordinary-only {ordinary_only}, "
                           f"both {both}; sign test p={pval:.1e}")
    assert ok


def _dataset(path, rng, n, d, shift=0.0):
    x = rng.uniform(-0.5, 0.5, size=(n, d))
    x[:, 0] += shift
    y = 0.5 * x[:, -1] + rng.uniform(-0.2, 0.2, n)
    save_dataset(path, EmpiricalDistribution.uniform(PointSet(x, y)))


def test_c10_cli_determinism(record, tmp_path, monkeypatch, capsys):
    rng = np.random.default_rng(101)
    src, tgt = tmp_path / "source.csv", tmp_path / "target.csv"
    _dataset(src, rng, 12, 2)
    _dataset(tgt, rng, 10, 2, shift=0.4)
    (tmp_path / "scenario.ini").write_text("[scenario]\nn = 20\nm = 20\nn_test = 50\nseeds = 2\n")
    commands = {
        "wass": ["wass", str(src), str(tgt), "--p", "2", "--plan-csv", "{out}/plan.csv"],
        "worst-case": ["worst-case", str(src), "--rho", "0.1", "--candidates", "grid:3"],
        "erm": ["erm", str(src)],
        "minimax-erm": ["minimax-erm", str(src), "--rho", "0.2"],
        "minimax-erm-grid": ["minimax-erm", str(src), "--rho", "0.2", "--lambda-grid", "0,0.5,1,2,4"],
        "bounds": ["bounds", "--kind", "theorem3", "--sweep-n", "10,100", "--sweep-rho", "0.1,0.5"],
        "bounds-corollary": ["bounds", "--kind", "corollary-rkhs", "--d", "2"],
        "casebook": ["casebook", "--rho", "0.02,0.05", "--trials", "2000", "--grid-size", "500"],
        "adapt": ["adapt", "--config", str(tmp_path / "scenario.ini"), "--seed", "3"],
        "verify": ["verify", "duality", "--seeds", "20", "--seed", "5"],
    }
    same = []
    for name, argv in commands.items():
        out = tmp_path / name
        out.mkdir()
        args = [a.format(out=out) for a in argv] + ["--out", str(out)]
        snapshots = []
        for _ in range(2):
            assert main(args) == 0, name
            snapshots.append({f.name: f.read_bytes() for f in sorted(out.iterdir())})
        same.append(bool(snapshots[0]) and snapshots[0] == snapshots[1])
    capsys.readouterr()
    ok = all(same)
    bad = [n for n, s in zip(commands, same) if not s]
    record(10, ok, f"{sum(same)}/{len(same)} subcommand runs byte-identical" + (f"; differ: {bad}" if bad else ""))
    assert ok
