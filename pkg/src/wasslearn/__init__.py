"""Local minimax learning over Wasserstein balls on finite supports."""

from importlib.metadata import PackageNotFoundError, version as _version

from .adaptation import adaptation_radius, feature_wasserstein, generate_drift, run_adaptation
from .bounds import BoundReport, EntropyProfile, comp_entropy_integral
from .dual import DualSolution, lambda_bracket, local_worst_case_risk, phi
from .erm import ErmResult, fixed_lambda_erm, minimax_erm, ordinary_erm
from .hypotheses import Hypothesis, HypothesisClass
from .spaces import (
    AmbiguityBall,
    DataError,
    EmpiricalDistribution,
    InstanceSpace,
    Point,
    PointSet,
    StructuralError,
    distance,
    load_dataset,
    sample_uniform_interval,
    save_dataset,
)
from .transport import SolverError, TransportPlan, WorstCaseCertificate, primal_worst_case_risk, wasserstein

try:
    __version__ = _version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"
