"""Critical-point search and certification for J_λ."""

from .classify import DistinctSolution, SolutionSummary, classify_solutions
from .experiment import ExperimentReport, LambdaResult, multiplicity_experiment
from .geometry import GeometryReport, ray_maximiser, sphere_minimum, sup_over_Ekh, verify_geometry
from .nabla import NablaEstimate, estimate_nabla_condition
from .newton import CriticalPointRecord, converged, deflated_newton, normalised_distance
from .seeds import seed_generator
from .split import SubspaceSplit, split_subspaces

__all__ = [
    "DistinctSolution",
    "ExperimentReport",
    "LambdaResult",
    "SolutionSummary",
    "classify_solutions",
    "multiplicity_experiment",
    "CriticalPointRecord",
    "GeometryReport",
    "NablaEstimate",
    "SubspaceSplit",
    "converged",
    "deflated_newton",
    "estimate_nabla_condition",
    "normalised_distance",
    "ray_maximiser",
    "seed_generator",
    "sphere_minimum",
    "split_subspaces",
    "sup_over_Ekh",
    "verify_geometry",
]
