"""Discrete Wasserstein gradient flows on equal-mass particle measures."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .functionals import (
    Functional,
    Interaction,
    Potential,
    Sum,
    Zero,
    energy,
    metric_slope,
    parse_functional,
    strong_subdifferential,
)
from .geometry import (
    BasedPlan,
    based_plan,
    check_hilbertian_identity,
    check_transport_geodesic_identity,
    four_point_glue,
    generalized_geodesic,
    geodesic,
    pseudo_metric,
    transport_metric,
)
from .measures import InstanceSeed, ParticleMeasure, make_measure, random_measure, second_moment
from .proximal import ProxResult, el_residual, prox_split_check, proximal_step, quadratic_perturbation
from .transport import (
    TransportMap,
    TransportPlan,
    brute_force_map,
    is_cyclically_monotone,
    optimal_map,
    wasserstein_distance,
)
from .flow import (
    FlowTrace,
    ReferenceFlow,
    discrete_flow,
    energy_dissipation_check,
    exponential_formula_experiment,
    reference_flow,
    semigroup_checks,
    varying_flow,
)
from .verify import InequalityReport, check, sweep
