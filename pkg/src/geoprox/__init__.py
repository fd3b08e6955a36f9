"""Fixed-point experiments for prox mappings on Euclidean space and sphere caps."""

from .spaces import DomainError, Euclidean, ModelSpace, SphereCap, local_convexity_constant
from .functions import (Ball, Halfspace, Indicator, Linear, Power, ProxParams, Radial, Segment,
                        moreau_envelope, project, prox, prox_oracle)
from .operators import (KM, Average, Compose, DomainEscape, EmptySet, Identity, KnownPoint,
                        KnownSet, PointMap, Project, Prox, Unknown, apply, barycenter,
                        fixed_point_distance, surrogate)
from .certificates import (Certificate, RatePrediction, a_priori_constant, asymptotic_certificate,
                           certify_operator, compose_certificates, cyclic_projections_certificate,
                           finite_certificate, km_certificate, linear_rate, prox_certificate,
                           rate_from_certificate)
from .regularity import (BallRegion, BoxRegion, SampleSpec, check_gauge_monotone,
                         check_quasi_strict, estimate_subregularity, estimate_violation,
                         firmness_frontier, tail_sum)
from .harness import ExperimentConfig, analyze, iterate, preset, run_experiment

__version__ = "0.1.0"
