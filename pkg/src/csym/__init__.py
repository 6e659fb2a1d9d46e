"""Cokernels of random C-symmetric matrices: exact algebra, isotropy, limit laws and a Monte Carlo harness."""

from .errors import (
    BoundExceededError,
    CsymError,
    DimensionError,
    InfiniteGroupError,
    ModelError,
    NotPrimeError,
    NoWitnessError,
)
from .groups import (
    FiniteAbelianGroup,
    aut_order,
    count_hom,
    count_sur,
    exterior_square_order,
    order,
    torsion_of_order_dividing,
)
from .harness import (
    compare_classes,
    directional_checks,
    empirical_distribution,
    empirical_moment,
    moment_sum_oracle,
    verify_alternating_form_bound,
    verify_generation_bound,
)
from .isotropy import (
    GroupMap,
    IsotropyReport,
    build_witness,
    check_condition2_smith,
    check_condition3,
    exhaustive_witness_search,
    isotropy_probability_exact,
    isotropy_probability_mc,
    isotropy_report,
)
from .limits import LimitDistribution, cl_probability, sandpile_probability
from .linalg import ExactMatrix, cokernel, cokernel_mod, smith_normal_form
from .models import EntryDistribution, MatrixModel
from .rng import SeedSpec
from .stats import MomentEstimate

__version__ = "0.1.0"

__all__ = [
    "BoundExceededError",
    "CsymError",
    "DimensionError",
    "EntryDistribution",
    "ExactMatrix",
    "FiniteAbelianGroup",
    "GroupMap",
    "InfiniteGroupError",
    "IsotropyReport",
    "LimitDistribution",
    "MatrixModel",
    "ModelError",
    "MomentEstimate",
    "NoWitnessError",
    "NotPrimeError",
    "SeedSpec",
    "aut_order",
    "build_witness",
    "check_condition2_smith",
    "check_condition3",
    "cl_probability",
    "cokernel",
    "cokernel_mod",
    "compare_classes",
    "count_hom",
    "count_sur",
    "directional_checks",
    "empirical_distribution",
    "empirical_moment",
    "exhaustive_witness_search",
    "exterior_square_order",
    "isotropy_probability_exact",
    "isotropy_probability_mc",
    "isotropy_report",
    "moment_sum_oracle",
    "order",
    "sandpile_probability",
    "smith_normal_form",
    "torsion_of_order_dividing",
    "verify_alternating_form_bound",
    "verify_generation_bound",
]
