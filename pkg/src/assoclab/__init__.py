"""Association toolkit: samplers, dominance couplings, oracles, MC tests."""

from .config import ConfigError, ExperimentConfig
from .dissection import (
    Dissection,
    DyadicBox,
    aggregate_counts,
    dyadic_dissection,
    gamma_counts,
    refine,
)
from .dominance import (
    Coupling,
    NotDominatedError,
    construct_coupling,
    dominance_witness,
    dominates,
)
from .fields import (
    CovarianceSpec,
    ExclusionSpec,
    FieldSample,
    random_integral_field,
    sample_dirichlet_sequence,
    sample_gaussian_field,
    sample_multinomial,
    sample_permutation,
    simulate_exclusion,
)
from .geometry import PointConfiguration, Window
from .measures import (
    GibbsSpec,
    GriddedMeasure,
    KernelMatrix,
    NonConvergenceError,
    UlcViolationError,
    area_interaction_chain,
    dpp_subset_law,
    is_ultra_log_concave,
    mark_points,
    restrict,
    sample_area_interaction,
    sample_cluster,
    sample_cox,
    sample_dirichlet_process,
    sample_dpp_finite,
    sample_ginibre_finite,
    sample_mixed_poisson,
    sample_mixed_sampled,
    sample_permanental,
    sample_poisson,
    superpose,
)
from .mctest import (
    TestFunctionFamily,
    TestReport,
    build_default_family,
    collect_counts,
    mc_association_test,
    test_counts,
    truncation_stability_test,
    weak_convergence_harness,
)
from .oracles import (
    JointPmf,
    bk_check,
    covariance_identity_check,
    disjoint_occurrence_probability,
    exact_association_check,
    random_monotone_values,
    reweighted_dominance_check,
)
from .order import (
    DiscreteDistribution,
    FinitePoset,
    ProductPoset,
    UpperSet,
    enumerate_upper_sets,
    is_monotone,
    load_poset,
    parse_poset,
    product_poset,
    upper_set_matrix,
)
from .runner import RunResult, run, run_file

__version__ = "0.1.0"
