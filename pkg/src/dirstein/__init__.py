"""dirstein: finite-population allele-frequency chains, their Dirichlet
approximation bounds, and the Stein machinery that certifies them."""

__version__ = "0.1.0"

from .simplex import (
    DirichletParams,
    RngStream,
    SimplexPoint,
    dirichlet_density,
    dirichlet_mixed_moment,
    dirichlet_sample,
    theta_exponent,
)
from .offspring import (
    OffspringModel,
    OffspringMoments,
    aggregate_moments,
    enumerate_law,
    mohle_diagnostics,
    sample_offspring,
    verify_moment_identities,
)
from .mutation import (
    MutationMatrix,
    MutationSummary,
    fit_dirichlet_params,
    remainder_R,
    summarize,
    transition_probs,
)
from .chains import (
    ChainModel,
    ChainState,
    StationaryRun,
    check_irreducible,
    default_burn_in,
    run_to_stationarity,
    step_cannings,
    step_wright_fisher,
    verify_conditional_moments_wf,
)
from .stein import (
    DeathProcessSchedule,
    NestedConfig,
    PairBound,
    PairHooks,
    SmoothField,
    TestFunction,
    attach_mean,
    characterization_mc,
    characterization_residual,
    exchangeable_pair_bound,
    solve_stein_f,
    stein_level_sums,
    stein_operator_apply,
    verify_solution_bounds,
)
from .bounds import (
    BoundReport,
    lemma_budgets_wf,
    rho_budget,
    theorem1_bound,
    theorem2_bound,
    theorem4_bound,
)
from .metrics import (
    GapEstimate,
    K2Distance,
    ProbeEstimate,
    StationaryTable,
    attach_exact_means,
    convex_probe_k3,
    dirichlet_reference,
    exact_stationary,
    kolmogorov_k2,
    gap_table_csv,
    make_battery,
    reg_inc_beta,
    smooth_gap,
)
from .polya import (
    PairIdentityReport,
    UrnCertification,
    UrnState,
    certify_theorem4,
    resample_pair,
    sample_final,
    simulate_urn,
    urn_mixed_moment,
    verify_pair_identities,
)

__all__ = [
    "DirichletParams",
    "RngStream",
    "SimplexPoint",
    "dirichlet_density",
    "dirichlet_mixed_moment",
    "dirichlet_sample",
    "theta_exponent",
    "OffspringModel",
    "OffspringMoments",
    "aggregate_moments",
    "enumerate_law",
    "mohle_diagnostics",
    "sample_offspring",
    "verify_moment_identities",
    "MutationMatrix",
    "MutationSummary",
    "fit_dirichlet_params",
    "remainder_R",
    "summarize",
    "transition_probs",
    "ChainModel",
    "ChainState",
    "StationaryRun",
    "check_irreducible",
    "default_burn_in",
    "run_to_stationarity",
    "step_cannings",
    "step_wright_fisher",
    "verify_conditional_moments_wf",
    "DeathProcessSchedule",
    "NestedConfig",
    "PairBound",
    "PairHooks",
    "SmoothField",
    "TestFunction",
    "attach_mean",
    "characterization_mc",
    "characterization_residual",
    "exchangeable_pair_bound",
    "solve_stein_f",
    "stein_level_sums",
    "stein_operator_apply",
    "verify_solution_bounds",
    "BoundReport",
    "lemma_budgets_wf",
    "rho_budget",
    "theorem1_bound",
    "theorem2_bound",
    "theorem4_bound",
    "GapEstimate",
    "K2Distance",
    "ProbeEstimate",
    "StationaryTable",
    "attach_exact_means",
    "convex_probe_k3",
    "dirichlet_reference",
    "exact_stationary",
    "kolmogorov_k2",
    "gap_table_csv",
    "make_battery",
    "reg_inc_beta",
    "smooth_gap",
    "PairIdentityReport",
    "UrnCertification",
    "UrnState",
    "certify_theorem4",
    "resample_pair",
    "sample_final",
    "simulate_urn",
    "urn_mixed_moment",
    "verify_pair_identities",
    "__version__",
]
