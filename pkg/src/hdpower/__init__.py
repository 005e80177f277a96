"""hdpower: power enhancement diagnostics for high-dimensional tests.

Build tests, find their removable blind spots via the spike-mixture bound,
enhance them, and verify the closed-form size/power facts by reproducible
Monte Carlo.
"""

__version__ = "0.1.0"

from .distributions import (
    chi2_cdf,
    chi2_quantile,
    gaussian_tv,
    log_sum_exp,
    noncentral_chi2_cdf,
    std_normal_cdf,
    std_normal_quantile,
)
from .errors import (
    CalibrationError,
    DomainError,
    HdPowerError,
    ParameterError,
    SpecError,
)
from .harness import (
    McConfig,
    PowerEstimate,
    RegimeSpec,
    ResultRow,
    consistency_diagnostic,
    embedding_equivalence_check,
    enhanceability_demo,
    estimate_rejection_prob,
    example2_nontestability_curve,
    lan_remainder_check,
    rows_to_csv,
    run_regime,
)
from .mixture import (
    BlindSpotReport,
    MixtureDiagnostics,
    average_spike_power,
    find_blind_spot,
    mixture_diagnostics,
    mixture_likelihood_ratio,
    power_gap_bound,
    second_moment_minus_one,
)
from .models import (
    FixedDesignRegression,
    GaussianLocationModel,
    ScaledGaussianModel,
    SpikeAlternative,
    embed,
    spike_alternative,
)
from .rng import substream
from .testfuncs import (
    TestFunction,
    chi2_euclidean_test,
    chi2_exact_power,
    constant_test,
    enhance,
    halfspace_test,
    make_test,
    spike_z_exact_power_at_spike,
    spike_z_exact_size,
    spike_z_test,
    sup_norm_exact_size,
    sup_norm_test,
    truncated_score_test,
    wald_test,
    wald_test_at_level,
)

__all__ = [
    "__version__",
    "BlindSpotReport",
    "CalibrationError",
    "DomainError",
    "FixedDesignRegression",
    "GaussianLocationModel",
    "HdPowerError",
    "McConfig",
    "MixtureDiagnostics",
    "ParameterError",
    "PowerEstimate",
    "RegimeSpec",
    "ResultRow",
    "ScaledGaussianModel",
    "SpecError",
    "SpikeAlternative",
    "TestFunction",
    "average_spike_power",
    "chi2_cdf",
    "chi2_euclidean_test",
    "chi2_exact_power",
    "chi2_quantile",
    "consistency_diagnostic",
    "constant_test",
    "embed",
    "embedding_equivalence_check",
    "enhance",
    "enhanceability_demo",
    "estimate_rejection_prob",
    "example2_nontestability_curve",
    "find_blind_spot",
    "gaussian_tv",
    "halfspace_test",
    "lan_remainder_check",
    "log_sum_exp",
    "make_test",
    "mixture_diagnostics",
    "mixture_likelihood_ratio",
    "noncentral_chi2_cdf",
    "power_gap_bound",
    "rows_to_csv",
    "run_regime",
    "second_moment_minus_one",
    "spike_alternative",
    "spike_z_exact_power_at_spike",
    "spike_z_exact_size",
    "spike_z_test",
    "std_normal_cdf",
    "std_normal_quantile",
    "substream",
    "sup_norm_exact_size",
    "sup_norm_test",
    "truncated_score_test",
    "wald_test",
    "wald_test_at_level",
]
