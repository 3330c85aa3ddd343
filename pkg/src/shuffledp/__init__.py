"""Shuffled-model differential privacy: protocols, exact verifiers and reductions."""

__version__ = "0.1.0"

from .core import (
    Dataset,
    InvalidParamsError,
    MalformedTranscriptError,
    MessageMultiset,
    ProtocolParams,
    execute_local,
    execute_shuffled,
    shuffle,
    validate_params,
)
from .zsum import ZsumParams, compute_p, zsum_alpha, zsum_analyze, zsum_randomize, zsum_run
from .hist import (
    HistogramEstimate,
    HistParams,
    TrueHistogram,
    aggregate_simulate,
    hist_analyze,
    hist_execute,
    hist_randomize,
    simultaneous_error,
)
from .privacy import (
    Pmf,
    PrivacyReport,
    binomial_pmf,
    binomial_smoothness_bound,
    brute_force_shuffled_dp,
    hockey_stick,
    mneg_privacy_check,
    smoothness_min_delta,
    zsum_privacy_delta,
)
from .puredp import (
    FiniteRandomizerLaw,
    MultiMessageError,
    r_gap,
    r_infinity,
    simulate_local_from_shuffled,
)
from .apps import (
    MPJInstance,
    PCInstance,
    SupportInstance,
    required_samples,
    solve_mpj,
    solve_pc,
    solve_support,
)
