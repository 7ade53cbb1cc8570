"""Decoding-strategy orchestration with prefix-guided sampling.

The extract-and-sample loop (run_path_consistency) reuses
confidence-vetted reasoning prefixes from earlier branches to steer and
shorten later ones; self-consistency, adaptive stopping, and window-unanimity
early exit are provided as baselines.  The analysis module evaluates the
strategy's two-answer reliability model exactly, and the metrics module
accounts for where generated tokens went.
"""

from .analysis import (
    AnalysisParams,
    AnalysisResult,
    MonteCarloEstimate,
    exact_result,
    monte_carlo,
    p_correct_prime,
    p_shift,
    p_vote,
    safety_margin,
    sweep_grid,
    taylor_gap,
)
from .backends import (
    BackendError,
    BackendTimeoutError,
    BackendUnavailableError,
    Completion,
    CompletionBackend,
    CompletionRequest,
    FixtureError,
    MalformedResponseError,
    RemoteBackend,
    ScriptedBackend,
    ScriptedRecord,
    SyntheticBackend,
    SyntheticModelParams,
)
from .confidence import (
    ConfidenceReport,
    EmptyTallyError,
    beta_confidence,
    confidence_gate,
    tally,
    tally_or_none,
)
from .core import (
    NO_ANSWER,
    AnswerKind,
    Question,
    ReasoningPath,
    RunConfig,
    RunTrace,
    SamplingParams,
    Strategy,
    VoteTally,
    WindowEvent,
    extract_answer,
    make_stem,
    normalize_answer,
)
from .orchestrator import (
    aggregate,
    run_adaptive_consistency,
    run_early_stopping,
    run_path_consistency,
    run_self_consistency,
    run_strategy,
)
from .prefix import (
    PrefixPool,
    advance_pool,
    extract_prefixes,
    sample_prefix,
    split_sentences,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisParams",
    "AnalysisResult",
    "AnswerKind",
    "BackendError",
    "BackendTimeoutError",
    "BackendUnavailableError",
    "Completion",
    "CompletionBackend",
    "CompletionRequest",
    "ConfidenceReport",
    "EmptyTallyError",
    "FixtureError",
    "MalformedResponseError",
    "MonteCarloEstimate",
    "NO_ANSWER",
    "PrefixPool",
    "Question",
    "ReasoningPath",
    "RemoteBackend",
    "RunConfig",
    "RunTrace",
    "SamplingParams",
    "ScriptedBackend",
    "ScriptedRecord",
    "Strategy",
    "SyntheticBackend",
    "SyntheticModelParams",
    "VoteTally",
    "WindowEvent",
    "advance_pool",
    "aggregate",
    "beta_confidence",
    "confidence_gate",
    "exact_result",
    "extract_answer",
    "extract_prefixes",
    "make_stem",
    "monte_carlo",
    "normalize_answer",
    "p_correct_prime",
    "p_shift",
    "p_vote",
    "run_adaptive_consistency",
    "run_early_stopping",
    "run_path_consistency",
    "run_self_consistency",
    "run_strategy",
    "safety_margin",
    "sample_prefix",
    "split_sentences",
    "sweep_grid",
    "tally",
    "tally_or_none",
    "taylor_gap",
]
