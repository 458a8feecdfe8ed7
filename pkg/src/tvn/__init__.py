"""Black-box text-to-image model verification via non-transferable
adversarial prompt suffixes."""

from .baselines import BaselineKind, greedy_attack, random_attack
from .encoders import (
    RemoteEncoder,
    SyntheticEncoder,
    SyntheticEncoderSpec,
    cosine,
    normalize,
    reference_spec,
)
from .errors import (
    ArtifactError,
    ConfigError,
    EncoderProtocolError,
    EncoderTransportError,
    InvalidGenomeError,
    PipelineError,
    TvnError,
)
from .genome import (
    AdversarialPrompt,
    Alphabet,
    DEFAULT_ALPHABET,
    Suffix,
    compose,
    crossover,
    mutate,
    random_suffix,
)
from .nsga2 import (
    Individual,
    Nsga2Config,
    crowding_distance,
    dominates,
    evolve,
    fast_nondominated_sort,
    final_selection,
    tournament_select,
)
from .objectives import (
    ObjectiveContext,
    ObjectiveVector,
    eval_f1,
    eval_f2,
    eval_f3,
    eval_vector,
    eval_vectors,
)
from .prompts import DEFAULT_PROMPTS, PromptSet
from .simzoo import (
    ScoreModelConfig,
    SimImage,
    SimModel,
    Zoo,
    build_zoo,
    clip_text_score,
    generate,
    score_sample,
)
from .verify import (
    MetricsReport,
    SelectedPrompt,
    ThresholdBand,
    VerificationDecision,
    decide,
    evaluate,
    fit_band,
    fit_threshold,
    select_final_prompt,
)

__version__ = "0.1.0"
