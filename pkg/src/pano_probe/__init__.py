"""Statistical probes for panoramic image-text alignment.

Core pipeline: manifest ingestion -> panorama variants -> alignment scores
over a pluggable embedding provider -> one-sided signed-rank tests -> probe
reports.  A FastAPI service wraps the pipeline; the CLI is a thin client.
"""

from .corpus import (
    Dataset,
    GenericPrompt,
    ImageTextPair,
    default_directional_cues,
    filter_directional,
    parse_manifest,
    substitute_cue,
)
from .errors import (
    DegenerateSampleError,
    ManifestError,
    MissingEmbeddingError,
    NoKneeError,
    PanoProbeError,
    ServiceTransportError,
    StoreFormatError,
    TransformError,
    ValidationError,
)
from .finetune_math import (
    CombinedLossInputs,
    LossCurve,
    charbonnier,
    combined_loss,
    combined_loss_grad,
    derive_lambda,
    knee_point,
    lambda_from_knees,
    read_loss_curve,
    write_loss_curve,
)
from .probes import (
    ConditionResult,
    ProbeConfig,
    ProbeReport,
    compare_reports,
    probe_textual,
    probe_visual,
)
from .report import BoxplotSummary, boxplot_summary, render_table
from .scoring import (
    EmbeddingRecord,
    EmbeddingStore,
    ServiceProvider,
    clip_score,
    generic_prompt_variant,
    normalize,
    store_read,
    store_write,
)
from .stats import (
    StabilityBound,
    TestResult,
    quartiles,
    shapiro_wilk,
    stability_bound,
    stability_test,
    superiority_test,
    wilcoxon_one_sided,
)
from .transforms import (
    ImageBuffer,
    ShiftSchedule,
    VariantIndex,
    circular_shift,
    hflip,
    materialize_variants,
    shift_schedule,
)

__version__ = "0.1.0"
