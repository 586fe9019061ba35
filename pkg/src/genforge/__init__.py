"""Desk-scale generative models for grayscale images, evaluation metrics,
and a blinded reader-study service."""

from .errors import (
    ConflictError,
    DegenerateInputError,
    DomainError,
    FormatError,
    GenforgeError,
    InvalidInputError,
    InvalidStateError,
    NotFoundError,
    ShapeError,
    TrainingDivergedError,
    UnsupportedOperationError,
)
from .imageset import (
    ImageSet,
    Volume,
    clip_percentile,
    load_set,
    normalize_max,
    save_set,
    trim_volume,
)
from .losses import (
    FeatureExtractor,
    LatentCode,
    adain,
    gan_minmax_value,
    introvae_encoder_loss,
    introvae_generator_loss,
    kl_gaussian,
    mean_squared_error,
    perceptual_loss,
    reparameterize,
    vae_loss,
    wgan_losses,
)
from .metrics import (
    MetricReport,
    dataset_similarity,
    evaluate_all,
    intra_sample_diversity,
    laplace_aggregate,
    laplace_sharpness,
    min_intra_sample_diversity,
    reconstruction_eval,
)
from .models import (
    ARCHITECTURES,
    ModelParams,
    TrainingLog,
    build_model,
    load_model,
    reconstruct,
    sample,
    save_model,
    train,
)
from .phantom import phantom_generate
from .study import (
    SessionStore,
    StudySession,
    cohen_kappa,
    confusion_table,
    create_session,
    export_report,
    record_response,
)
from .tensor import AdamState, Tensor, adam_step, backward, grad_check

__version__ = "0.1.0"
