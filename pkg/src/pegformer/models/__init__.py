"""Learned precoders: edge GNNs, Transformers, and graph Transformers."""
from .checkpoint import CheckpointFormatError, load_checkpoint, save_checkpoint
from .nets import (
    MODEL_CLASSES,
    Model,
    build_model,
    edge_input,
    largest_divisor_at_most,
    sinusoidal_encoding,
)
from .spec import (
    ARCHS,
    BASEBAND_ARCHS,
    EQUIVARIANT_AXES,
    HYBRID_ARCHS,
    REFERENCE_HEADS,
    REFERENCE_HYPERPARAMS,
    ConfigError,
    ModelSpec,
    reference_spec,
)
