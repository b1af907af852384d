from .backbone import Backbone, Block, forward_backbone, warm_up
from .checkpoint import (
    Checkpoint,
    capture_rng,
    frozen_bytes,
    load_checkpoint,
    read_checkpoint,
    restore_optimizer,
    save_checkpoint,
)
from .decoders import LinearDecoder, TransformerDecoder, decode_linear, decode_transformer, to_frame
from .network import (
    DEFAULT_DESCRIPTION,
    Encoded,
    NetworkConfig,
    SignalLanguageModel,
    build_model,
    classify,
)

__all__ = [
    "Backbone", "Block", "forward_backbone", "warm_up",
    "Checkpoint", "capture_rng", "frozen_bytes", "load_checkpoint", "read_checkpoint",
    "restore_optimizer", "save_checkpoint",
    "LinearDecoder", "TransformerDecoder", "decode_linear", "decode_transformer", "to_frame",
    "DEFAULT_DESCRIPTION", "Encoded", "NetworkConfig", "SignalLanguageModel", "build_model", "classify",
]
