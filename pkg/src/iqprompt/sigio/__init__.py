"""Signal generation, channel simulation, augmentation, persistence and SG baseline."""

from .augment import (
    augment_phase_rotate,
    augment_reverse,
    augment_time_warp,
    normalize,
    random_warp_knots,
    warp_function,
)
from .benchmark import GeneratorConfig, derive_seed, make_synthetic_benchmark, split_counts
from .channel import add_awgn, apply_channel, estimate_snr
from .frames import NOISELESS, ChannelSpec, IQFrame, SignalDataset, is_noiseless
from .modulation import SCHEMES, constellation, generate_modulated
from .sgfilter import sg_filter
from .storage import load_dataset, manifest_path, save_dataset

__all__ = [
    "NOISELESS", "SCHEMES", "ChannelSpec", "GeneratorConfig", "IQFrame", "SignalDataset",
    "add_awgn", "apply_channel", "augment_phase_rotate", "augment_reverse", "augment_time_warp",
    "constellation", "derive_seed", "estimate_snr", "generate_modulated", "is_noiseless",
    "load_dataset", "make_synthetic_benchmark", "manifest_path", "normalize", "random_warp_knots",
    "save_dataset", "sg_filter", "split_counts", "warp_function",
]
