import numpy as np
import pytest
import torch
from hypothesis import HealthCheck, settings

from iqprompt.config import BackboneConfig, FAFConfig, HPTRConfig
from iqprompt.model import NetworkConfig
from iqprompt.sigio import IQFrame

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")
torch.set_num_threads(1)


def micro_network(**overrides) -> NetworkConfig:
    """L=32, patch 8, D=16, one layer, two heads."""
    cfg = NetworkConfig(
        length=32,
        backbone=BackboneConfig(d_model=16, layers=1, heads=2, ff_mult=2, lora_rank=2, max_tokens=256,
                                decoder="linear"),
        hptr=HPTRConfig(n_anchors=8, top_k=3, patch_len=8, stride=8),
        faf=FAFConfig(),
        seed=overrides.pop("seed", 0),
    )
    for key, value in overrides.items():
        section, _, field = key.partition("__")
        if field:
            setattr(getattr(cfg, section), field, value)
        else:
            setattr(cfg, key, value)
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_frame(rng, n=32, **meta) -> IQFrame:
    return IQFrame(rng.standard_normal(n), rng.standard_normal(n), **meta)


def generic_point(model: torch.nn.Module, seed: int):
    """Redraw every trainable tensor at fan-in scale.

    Fresh initializations are special points (zero adapter B, bias-dominated
    features) where many partial derivatives nearly vanish and finite
    differences drown in roundoff; gradient checks run at a generic point.
    """
    g = torch.Generator().manual_seed(seed)
    dependent = {id(p) for p in model.parameters() if not p.requires_grad}
    with torch.no_grad():
        for p in model.parameters():
            if id(p) in dependent:
                continue
            scale = (p[0].numel()) ** -0.5 if p.dim() > 1 else 0.1
            p.copy_(torch.randn(p.shape, generator=g, dtype=p.dtype) * scale)
    return model
