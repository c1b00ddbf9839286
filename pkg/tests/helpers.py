import numpy as np

from dualvd.params import ModelConfig, ModelVariant, param_shapes
from dualvd.tensor import Tensor


def random_params(seed=0, variant=ModelVariant.DualVD, scale=0.5, **dims):
    cfg = ModelConfig(**{"vocab_size": 12, "d_word": 3, "d_hid": 4, "d_obj": 4, "d_rel": 3, **dims})
    rng = np.random.default_rng(seed)
    return cfg, {k: scale * rng.standard_normal(s) for k, s in param_shapes(cfg, variant).items()}


def T(params):
    return {k: Tensor(v) for k, v in params.items()}


def one(x):
    """Batch of one as a Tensor."""
    return Tensor(np.asarray(x, dtype=np.float64)[None])
