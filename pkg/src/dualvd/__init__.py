"""Dual-encoding visual dialogue ranking on a hand-written float64 autodiff core."""
from .checkpoint import CheckpointError
from .data import Batch, DatasetError, Dialogue, Round, read_dataset, write_dataset
from .gradcheck import EvaluationError, grad_check, grad_errors
from .metrics import EvalRecord, compute_metrics, ndcg
from .model import AnswerScores, GateTrace, forward, forward_batch, gate_ratio
from .optim import LrSchedule, OptimizerState, adam_step, lr_at
from .params import ModelConfig, ModelVariant, init_params
from .semantic import ConfigurationError
from .synth import GenerationError, SynthConfig, generate_dataset
from .tensor import DimensionError, Tape, Tensor
from .text import Vocabulary, VocabularyError
from .train import NumericError, RunConfig, ablate, evaluate, train
from .visual import SceneGraph

__version__ = "0.1.0"

__all__ = [
    "AnswerScores", "Batch", "CheckpointError", "ConfigurationError", "DatasetError", "Dialogue",
    "DimensionError", "EvalRecord", "EvaluationError", "GateTrace", "GenerationError", "LrSchedule",
    "ModelConfig", "ModelVariant", "NumericError", "OptimizerState", "Round", "RunConfig",
    "SceneGraph", "SynthConfig", "Tape", "Tensor", "Vocabulary", "VocabularyError", "ablate",
    "adam_step", "compute_metrics", "evaluate", "forward", "forward_batch", "gate_ratio",
    "generate_dataset", "grad_check", "grad_errors", "init_params", "lr_at", "ndcg",
    "read_dataset", "train", "write_dataset",
]
