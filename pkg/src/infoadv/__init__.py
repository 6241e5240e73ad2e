"""Adversarial view generation with KL-regularized graph contrastive learning."""
from .config import TrainConfig, default_config, load_config, variant_config
from .encoder import ProjectionHead, TargetEncoder
from .evaluation import EvalReport, MeanClassifier, gcl_ge, link_predict_eval, linear_probe, mean_classifier_eval
from .generator import ViewGenerator, generate_view
from .graph import Graph, load_graph, save_graph, sbm_generate
from .kernels import BACKEND
from .trainer import TrainLog, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EvalReport",
    "Graph",
    "MeanClassifier",
    "ProjectionHead",
    "TargetEncoder",
    "TrainConfig",
    "TrainLog",
    "TrainResult",
    "ViewGenerator",
    "default_config",
    "gcl_ge",
    "generate_view",
    "link_predict_eval",
    "linear_probe",
    "load_config",
    "load_graph",
    "mean_classifier_eval",
    "save_graph",
    "sbm_generate",
    "train",
    "variant_config",
]
