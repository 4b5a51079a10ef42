"""Session-based next-item recommendation with repeat/explore modes and
group-level behavior patterns."""
from .data import Dataset, Session, ingest, preprocess
from .gbp import PatternVocab, compute_stats, enumerate_patterns, extract_gbp
from .model import RNMSR, ModelConfig
from .train import TrainConfig, run_ablation

__version__ = "0.1.0"
