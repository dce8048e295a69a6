"""Synthetic temporal-grounding annotations with controlled temporal bias."""

from .debias import adversarial_filter, icgf, longtail_split
from .evaluation import evaluate, iou, rc
from .metrics import bin_of, jsd, multilevel_tjsd, tjsd
from .pipeline import PipelineConfig, generate, write_outputs
from .records import AnnotationRecord, Dataset, load_jsonl, write_jsonl

__version__ = "0.1.0"

__all__ = [
    "AnnotationRecord", "Dataset", "PipelineConfig", "adversarial_filter", "bin_of",
    "evaluate", "generate", "icgf", "iou", "jsd", "load_jsonl", "longtail_split",
    "multilevel_tjsd", "rc", "tjsd", "write_jsonl", "write_outputs",
]
