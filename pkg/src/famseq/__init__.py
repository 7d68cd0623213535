"""famseq: family-structured electrophysiology feature pipeline.

Subclass classification from 12-family feature tensors: sparse-PCA +
random-forest baseline, attention-BiLSTM sequence models with
imbalance-aware losses, and cross-species joint-training transfer.
"""

from .schema import (
    ALIGNED4,
    CANONICAL_FAMILIES,
    CellSequence,
    Dataset,
    FamilySchema,
    LabelSpace,
    MOUSE5,
    harmonize_dataset,
    harmonize_labels,
    sequence_tensor,
    to_sequence,
)
from .io import load_dataset, save_dataset

__all__ = [
    "ALIGNED4",
    "CANONICAL_FAMILIES",
    "CellSequence",
    "Dataset",
    "FamilySchema",
    "LabelSpace",
    "MOUSE5",
    "harmonize_dataset",
    "harmonize_labels",
    "load_dataset",
    "save_dataset",
    "sequence_tensor",
    "to_sequence",
]

__version__ = "0.1.0"
