"""Joint CT/MR training with strong augmentation for whole-heart segmentation."""
from .errors import JointSegError
from .preprocess import Modality
from .volume_io import LabelMap, Volume3, read_volume, write_volume

__version__ = "0.1.0"

__all__ = ["JointSegError", "LabelMap", "Modality", "Volume3", "read_volume", "write_volume"]
