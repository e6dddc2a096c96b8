"""DAB stain quantification, focal optical density losses and IHC evaluation metrics."""

__version__ = "0.1.0"

from odstain._accel import BACKEND  # noqa: E402

__all__ = ["BACKEND", "__version__"]
