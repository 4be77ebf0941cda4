"""charlm: a self-contained miniature character-level transformer training
studio — corpus curation, live training, generation, evaluation, and
portable checkpoints, all on the local machine."""

__version__ = "0.1.0"

from .backend import active_kernels

__all__ = ["active_kernels", "__version__"]
