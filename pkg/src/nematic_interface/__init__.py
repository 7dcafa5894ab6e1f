"""Q-tensor nematic-isotropic interface laboratory."""

__version__ = "0.1.0"
