"""Speech denoising in the discrete token domain of a miniature RVQ codec."""

__version__ = "0.1.0"
