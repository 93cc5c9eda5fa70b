"""Human-in-the-loop DPSIR text mining: prompting pipeline, consistency-based
uncertainty estimation, and deterministic radial layouts."""

__version__ = "0.1.0"
