"""triolab: tracking, inference, and policy optimization for non-stationary meta-RL."""

__version__ = "0.1.0"
