"""Two-party bargaining simulator for feature trading in vertical federated learning."""

__version__ = "0.1.0"
