"""etuq: sparse-grid and tensor-train UQ for coupled electrothermal models."""

__version__ = "0.1.0"
