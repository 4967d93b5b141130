"""Complete-case vs chained-equations multiple imputation for augmented survey samples."""

__version__ = "0.1.0"
