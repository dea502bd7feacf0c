"""A compiler for conditional term rewriting with maximally shared terms."""

__version__ = "0.1.0"
