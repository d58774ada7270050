"""secref: a dynamic-semantics kit for safely sharing mutable references
between checked programs and untrusted linked code."""

__version__ = "0.1.0"
