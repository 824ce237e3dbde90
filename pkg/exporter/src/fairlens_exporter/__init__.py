"""fairlens-exporter: one-way producer of embjsonl embedding files.

The exporter runs a pre-trained image-text encoder (or the built-in
deterministic dev encoder) and writes the audit engine's file format. It
never computes metrics, so audit correctness never depends on ML-framework
versions.
"""

__version__ = "0.1.0"
