"""Token-level ensemble decoding with consistency-weighted fusion."""

__version__ = "0.1.0"
