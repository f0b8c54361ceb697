"""Shared helpers used across services."""

from tsd_lab.shared.io import atomic_write_json, atomic_write_text, atomic_write_tsv, read_json

__all__ = ["atomic_write_json", "atomic_write_text", "atomic_write_tsv", "read_json"]
