"""Shared helpers: logging setup, seed derivation and bounded parallelism."""
