"""Command-line interface and HTTP service over the proof engine."""
