"""Hardware-aware benchmarking of small quantum error-correcting codes."""
