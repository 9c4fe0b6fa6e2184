"""Command-line surface: train, eval, predict, check, synth, ablate."""
