"""Command-line experiment harness: configuration, runs, CSV/JSON emission and plots."""
