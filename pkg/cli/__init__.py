"""Command-line orchestration: configuration, pipeline steps, reports."""
