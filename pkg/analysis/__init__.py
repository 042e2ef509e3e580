"""Parameter-space and activation-space analysis of trained models."""
