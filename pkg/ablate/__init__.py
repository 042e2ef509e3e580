"""Ablation experiments: component substitution and strong-neuron pruning."""
