"""
Dense numerical kernel.

Matrices are 2-D float64 numpy arrays (row-major). Everything the model,
analysis and ablation code computes goes through this package.
"""
