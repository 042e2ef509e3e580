"""
GRU encoder-decoder with MLP attention, the attention guidance loss,
training/model selection and checkpoints.
"""
