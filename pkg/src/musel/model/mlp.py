"""Feature-extractor MLP: plain matrix math with a hand-written backward pass.

Rectifier after every layer except the last.  Parameters live in a flat
vector owned by the model; these functions take per-layer views.
"""

import numpy as np


def forward(weights, biases, x):
    """Forward pass.  Returns (features, cache) with cache holding the
    pre-activations and layer inputs needed for the backward pass."""
    h = x
    pre = []
    inputs = []
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        inputs.append(h)
        a = h @ w + b
        pre.append(a)
        h = a if i == last else np.maximum(a, 0.0)
    return h, (pre, inputs)


def backward(weights, cache, g_out):
    """Gradients of all weights/biases and nothing else.

    g_out is dF/d(features); the return mirrors (weights, biases).
    """
    pre, inputs = cache
    g_w = [None] * len(weights)
    g_b = [None] * len(weights)
    g = g_out
    for i in range(len(weights) - 1, -1, -1):
        if i != len(weights) - 1:
            g = g * (pre[i] > 0.0)
        g_w[i] = inputs[i].T @ g
        g_b[i] = g.sum(axis=0)
        if i:
            g = g @ weights[i].T
    return g_w, g_b


def input_gradient(weights, cache, g_out):
    """dF/d(input) for the same forward pass (unused by training; handy in
    tests for checking the chain rule end to end)."""
    pre, _ = cache
    g = g_out
    for i in range(len(weights) - 1, -1, -1):
        if i != len(weights) - 1:
            g = g * (pre[i] > 0.0)
        g = g @ weights[i].T
    return g
