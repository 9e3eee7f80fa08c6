"""Fully connected network with rectifier activations.

Squared loss for regression, softmax cross-entropy for classification.
Training is full-batch gradient descent with Armijo backtracking (halve the
step until the loss decreases), which makes the recorded training loss
non-increasing by construction and keeps fits fully deterministic. The
analytic gradient is verifiable against central finite differences via
``gradient_check``.
"""

from __future__ import annotations

import numpy as np


def _init_layers(sizes, rng):
    """He-scaled weights; returned as a flat parameter vector plus shapes."""
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        scale = np.sqrt(2.0 / fan_in)
        weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def pack(weights, biases):
    return np.concatenate([w.ravel() for w in weights] + [b for b in biases])


def unpack(theta, sizes):
    weights = []
    biases = []
    pos = 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(theta[pos:pos + fan_in * fan_out].reshape(fan_in, fan_out))
        pos += fan_in * fan_out
    for fan_out in sizes[1:]:
        biases.append(theta[pos:pos + fan_out])
        pos += fan_out
    return weights, biases


def _forward(theta, sizes, X):
    weights, biases = unpack(theta, sizes)
    a = X
    activations = [a]
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(a @ w + b, 0.0)
        activations.append(a)
    out = a @ weights[-1] + biases[-1]
    return out, activations


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_and_grad(theta, sizes, X, Y, task, l2=0.0):
    """Mean loss over rows and its gradient with respect to theta.

    Y is (n, 1) targets for regression or (n, K) one-hot labels for
    classification.
    """
    n = len(X)
    weights, biases = unpack(theta, sizes)
    out, activations = _forward(theta, sizes, X)
    if task == "regression":
        diff = out - Y
        loss = float(0.5 * np.mean(diff**2))
        delta = diff / n
    else:
        prob = _softmax(out)
        eps = 1e-12
        loss = float(-np.mean(np.sum(Y * np.log(np.clip(prob, eps, None)), axis=1)))
        delta = (prob - Y) / n
    grad_w = [None] * len(weights)
    grad_b = [None] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * (activations[layer] > 0)
    if l2 > 0:
        loss += 0.5 * l2 * float(sum((w**2).sum() for w in weights))
        grad_w = [gw + l2 * w for gw, w in zip(grad_w, weights)]
    return loss, pack(grad_w, grad_b)


def fit_mlp(X, y, task, n_classes, seed, X_val=None, y_val=None,
            hidden=(32,), epochs=300, lr=0.05, l2=0.0):
    n, p = X.shape
    out_dim = 1 if task == "regression" else n_classes
    sizes = (p, *hidden, out_dim)
    rng = np.random.default_rng(seed)
    theta = pack(*_init_layers(sizes, rng))

    y_mean, y_sd = 0.0, 1.0
    if task == "regression":
        y_mean = float(np.mean(y))
        y_sd = float(np.std(y)) or 1.0
        Y = ((y - y_mean) / y_sd).reshape(-1, 1).astype(float)
        Y_val = (None if y_val is None
                 else ((y_val - y_mean) / y_sd).reshape(-1, 1).astype(float))
    else:
        Y = np.zeros((n, n_classes))
        Y[np.arange(n), y.astype(int)] = 1.0
        if y_val is None:
            Y_val = None
        else:
            Y_val = np.zeros((len(y_val), n_classes))
            Y_val[np.arange(len(y_val)), y_val.astype(int)] = 1.0

    curve = []
    loss, grad = loss_and_grad(theta, sizes, X, Y, task, l2)
    step = lr
    for epoch in range(1, epochs + 1):
        # Armijo backtracking: shrink the step until the loss decreases
        for _ in range(40):
            cand = theta - step * grad
            cand_loss, cand_grad = loss_and_grad(cand, sizes, X, Y, task, l2)
            if cand_loss <= loss:
                theta, loss, grad = cand, cand_loss, cand_grad
                step = min(step * 1.2, lr * 10.0)
                break
            step *= 0.5
        if X_val is not None:
            val_loss, _ = loss_and_grad(theta, sizes, X_val, Y_val, task, 0.0)
        else:
            val_loss = loss
        curve.append((epoch, loss, float(val_loss)))
    params = {
        "sizes": [int(s) for s in sizes],
        "theta": theta.tolist(),
        "n_classes": 0 if task == "regression" else n_classes,
        "y_mean": y_mean,
        "y_sd": y_sd,
    }
    return params, curve


def mlp_predict(params, X, task):
    theta = np.asarray(params["theta"], dtype=float)
    sizes = tuple(params["sizes"])
    weights, biases = unpack(theta, sizes)
    # einsum keeps each row's reduction order independent of the batch size,
    # so single-row and batched predictions agree bit for bit
    a = X
    for w, b in zip(weights[:-1], biases[:-1]):
        a = np.maximum(np.einsum("ij,jk->ik", a, w) + b, 0.0)
    out = np.einsum("ij,jk->ik", a, weights[-1]) + biases[-1]
    if task == "regression":
        return out[:, 0] * params.get("y_sd", 1.0) + params.get("y_mean", 0.0)
    return _softmax(out)


def gradient_check(params, X, y, task, epsilon=1e-5, grad_scale=1.0):
    """Max relative error of the analytic gradient vs central differences.

    ``grad_scale`` deliberately corrupts the analytic gradient; the test
    harness uses it to confirm the check detects wrong gradients.
    """
    theta = np.asarray(params["theta"], dtype=float)
    sizes = tuple(params["sizes"])
    n_classes = params.get("n_classes", 0)
    if task == "regression":
        ys = (np.asarray(y, dtype=float) - params.get("y_mean", 0.0)) / params.get("y_sd", 1.0)
        Y = ys.reshape(-1, 1)
    else:
        y_idx = np.asarray(y, dtype=int)
        Y = np.zeros((len(y_idx), n_classes))
        Y[np.arange(len(y_idx)), y_idx] = 1.0
    _, analytic = loss_and_grad(theta, sizes, X, Y, task)
    analytic = analytic * grad_scale
    numeric = np.empty_like(analytic)
    for i in range(len(theta)):
        bump = np.zeros_like(theta)
        bump[i] = epsilon
        lo, _ = loss_and_grad(theta - bump, sizes, X, Y, task)
        hi, _ = loss_and_grad(theta + bump, sizes, X, Y, task)
        numeric[i] = (hi - lo) / (2.0 * epsilon)
    denom = np.maximum(np.abs(numeric), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom))
