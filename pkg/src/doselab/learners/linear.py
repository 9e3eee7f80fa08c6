"""Multinomial logistic regression and linear support vector machines.

The logistic model trains by full-batch gradient descent with backtracking;
the SVM trains in the primal by projected stochastic subgradient descent
(mini-batched, with the iterate projected onto the ball of radius
1/sqrt(reg_lambda)). Both record per-epoch loss curves.
"""

from __future__ import annotations

import numpy as np


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _stable_matmul(A, B):
    # einsum keeps each output row's reduction order independent of the batch
    # size, so single-row and batched predictions agree bit for bit
    return np.einsum("ij,jk->ik", A, B)


def _log_loss(prob, y_idx):
    eps = 1e-12
    return float(-np.mean(np.log(np.clip(prob[np.arange(len(y_idx)), y_idx], eps, None))))


# Multinomial logistic ----------------------------------------------------------

def fit_logistic(X, y, n_classes, seed, X_val=None, y_val=None,
                 epochs=200, lr=0.5, l2=1e-4):
    n, p = X.shape
    y_idx = y.astype(int)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y_idx] = 1.0
    W = np.zeros((p, n_classes))
    b = np.zeros(n_classes)

    def objective(W, b):
        prob = _softmax(X @ W + b)
        return _log_loss(prob, y_idx) + 0.5 * l2 * float((W**2).sum()), prob

    loss, prob = objective(W, b)
    step = lr
    curve = []
    for epoch in range(1, epochs + 1):
        gw = X.T @ (prob - onehot) / n + l2 * W
        gb = (prob - onehot).sum(axis=0) / n
        for _ in range(40):
            Wc, bc = W - step * gw, b - step * gb
            cand_loss, cand_prob = objective(Wc, bc)
            if cand_loss <= loss:
                W, b, loss, prob = Wc, bc, cand_loss, cand_prob
                step = min(step * 1.2, lr * 10.0)
                break
            step *= 0.5
        if X_val is not None:
            val_loss = _log_loss(_softmax(X_val @ W + b), y_val.astype(int))
        else:
            val_loss = loss
        curve.append((epoch, loss, float(val_loss)))
    return {"W": W.tolist(), "b": b.tolist()}, curve


def logistic_predict(params, X):
    W = np.asarray(params["W"], dtype=float)
    b = np.asarray(params["b"], dtype=float)
    return _softmax(_stable_matmul(X, W) + b)


# Linear SVM --------------------------------------------------------------------

def _hinge_objective(W, b, X, Y_signed, reg_lambda):
    margins = 1.0 - Y_signed * (X @ W + b)
    hinge = np.maximum(margins, 0.0).mean()
    return float(0.5 * reg_lambda * (W**2).sum() + hinge)


def fit_svm_classification(X, y, n_classes, seed, X_val=None, y_val=None,
                           epochs=60, reg_lambda=1e-3, batch_size=64):
    """One-vs-rest linear SVMs trained by projected stochastic subgradient."""
    n, p = X.shape
    y_idx = y.astype(int)
    W = np.zeros((p, n_classes))
    b = np.zeros(n_classes)
    radius = 1.0 / np.sqrt(reg_lambda)
    rng = np.random.default_rng(seed)
    t = 0
    curve = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            t += 1
            eta = 1.0 / (reg_lambda * t)
            rows = order[start:start + batch_size]
            Xb = X[rows]
            scores = Xb @ W + b
            for k in range(n_classes):
                yk = np.where(y_idx[rows] == k, 1.0, -1.0)
                active = yk * scores[:, k] < 1.0
                gw = reg_lambda * W[:, k]
                gb = 0.0
                if active.any():
                    gw = gw - (yk[active][:, None] * Xb[active]).sum(axis=0) / len(rows)
                    gb = -yk[active].sum() / len(rows)
                W[:, k] -= eta * gw
                b[k] -= eta * gb
                norm = np.sqrt((W[:, k] ** 2).sum())
                if norm > radius:
                    W[:, k] *= radius / norm
        train_loss = float(np.mean([
            _hinge_objective(W[:, k], b[k], X, np.where(y_idx == k, 1.0, -1.0), reg_lambda)
            for k in range(n_classes)
        ]))
        if X_val is not None:
            yv = y_val.astype(int)
            val_loss = float(np.mean([
                _hinge_objective(W[:, k], b[k], X_val,
                                 np.where(yv == k, 1.0, -1.0), reg_lambda)
                for k in range(n_classes)
            ]))
        else:
            val_loss = train_loss
        curve.append((epoch, train_loss, val_loss))
    return {"W": W.tolist(), "b": b.tolist()}, curve


def svm_predict_proba(params, X):
    """Class scores mapped through a softmax so rows are probability vectors."""
    W = np.asarray(params["W"], dtype=float)
    b = np.asarray(params["b"], dtype=float)
    return _softmax(_stable_matmul(X, W) + b)


def fit_svm_regression(X, y, seed, X_val=None, y_val=None, epochs=60,
                       reg_lambda=1e-3, batch_size=64, epsilon=0.1):
    """Linear epsilon-insensitive regression by the same projected subgradient."""
    n, p = X.shape
    y_mean = float(np.mean(y))
    y_sd = float(np.std(y)) or 1.0
    ys = (y - y_mean) / y_sd
    w = np.zeros(p)
    b = 0.0
    radius = 1.0 / np.sqrt(reg_lambda)
    rng = np.random.default_rng(seed)
    t = 0
    curve = []

    def objective(Xm, ym):
        err = np.abs(Xm @ w + b - ym)
        return float(0.5 * reg_lambda * (w**2).sum()
                     + np.maximum(err - epsilon, 0.0).mean())

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            t += 1
            eta = 1.0 / (reg_lambda * t)
            rows = order[start:start + batch_size]
            Xb = X[rows]
            err = Xb @ w + b - ys[rows]
            active = np.abs(err) > epsilon
            gw = reg_lambda * w
            gb = 0.0
            if active.any():
                sign = np.sign(err[active])
                gw = gw + (sign[:, None] * Xb[active]).sum(axis=0) / len(rows)
                gb = sign.sum() / len(rows)
            w -= eta * gw
            b -= eta * gb
            norm = np.sqrt((w**2).sum())
            if norm > radius:
                w *= radius / norm
        train_loss = objective(X, ys)
        if X_val is not None:
            val_loss = objective(X_val, (y_val - y_mean) / y_sd)
        else:
            val_loss = train_loss
        curve.append((epoch, train_loss, val_loss))
    return {"w": w.tolist(), "b": b, "y_mean": y_mean, "y_sd": y_sd}, curve


def svm_predict_regression(params, X):
    w = np.asarray(params["w"], dtype=float)
    scores = _stable_matmul(X, w[:, None])[:, 0]
    return (scores + params["b"]) * params["y_sd"] + params["y_mean"]
