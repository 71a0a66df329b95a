"""Independent oracles shared by the test suite: central finite
differences, exhaustive 2-cluster k-means enumeration, and a scalar Adam
trace. These never call the code paths they check."""

import itertools

import numpy as np

from metafew.network import ModelParams, params_flatten, params_unflatten


def finite_difference_grad(loss_fn, params: ModelParams, h: float = 1e-5) -> ModelParams:
    """Central finite differences of a scalar loss over every parameter."""
    theta = params_flatten(params)
    grad = np.zeros_like(theta)
    for j in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (loss_fn(params_unflatten(up, params))
                   - loss_fn(params_unflatten(down, params))) / (2 * h)
    return params_unflatten(grad, params)


def relative_error(a: ModelParams, b: ModelParams) -> float:
    va, vb = params_flatten(a), params_flatten(b)
    return float(np.linalg.norm(va - vb) / max(np.linalg.norm(vb), 1e-12))


def scaled_objective(points, assignment, scaling=None):
    """Objective of an assignment with centroids at member means."""
    scaling = np.ones(points.shape[1]) if scaling is None else scaling
    total = 0.0
    for c in np.unique(assignment):
        members = points[assignment == c]
        mu = members.mean(axis=0)
        total += float((scaling * (members - mu) ** 2).sum())
    return total


def brute_force_two_means(points, scaling=None):
    """Enumerate every assignment of points into two nonempty clusters.

    Returns (best objective, list of objectives of Lloyd fixed points).
    A fixed point reassigns every point to its nearest member-mean
    centroid (ties toward cluster 0) without change.
    """
    n = points.shape[0]
    scaling = np.ones(points.shape[1]) if scaling is None else scaling
    best = np.inf
    fixed_point_objectives = []
    for bits in itertools.product((0, 1), repeat=n):
        assignment = np.array(bits)
        if assignment.min() == assignment.max():
            continue
        obj = scaled_objective(points, assignment, scaling)
        best = min(best, obj)
        mus = np.stack([points[assignment == c].mean(axis=0) for c in (0, 1)])
        d2 = ((points[:, None, :] - mus[None, :, :]) ** 2 * scaling).sum(axis=2)
        if np.array_equal(d2.argmin(axis=1), assignment):
            fixed_point_objectives.append(obj)
    return best, fixed_point_objectives


def scalar_adam_trace(g_sequence, w0=0.0, lr=0.001, beta1=0.9, beta2=0.999,
                      eps=1e-8):
    """Pure-python Adam on one scalar parameter; returns parameter after
    each step."""
    w, m, v, out = w0, 0.0, 0.0, []
    for t, g in enumerate(g_sequence, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        w = w - lr * m_hat / (v_hat ** 0.5 + eps)
        out.append(w)
    return out
