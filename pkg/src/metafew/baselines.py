"""Comparison methods that consume the same embeddings and tasks: nearest
neighbors, linear classifier, dropout MLP, cluster matching, and training
from scratch."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeError
from .metalearn import build_maml_model, maml_adapt
from .network import (Layer, ModelParams, forward, log_softmax, softmax)
from .partition import Partition
from .tasks import Task


def knn_classify(train_embs: np.ndarray, train_labels: np.ndarray,
                 query_embs: np.ndarray, k_nn: int) -> np.ndarray:
    """Plurality vote of the k_nn Euclidean-nearest train points. Vote ties
    break toward the smaller summed neighbor distance, then the lower label."""
    x = np.asarray(train_embs, dtype=np.float64)
    y = np.asarray(train_labels, dtype=np.int64)
    q = np.asarray(query_embs, dtype=np.float64)
    if x.shape[0] == 0:
        raise DataError("empty train set")
    if not 1 <= k_nn <= x.shape[0]:
        raise ConfigError(f"k_nn={k_nn} outside [1, {x.shape[0]}]")
    d2 = ((q[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    out = np.empty(q.shape[0], dtype=np.int64)
    for i in range(q.shape[0]):
        order = np.lexsort((np.arange(x.shape[0]), d2[i]))[:k_nn]
        votes = np.bincount(y[order])
        best = votes.max()
        tied = np.flatnonzero(votes == best)
        if tied.size > 1:
            sums = np.array([d2[i][order][y[order] == lab].sum() for lab in tied])
            tied = tied[sums == sums.min()]
        out[i] = tied.min()
    return out


@dataclass
class LinearModel:
    weights: np.ndarray    # (d, n_classes)
    bias: np.ndarray       # (n_classes,)
    l2: float
    n_iter: int


def linear_fit(train_embs: np.ndarray, train_labels: np.ndarray, n_classes: int,
               l2: float = 1e-4, lr: float = 0.5, max_iter: int = 500,
               tol: float = 1e-5) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent from a
    zero init, run to gradient-norm tolerance or the iteration cap."""
    x = np.asarray(train_embs, dtype=np.float64)
    y_int = np.asarray(train_labels, dtype=np.int64)
    if x.shape[0] < n_classes:
        raise ConfigError(f"{x.shape[0]} examples for {n_classes} classes")
    y = np.eye(n_classes)[y_int]
    w = np.zeros((x.shape[1], n_classes))
    b = np.zeros(n_classes)
    it = 0
    for it in range(1, max_iter + 1):
        p = softmax(x @ w + b)
        g = (p - y) / x.shape[0]
        gw = x.T @ g + l2 * w
        gb = g.sum(axis=0)
        if not (np.isfinite(gw).all() and np.isfinite(gb).all()):
            raise NumericError(f"linear fit diverged at iteration {it}")
        if np.sqrt((gw ** 2).sum() + (gb ** 2).sum()) < tol:
            break
        w -= lr * gw
        b -= lr * gb
    return LinearModel(w, b, l2, it)


def linear_predict(model: LinearModel, query_embs: np.ndarray) -> np.ndarray:
    q = np.asarray(query_embs, dtype=np.float64)
    if q.shape[1] != model.weights.shape[0]:
        raise ShapeError(f"query width {q.shape[1]} != model width "
                         f"{model.weights.shape[0]}")
    return (q @ model.weights + model.bias).argmax(axis=1)


@dataclass
class MLPModel:
    params: ModelParams
    dropout: float


def mlp_dropout_fit(train_embs: np.ndarray, train_labels: np.ndarray, n_classes: int,
                    rng: np.random.Generator, hidden: int = 128, dropout: float = 0.5,
                    lr: float = 0.1, steps: int = 300) -> MLPModel:
    """One relu hidden layer trained with inverted dropout on the hidden
    units: kept activations are scaled by 1/(1-rate) during training so
    prediction needs no rescaling."""
    x = np.asarray(train_embs, dtype=np.float64)
    y = np.eye(n_classes)[np.asarray(train_labels, dtype=np.int64)]
    if not 0.0 <= dropout < 1.0:
        raise ConfigError(f"dropout rate {dropout} outside [0, 1)")
    bound1 = np.sqrt(6.0 / (x.shape[1] + hidden))
    bound2 = np.sqrt(6.0 / (hidden + n_classes))
    w1 = rng.uniform(-bound1, bound1, size=(x.shape[1], hidden))
    b1 = np.zeros(hidden)
    w2 = rng.uniform(-bound2, bound2, size=(hidden, n_classes))
    b2 = np.zeros(n_classes)
    keep = 1.0 - dropout
    batch = x.shape[0]
    for _ in range(steps):
        z1 = x @ w1 + b1
        h = np.maximum(z1, 0.0)
        if dropout > 0.0:
            mask = (rng.random(h.shape) < keep) / keep
        else:
            mask = 1.0
        hd = h * mask
        logits = hd @ w2 + b2
        g = (softmax(logits) - y) / batch
        gw2 = hd.T @ g
        gb2 = g.sum(axis=0)
        gh = (g @ w2.T) * mask * (z1 > 0)
        gw1 = x.T @ gh
        gb1 = gh.sum(axis=0)
        if not np.isfinite(logits).all():
            raise NumericError("mlp fit diverged")
        w1 -= lr * gw1
        b1 -= lr * gb1
        w2 -= lr * gw2
        b2 -= lr * gb2
    params = ModelParams([Layer(w1, b1, "relu"), Layer(w2, b2, "identity")])
    return MLPModel(params, dropout)


def mlp_dropout_predict(model: MLPModel, query_embs: np.ndarray) -> np.ndarray:
    # dropout disabled at prediction
    return forward(model.params, np.asarray(query_embs, dtype=np.float64)).argmax(axis=1)


def cluster_matching_classify(partition: Partition, centroids: np.ndarray | None,
                              task: Task, train_embs: np.ndarray | None = None,
                              query_embs: np.ndarray | None = None) -> np.ndarray:
    """Label clusters by plurality vote of the task's train shots, then
    classify queries by their cluster's label.

    Points still indexed by the partition use their stored assignment;
    anything else maps to the nearest centroid under the partition's
    metric. Queries landing in an unlabeled cluster take the label of the
    closest labeled cluster (Euclidean between centroids).
    """
    if centroids is None:
        centroids = partition.centroids
    if train_embs is None or query_embs is None:
        if task.input_repr != "embedding":
            raise DataError("cluster matching needs embeddings; pass train_embs/"
                            "query_embs or build the task with input_repr='embedding'")
        train_embs = task.train_x if train_embs is None else train_embs
        query_embs = task.query_x if query_embs is None else query_embs

    scale = np.ones(train_embs.shape[1]) if partition.scaling is None else partition.scaling

    def membership(indices, embs):
        out = np.full(len(indices), -1, dtype=np.int64)
        for i, idx in enumerate(indices):
            if 0 <= idx < partition.n and partition.assignment[idx] >= 0:
                out[i] = partition.assignment[idx]
            elif centroids is not None:
                d2 = (scale * (centroids - embs[i]) ** 2).sum(axis=1)
                out[i] = int(d2.argmin())
        return out

    train_clusters = membership(task.train_indices, train_embs)
    shot_labels = task.train_labels_int()
    votes = np.zeros((partition.num_clusters, task.n_way), dtype=np.int64)
    for c, lab in zip(train_clusters, shot_labels):
        if c >= 0:
            votes[c, lab] += 1
    labeled = np.flatnonzero(votes.sum(axis=1) > 0)
    if labeled.size == 0:
        raise DataError("no labeled clusters: every train shot was discarded")
    cluster_label = np.full(partition.num_clusters, -1, dtype=np.int64)
    cluster_label[labeled] = votes[labeled].argmax(axis=1)  # ties -> lower label

    query_clusters = membership(task.query_indices, query_embs)
    out = np.empty(len(query_clusters), dtype=np.int64)
    for i, c in enumerate(query_clusters):
        if c >= 0 and cluster_label[c] >= 0:
            out[i] = cluster_label[c]
            continue
        if centroids is None:
            raise DataError("query in unlabeled cluster and no centroids to fall "
                            "back on")
        if c >= 0:
            dc = ((centroids[labeled] - centroids[c]) ** 2).sum(axis=1)
        else:  # discarded/unknown point: nearest labeled centroid directly
            dc = (scale * (centroids[labeled] - query_embs[i]) ** 2).sum(axis=1)
        out[i] = cluster_label[labeled[int(dc.argmin())]]
    return out


def train_from_scratch(task: Task, rng: np.random.Generator,
                       hidden: tuple[int, ...] = (64, 64), steps: int = 50,
                       lr: float = 0.05) -> np.ndarray:
    """Fresh random init, SGD on the train shots, predict the queries; the
    same protocol as MAML evaluation but without meta-learned weights."""
    params = build_maml_model(task.d_in, task.n_way, rng, hidden)
    adapted = maml_adapt(params, task, inner_lr=lr, steps=steps)
    return forward(adapted, task.query_x).argmax(axis=1)
