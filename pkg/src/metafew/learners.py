"""Adapters turning trained models and baselines into the uniform
predict(task, rng) interface used by the evaluation harness."""

from __future__ import annotations

import numpy as np

from .baselines import (cluster_matching_classify, knn_classify, linear_fit,
                        linear_predict, mlp_dropout_fit, mlp_dropout_predict,
                        train_from_scratch)
from .data import DataSet
from .errors import ConfigError, DataError
from .metalearn import maml_predict, protonet_predict
from .network import ModelParams
from .partition import Partition
from .tasks import Task

LEARNER_IDS = ("maml", "protonet", "scratch", "knn", "linear", "mlp", "cluster-match")


def _embeddings_for(ds: DataSet, task: Task) -> tuple[np.ndarray, np.ndarray]:
    if task.input_repr == "embedding":
        return task.train_x, task.query_x
    if ds.embeddings is None:
        raise DataError("learner needs embeddings but the dataset has none")
    return ds.embeddings[task.train_indices], ds.embeddings[task.query_indices]


def make_learner(learner_id: str, ds: DataSet, *,
                 params: ModelParams | None = None,
                 partition: Partition | None = None,
                 inner_lr: float = 0.05, adapt_steps: int = 50,
                 k_nn: int | None = None, mlp_dropout: float = 0.5,
                 mlp_steps: int = 300, mlp_lr: float = 0.1,
                 linear_l2: float = 1e-4, linear_lr: float = 0.5,
                 linear_max_iter: int = 500,
                 hidden: tuple[int, ...] = (64, 64)):
    """Build predict(task, rng) for any learner id the CLI accepts."""
    if learner_id == "maml":
        if params is None:
            raise ConfigError("maml learner needs a checkpoint")
        return lambda task, rng: maml_predict(params, task, inner_lr, adapt_steps)
    if learner_id == "protonet":
        if params is None:
            raise ConfigError("protonet learner needs a checkpoint")
        return lambda task, rng: protonet_predict(params, task)
    if learner_id == "scratch":
        return lambda task, rng: train_from_scratch(task, rng, hidden=hidden,
                                                    steps=adapt_steps, lr=inner_lr)
    if learner_id == "knn":
        def predict_knn(task, rng):
            tr, qu = _embeddings_for(ds, task)
            # default: majority vote over min(K, 5) neighbors
            k = min(task.k_shot, 5) if k_nn is None else k_nn
            return knn_classify(tr, task.train_labels_int(), qu, k)
        return predict_knn
    if learner_id == "linear":
        def predict_linear(task, rng):
            tr, qu = _embeddings_for(ds, task)
            model = linear_fit(tr, task.train_labels_int(), task.n_way,
                               l2=linear_l2, lr=linear_lr, max_iter=linear_max_iter)
            return linear_predict(model, qu)
        return predict_linear
    if learner_id == "mlp":
        def predict_mlp(task, rng):
            tr, qu = _embeddings_for(ds, task)
            model = mlp_dropout_fit(tr, task.train_labels_int(), task.n_way, rng,
                                    dropout=mlp_dropout, lr=mlp_lr, steps=mlp_steps)
            return mlp_dropout_predict(model, qu)
        return predict_mlp
    if learner_id == "cluster-match":
        if partition is None:
            raise ConfigError("cluster-match learner needs a partition")
        def predict_cm(task, rng):
            tr, qu = _embeddings_for(ds, task)
            return cluster_matching_classify(partition, partition.centroids, task,
                                             train_embs=tr, query_embs=qu)
        return predict_cm
    raise ConfigError(f"unknown learner {learner_id!r}; expected one of {LEARNER_IDS}")
