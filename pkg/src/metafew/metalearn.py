"""Episodic meta-training and adaptation: MAML (exact second-order by
default) and prototypical networks over task streams."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .errors import ConfigError, DataError, NumericError, ShapeError
from .ioutil import stable_rng
from .network import (Layer, ModelParams, apply_adam, apply_sgd,
                      backprop_from_output, forward, grad_through_adaptation,
                      init_adam, init_mlp, log_softmax, params_allfinite,
                      params_mean, softmax, xent_loss_grad)
from .tasks import Task

DEFAULT_HIDDEN = (64, 64)


@dataclass
class MetaConfig:
    learner: str = "maml"
    outer_lr: float = 0.001
    inner_lr: float = 0.05
    task_batch_size: int = 8
    inner_steps_train: int = 5
    adapt_steps_eval: int = 50
    meta_iterations: int = 1000
    n_way: int = 5
    k_shot: int = 1
    q_queries: int = 5
    first_order: bool = False
    seed: int = 0
    hidden: tuple[int, ...] = DEFAULT_HIDDEN

    def __post_init__(self):
        if self.learner not in ("maml", "protonet"):
            raise ConfigError(f"unknown learner {self.learner!r}")
        if self.outer_lr <= 0 or self.inner_lr < 0:
            raise ConfigError("learning rates must be positive (inner may be 0)")
        if min(self.task_batch_size, self.meta_iterations + 1, self.n_way,
               self.k_shot, self.q_queries) < 1:
            raise ConfigError("counts must be positive")
        if self.inner_steps_train < 0 or self.adapt_steps_eval < 0:
            raise ConfigError("step counts must be >= 0")


def build_maml_model(d_in: int, n_way: int, rng: np.random.Generator,
                     hidden: tuple[int, ...] = DEFAULT_HIDDEN) -> ModelParams:
    """Relu MLP with an n_way classifier head."""
    return init_mlp([d_in, *hidden, n_way], rng)


def build_protonet_model(d_in: int, rng: np.random.Generator,
                         hidden: tuple[int, ...] = DEFAULT_HIDDEN) -> ModelParams:
    """Relu MLP whose last hidden layer is the embedding."""
    return init_mlp([d_in, *hidden], rng, activations=["relu"] * len(hidden))


def prune_head(params: ModelParams, n_way: int) -> ModelParams:
    """Restrict the classifier head to its first n_way output columns
    (pruning happens before the softmax, renormalizing the rest)."""
    head = params.layers[-1]
    if n_way > head.weights.shape[1]:
        raise ShapeError(f"cannot prune head of width {head.weights.shape[1]} "
                         f"to {n_way} ways")
    if n_way == head.weights.shape[1]:
        return params
    pruned = Layer(head.weights[:, :n_way].copy(), head.bias[:n_way].copy(),
                   head.activation)
    return ModelParams([l.copy() for l in params.layers[:-1]] + [pruned])


# -- MAML -----------------------------------------------------------------------

def maml_meta_train(cfg: MetaConfig, task_stream: Iterator[Task],
                    init_params: ModelParams,
                    log_cb: Callable[[int, float, float | None], None] | None = None,
                    val_fn: Callable[[ModelParams], float] | None = None,
                    val_every: int = 0) -> ModelParams:
    """Fixed number of meta-iterations; each averages the exact adaptation
    meta-gradient over a batch of tasks and applies one Adam step. The
    optional val_fn is monitoring only and never stops training early."""
    stream = iter(task_stream)
    params = init_params.copy()
    state = init_adam(params, cfg.outer_lr)
    for it in range(cfg.meta_iterations):
        losses, grads = [], []
        for _ in range(cfg.task_batch_size):
            try:
                task = next(stream)
            except StopIteration:
                raise ConfigError(
                    f"task stream exhausted at meta-iteration {it}: need "
                    f"{cfg.meta_iterations * cfg.task_batch_size} tasks") from None
            try:
                loss, g = grad_through_adaptation(
                    params, (task.train_x, task.train_y),
                    (task.query_x, task.query_y),
                    cfg.inner_lr, cfg.inner_steps_train, cfg.first_order)
            except NumericError as exc:
                raise NumericError(f"meta-iteration {it}: {exc}") from None
            losses.append(loss)
            grads.append(g)
        meta_loss = float(np.mean(losses))
        if not np.isfinite(meta_loss):
            raise NumericError(f"meta-iteration {it}: non-finite meta-loss")
        params, state = apply_adam(params, params_mean(grads), state)
        if not params_allfinite(params):
            raise NumericError(f"meta-iteration {it}: non-finite parameters")
        if log_cb is not None:
            val = None
            if val_fn is not None and val_every and (it + 1) % val_every == 0:
                val = val_fn(params)
            log_cb(it, meta_loss, val)
    return params


def maml_adapt(params: ModelParams, task: Task, inner_lr: float = 0.05,
               steps: int = 50) -> ModelParams:
    """SGD on the task's train set starting from params; params untouched."""
    if task.train_x.shape[1] != params.in_dim:
        raise ShapeError(f"task input width {task.train_x.shape[1]} != model "
                         f"in_dim {params.in_dim}")
    if task.n_way != params.out_dim:
        raise ShapeError(f"task way {task.n_way} != model head width "
                         f"{params.out_dim}; prune_head first")
    theta = params
    for _ in range(steps):
        _, g = xent_loss_grad(theta, task.train_x, task.train_y)
        theta = apply_sgd(theta, g, inner_lr)
    return theta


def maml_predict(params: ModelParams, task: Task, inner_lr: float = 0.05,
                 steps: int = 50) -> np.ndarray:
    """Adapt on the train set (pruning extra head columns if the model is
    wider than the task) and return query label predictions."""
    adapted = maml_adapt(prune_head(params, task.n_way), task, inner_lr, steps)
    return forward(adapted, task.query_x).argmax(axis=1)


# -- prototypical networks ---------------------------------------------------------

def protonet_embed(params: ModelParams, inputs: np.ndarray) -> np.ndarray:
    """Forward pass of the embedding network (no classifier head)."""
    return forward(params, inputs)


def protonet_prototypes(embedded: np.ndarray, onehot_labels: np.ndarray) -> np.ndarray:
    """Per-class arithmetic means of the embedded train shots."""
    e = np.asarray(embedded, dtype=np.float64)
    y = np.asarray(onehot_labels, dtype=np.float64)
    if e.shape[0] != y.shape[0]:
        raise ShapeError(f"{e.shape[0]} embeddings vs {y.shape[0]} label rows")
    counts = y.sum(axis=0)
    if np.any(counts < 1):
        missing = np.flatnonzero(counts < 1).tolist()
        raise DataError(f"classes {missing} have no train shots")
    return (y.T @ e) / counts[:, None]


def protonet_classify(prototypes: np.ndarray, embedded_queries: np.ndarray) -> np.ndarray:
    """Logits are negative squared Euclidean distances to each prototype."""
    p = np.asarray(prototypes, dtype=np.float64)
    q = np.asarray(embedded_queries, dtype=np.float64)
    if p.shape[1] != q.shape[1]:
        raise ShapeError(f"prototype width {p.shape[1]} != query width {q.shape[1]}")
    d2 = ((q[:, None, :] - p[None, :, :]) ** 2).sum(axis=2)
    return -d2


def protonet_predict(params: ModelParams, task: Task) -> np.ndarray:
    protos = protonet_prototypes(protonet_embed(params, task.train_x), task.train_y)
    return protonet_classify(protos, protonet_embed(params, task.query_x)).argmax(axis=1)


def protonet_loss_grad(params: ModelParams, task: Task) -> tuple[float, ModelParams]:
    """Softmax cross-entropy over negative squared distances on the query
    set, with exact gradients through both query embeddings and the
    prototype means of the support embeddings."""
    es = protonet_embed(params, task.train_x)
    eq = protonet_embed(params, task.query_x)
    s = task.train_y
    protos = protonet_prototypes(es, s)
    logits = protonet_classify(protos, eq)
    y = task.query_y
    logp = log_softmax(logits)
    loss = float(-(logp * y).sum(axis=1).mean())
    m = logits.shape[0]
    g = (np.exp(logp) - y) / m                       # dL/dlogits
    d_eq = -2.0 * (eq * g.sum(axis=1, keepdims=True) - g @ protos)
    d_protos = 2.0 * (g.T @ eq - protos * g.sum(axis=0)[:, None])
    counts = s.sum(axis=0)
    d_es = s @ (d_protos / counts[:, None])
    grads_q = backprop_from_output(params, task.query_x, d_eq)
    grads_s = backprop_from_output(params, task.train_x, d_es)
    total = ModelParams([
        Layer(a.weights + b.weights, a.bias + b.bias, a.activation)
        for a, b in zip(grads_q.layers, grads_s.layers)
    ])
    return loss, total


def protonet_meta_train(cfg: MetaConfig, task_stream: Iterator[Task],
                        init_params: ModelParams,
                        log_cb: Callable[[int, float, float | None], None] | None = None,
                        val_fn: Callable[[ModelParams], float] | None = None,
                        val_every: int = 0) -> ModelParams:
    """Adam on the prototype classification loss, one batch of tasks per
    meta-iteration (conventionally batch size 1)."""
    stream = iter(task_stream)
    params = init_params.copy()
    state = init_adam(params, cfg.outer_lr)
    for it in range(cfg.meta_iterations):
        losses, grads = [], []
        for _ in range(cfg.task_batch_size):
            try:
                task = next(stream)
            except StopIteration:
                raise ConfigError(
                    f"task stream exhausted at meta-iteration {it}") from None
            loss, g = protonet_loss_grad(params, task)
            if not (np.isfinite(loss) and params_allfinite(g)):
                raise NumericError(f"meta-iteration {it}: non-finite loss/gradient")
            losses.append(loss)
            grads.append(g)
        params, state = apply_adam(params, params_mean(grads), state)
        if not params_allfinite(params):
            raise NumericError(f"meta-iteration {it}: non-finite parameters")
        if log_cb is not None:
            val = None
            if val_fn is not None and val_every and (it + 1) % val_every == 0:
                val = val_fn(params)
            log_cb(it, float(np.mean(losses)), val)
    return params


def meta_train(cfg: MetaConfig, task_stream: Iterator[Task], init_params: ModelParams,
               **kwargs) -> ModelParams:
    trainer = maml_meta_train if cfg.learner == "maml" else protonet_meta_train
    return trainer(cfg, task_stream, init_params, **kwargs)


def initial_model(cfg: MetaConfig, d_in: int) -> ModelParams:
    rng = stable_rng(cfg.seed, 0x0DE1)
    if cfg.learner == "maml":
        return build_maml_model(d_in, cfg.n_way, rng, cfg.hidden)
    return build_protonet_model(d_in, rng, cfg.hidden)
