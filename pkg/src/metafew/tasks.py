"""N-way K-shot episode assembly from partitions, labels, and attribute
annotations, plus lazy task streams and stream mixing."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .data import DataSet, split_code
from .errors import ConfigError, DataError, InfeasibleError, TaskRejected
from .ioutil import stable_rng
from .partition import Partition, signed_distance

INPUT_REPRS = ("raw", "embedding")

# hyperplane streams reuse one sampled partition for this many consecutive
# tasks; other provenances resample a partition per task
HYPERPLANE_TASKS_PER_PARTITION = 100


@dataclass
class Task:
    """One episode: K train and Q query pairs for each of N classes, with
    labels given by a sampled permutation of one-hot vectors. Inputs are
    copies; indices reference rows of the originating dataset."""

    n_way: int
    k_shot: int
    q_queries: int
    train_x: np.ndarray
    train_y: np.ndarray
    query_x: np.ndarray
    query_y: np.ndarray
    train_indices: np.ndarray
    query_indices: np.ndarray
    label_perm: np.ndarray          # slot -> one-hot column
    source_ids: np.ndarray          # cluster/class id per slot
    input_repr: str = "raw"
    split: str | None = None
    partition_index: int | None = None
    task_seed: int | None = None

    @property
    def d_in(self) -> int:
        return self.train_x.shape[1]

    def train_labels_int(self) -> np.ndarray:
        return self.train_y.argmax(axis=1)

    def query_labels_int(self) -> np.ndarray:
        return self.query_y.argmax(axis=1)


def _fetch_inputs(ds: DataSet, indices: np.ndarray, input_repr: str) -> np.ndarray:
    if input_repr == "raw":
        return ds.raw[indices].copy()
    if input_repr == "embedding":
        if ds.embeddings is None:
            raise DataError("input_repr=embedding but dataset has no embeddings")
        return ds.embeddings[indices].copy()
    raise ConfigError(f"unknown input_repr {input_repr!r}")


def eligible_clusters(partition: Partition, r_min: int) -> np.ndarray:
    """Clusters holding at least r_min members (K + Q draws without
    replacement must fit)."""
    return np.flatnonzero(partition.cluster_sizes() >= r_min)


def sample_task_from_partition(partition: Partition, n_way: int, k_shot: int,
                               q_queries: int, rng: np.random.Generator,
                               ds: DataSet, input_repr: str = "raw",
                               split: str | None = None) -> Task:
    """Sample N distinct eligible clusters uniformly without replacement
    (never proportional to size), then K+Q member rows without replacement
    per cluster, then a permutation of one-hot labels."""
    if n_way < 2 or k_shot < 1 or q_queries < 1:
        raise ConfigError(f"need n_way >= 2, k_shot >= 1, q_queries >= 1; "
                          f"got {n_way}/{k_shot}/{q_queries}")
    r = k_shot + q_queries
    ok = eligible_clusters(partition, r)
    if ok.size < n_way:
        raise InfeasibleError(
            f"partition has {ok.size} clusters with >= {r} members "
            f"(of {partition.num_clusters} total), need {n_way}")
    chosen = rng.choice(ok, size=n_way, replace=False)
    perm = rng.permutation(n_way)
    eye = np.eye(n_way)
    train_idx, query_idx = [], []
    for c in chosen:
        members = partition.clusters[int(c)]
        picked = rng.choice(members, size=r, replace=False)
        train_idx.append(picked[:k_shot])
        query_idx.append(picked[k_shot:])
    train_idx = np.concatenate(train_idx)
    query_idx = np.concatenate(query_idx)
    train_y = eye[perm.repeat(k_shot)]
    query_y = eye[perm.repeat(q_queries)]
    return Task(
        n_way=n_way, k_shot=k_shot, q_queries=q_queries,
        train_x=_fetch_inputs(ds, train_idx, input_repr),
        train_y=train_y,
        query_x=_fetch_inputs(ds, query_idx, input_repr),
        query_y=query_y,
        train_indices=train_idx, query_indices=query_idx,
        label_perm=perm, source_ids=np.asarray(chosen, dtype=np.int64),
        input_repr=input_repr, split=split,
    )


def sample_supervised_task(ds: DataSet, split: str, n_way: int, k_shot: int,
                           q_queries: int, rng: np.random.Generator,
                           input_repr: str = "raw",
                           partition: Partition | None = None) -> Task:
    """Task from ground-truth labels of a split (oracle / evaluation tasks)."""
    from .partition import partition_from_labels
    if partition is None:
        partition = partition_from_labels(ds, split)
    return sample_task_from_partition(partition, n_way, k_shot, q_queries,
                                      rng, ds, input_repr, split=split)


def sample_attribute_task(ds: DataSet, split: str, attr_indices, attr_values,
                          k_shot: int, q_queries: int, rng: np.random.Generator,
                          input_repr: str = "raw") -> Task:
    """Binary task defined by three attributes and an ordering of three
    booleans: one class matches the pattern on all three, the other its
    full negation. Raises TaskRejected when either side is too small."""
    if ds.attributes is None:
        raise DataError("attribute tasks require attributes")
    attr_indices = np.asarray(attr_indices, dtype=np.int64)
    attr_values = np.asarray(attr_values, dtype=bool)
    if attr_indices.shape != (3,) or attr_values.shape != (3,):
        raise ConfigError("exactly 3 attribute indices and 3 booleans required")
    if np.unique(attr_indices).size != 3:
        raise ConfigError("attribute indices must be distinct")
    rows = ds.split_indices(split)
    block = ds.attributes[rows][:, attr_indices]
    pos = rows[(block == attr_values).all(axis=1)]
    neg = rows[(block == ~attr_values).all(axis=1)]
    r = k_shot + q_queries
    if pos.size < r or neg.size < r:
        raise TaskRejected(f"attribute pattern sides have {pos.size}/{neg.size} "
                           f"members, need {r} each")
    perm = rng.permutation(2)
    eye = np.eye(2)
    train_idx, query_idx = [], []
    for members in (pos, neg):
        picked = rng.choice(members, size=r, replace=False)
        train_idx.append(picked[:k_shot])
        query_idx.append(picked[k_shot:])
    train_idx = np.concatenate(train_idx)
    query_idx = np.concatenate(query_idx)
    pattern_id = int((attr_values << np.arange(3)).sum())
    return Task(
        n_way=2, k_shot=k_shot, q_queries=q_queries,
        train_x=_fetch_inputs(ds, train_idx, input_repr),
        train_y=eye[perm.repeat(k_shot)],
        query_x=_fetch_inputs(ds, query_idx, input_repr),
        query_y=eye[perm.repeat(q_queries)],
        train_indices=train_idx, query_indices=query_idx,
        label_perm=perm, source_ids=np.array([pattern_id, 7 - pattern_id]),
        input_repr=input_repr, split=split,
    )


def sample_eligible_attribute_task(ds: DataSet, split: str, k_shot: int,
                                   q_queries: int, rng: np.random.Generator,
                                   attr_pool=None, input_repr: str = "raw",
                                   max_tries: int = 1000) -> Task:
    """Resample random attribute triples until one has enough members on
    both sides."""
    pool = np.arange(ds.num_attributes) if attr_pool is None else np.asarray(attr_pool)
    if pool.size < 3:
        raise ConfigError("attribute pool must hold at least 3 indices")
    for _ in range(max_tries):
        idx = rng.choice(pool, size=3, replace=False)
        vals = rng.integers(0, 2, size=3).astype(bool)
        try:
            return sample_attribute_task(ds, split, idx, vals, k_shot, q_queries,
                                         rng, input_repr)
        except TaskRejected:
            continue
    raise InfeasibleError(f"no eligible attribute task found in {max_tries} tries")


# -- streams -------------------------------------------------------------------

@dataclass
class TaskStreamConfig:
    tasks: int
    n_way: int
    k_shot: int
    q_queries: int
    input_repr: str = "raw"
    seed: int = 0
    split: str = "meta-train"

    def __post_init__(self):
        if self.n_way < 2 or self.k_shot < 1 or self.q_queries < 1:
            raise ConfigError(f"need n_way >= 2, k_shot >= 1, q_queries >= 1; got "
                              f"{self.n_way}/{self.k_shot}/{self.q_queries}")
        if self.input_repr not in INPUT_REPRS:
            raise ConfigError(f"unknown input_repr {self.input_repr!r}")


def task_rng(stream_seed: int, index: int) -> np.random.Generator:
    """Per-task generator: stream seed mixed with the task index, so any
    task is reproducible in isolation."""
    return stable_rng(stream_seed, index)


def make_task_stream(cfg: TaskStreamConfig, partitions: list[Partition],
                     ds: DataSet) -> Iterator[Task]:
    """Lazy sequence of cfg.tasks tasks. Each task first samples a partition
    uniformly, then clusters and members; hyperplane partitions are held
    fixed for blocks of consecutive tasks instead of resampled per task."""
    if not partitions:
        raise ConfigError("no partitions given")
    r = cfg.k_shot + cfg.q_queries
    usable = [(i, p) for i, p in enumerate(partitions)
              if eligible_clusters(p, r).size >= cfg.n_way]
    excluded = len(partitions) - len(usable)
    if excluded:
        warnings.warn(f"{excluded} of {len(partitions)} partitions have fewer than "
                      f"{cfg.n_way} clusters with >= {r} members and were excluded",
                      stacklevel=2)
    if not usable:
        raise ConfigError(f"all {len(partitions)} partitions are infeasible for "
                          f"N={cfg.n_way}, K+Q={r}")
    per_block = (HYPERPLANE_TASKS_PER_PARTITION
                 if partitions[0].provenance == "hyperplane" else 1)

    def generate() -> Iterator[Task]:
        for t in range(cfg.tasks):
            rng = task_rng(cfg.seed, t)
            if per_block > 1:
                block_rng = stable_rng(cfg.seed, t // per_block, 1)
                slot = int(block_rng.integers(len(usable)))
            else:
                slot = int(rng.integers(len(usable)))
            index, part = usable[slot]
            task = sample_task_from_partition(part, cfg.n_way, cfg.k_shot,
                                              cfg.q_queries, rng, ds,
                                              cfg.input_repr, split=cfg.split)
            task.partition_index = index
            task.task_seed = int(rng.integers(2 ** 62))
            yield task

    return generate()


def make_supervised_task_stream(cfg: TaskStreamConfig, ds: DataSet) -> Iterator[Task]:
    """Stream of label-derived tasks from the configured split."""
    from .partition import partition_from_labels
    part = partition_from_labels(ds, cfg.split)
    return make_task_stream(cfg, [part], ds)


def mix_task_streams(stream_a: Iterable[Task], stream_b: Iterable[Task],
                     ratio: float, rng: np.random.Generator) -> Iterator[Task]:
    """Emit from stream_a with probability ratio, else stream_b; ends when
    the chosen stream is exhausted."""
    if not 0.0 <= ratio <= 1.0:
        raise ConfigError(f"ratio must lie in [0, 1], got {ratio}")
    a, b = iter(stream_a), iter(stream_b)
    while True:
        source = a if rng.random() < ratio else b
        try:
            yield next(source)
        except StopIteration:
            return


# -- validation ------------------------------------------------------------------

def validate_task(task: Task, ds: DataSet | None = None,
                  partition: Partition | None = None) -> None:
    """Assert every Task invariant; used by tests on each emitted task."""
    n, k, q = task.n_way, task.k_shot, task.q_queries
    if task.train_x.shape[0] != n * k or task.train_y.shape != (n * k, n):
        raise DataError(f"train set shapes {task.train_x.shape}/{task.train_y.shape} "
                        f"inconsistent with N={n}, K={k}")
    if task.query_x.shape[0] != n * q or task.query_y.shape != (n * q, n):
        raise DataError(f"query set shapes {task.query_x.shape}/{task.query_y.shape} "
                        f"inconsistent with N={n}, Q={q}")
    for name, y in (("train", task.train_y), ("query", task.query_y)):
        if not (np.isin(y, (0.0, 1.0)).all() and (y.sum(axis=1) == 1).all()):
            raise DataError(f"{name} labels are not one-hot rows")
    if sorted(task.label_perm.tolist()) != list(range(n)):
        raise DataError(f"label_perm {task.label_perm} is not a permutation of 0..{n - 1}")
    slots_train = task.train_y.argmax(axis=1).reshape(n, k)
    slots_query = task.query_y.argmax(axis=1).reshape(n, q)
    expect = task.label_perm
    if not (np.all(slots_train == expect[:, None]) and np.all(slots_query == expect[:, None])):
        raise DataError("labels do not follow the sampled slot permutation")
    all_idx = np.concatenate([task.train_indices, task.query_indices])
    if np.unique(all_idx).size != all_idx.size:
        raise DataError("duplicate datapoint index within task")
    if ds is not None:
        if all_idx.min() < 0 or all_idx.max() >= ds.n:
            raise DataError("task indices outside dataset")
        if task.split is not None:
            want = split_code(task.split)
            if not np.all(ds.split[all_idx] == want):
                raise DataError(f"task points leave the declared split {task.split!r}")
        want_train = _fetch_inputs(ds, task.train_indices, task.input_repr)
        want_query = _fetch_inputs(ds, task.query_indices, task.input_repr)
        if not (np.array_equal(want_train, task.train_x)
                and np.array_equal(want_query, task.query_x)):
            raise DataError("task inputs do not match dataset rows")
    if partition is not None and partition.hyperplanes:
        margin = partition.margin or 0.0
        pts = ds.embeddings[all_idx] if ds is not None else None
        if pts is None:
            raise DataError("margin check requires the dataset")
        for h in partition.hyperplanes:
            if np.any(np.abs(signed_distance(h, pts)) < margin):
                raise DataError("task point violates the hyperplane margin")


# -- manifests --------------------------------------------------------------------

def write_task_manifest(tasks: list[Task], path, dataset_ref: str = "",
                        config_text: str | None = None) -> None:
    """Text manifest referencing dataset rows; tasks never embed data.
    Per task: source ids, member indices, permutation, provenance fields."""
    with open(path, "w") as fh:
        fh.write(f"# dataset={dataset_ref}\n")
        if config_text:
            for line in config_text.splitlines():
                fh.write(f"# config:{line}\n")
        fh.write("# fields=index;n;k;q;input_repr;split;partition;task_seed;"
                 "source_ids;perm;train_indices;query_indices\n")
        for i, t in enumerate(tasks):
            fh.write(";".join([
                str(i), str(t.n_way), str(t.k_shot), str(t.q_queries),
                t.input_repr, t.split or "",
                "" if t.partition_index is None else str(t.partition_index),
                "" if t.task_seed is None else str(t.task_seed),
                ",".join(str(int(v)) for v in t.source_ids),
                ",".join(str(int(v)) for v in t.label_perm),
                ",".join(str(int(v)) for v in t.train_indices),
                ",".join(str(int(v)) for v in t.query_indices),
            ]) + "\n")


def read_task_manifest(path, ds: DataSet) -> list[Task]:
    tasks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            (_, n, k, q, repr_, split, part_idx, task_seed,
             source, perm, train_idx, query_idx) = line.split(";")
            n, k, q = int(n), int(k), int(q)
            train_indices = np.array([int(v) for v in train_idx.split(",")])
            query_indices = np.array([int(v) for v in query_idx.split(",")])
            label_perm = np.array([int(v) for v in perm.split(",")])
            eye = np.eye(n)
            tasks.append(Task(
                n_way=n, k_shot=k, q_queries=q,
                train_x=_fetch_inputs(ds, train_indices, repr_),
                train_y=eye[label_perm.repeat(k)],
                query_x=_fetch_inputs(ds, query_indices, repr_),
                query_y=eye[label_perm.repeat(q)],
                train_indices=train_indices, query_indices=query_indices,
                label_perm=label_perm,
                source_ids=np.array([int(v) for v in source.split(",")]),
                input_repr=repr_, split=split or None,
                partition_index=int(part_idx) if part_idx else None,
                task_seed=int(task_seed) if task_seed else None,
            ))
    return tasks
