"""Partitions of embedding (or raw) space used as pseudo-class structure:
metric-scaled Lloyd k-means, random-hyperplane slicing with margin, random
assignment, and label-derived partitions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import DataSet
from .errors import ConfigError, DataError, InfeasibleError, NumericError, ShapeError
from .ioutil import fmt_float, stable_rng

PROVENANCES = ("kmeans", "hyperplane", "random", "supervised")

KMEANS_MAX_ITER = 300
KMEANS_TOL = 1e-8
HYPERPLANE_POOL_SIZE = 1000
HYPERPLANE_RETRY_CAP = 100


@dataclass
class Hyperplane:
    normal: np.ndarray
    point: np.ndarray

    def __post_init__(self):
        self.normal = np.asarray(self.normal, dtype=np.float64)
        self.point = np.asarray(self.point, dtype=np.float64)
        if self.normal.shape != self.point.shape or self.normal.ndim != 1:
            raise ShapeError(f"normal {self.normal.shape} / point {self.point.shape}")
        if np.linalg.norm(self.normal) == 0.0:
            raise DataError("hyperplane normal must have nonzero norm")


def signed_distance(h: Hyperplane, z: np.ndarray) -> float | np.ndarray:
    """Signed point-plane distance, invariant to the normal's magnitude.
    Accepts a single vector or a batch of rows."""
    z = np.asarray(z, dtype=np.float64)
    unit = h.normal / np.linalg.norm(h.normal)
    if z.ndim == 1:
        if z.shape != h.normal.shape:
            raise ShapeError(f"point dim {z.shape} != plane dim {h.normal.shape}")
        return float(unit @ (z - h.point))
    if z.shape[1] != h.normal.shape[0]:
        raise ShapeError(f"points width {z.shape[1]} != plane dim {h.normal.shape[0]}")
    return (z - h.point) @ unit


@dataclass
class Partition:
    """Cluster structure over n points. assignment[i] is the cluster of
    point i or -1 for discarded points; clusters holds the member-index
    list of each cluster, and must stay in bijection with assignment."""

    assignment: np.ndarray
    clusters: list[np.ndarray]
    centroids: np.ndarray | None = None
    scaling: np.ndarray | None = None
    provenance: str = "kmeans"
    k: int | None = None                  # requested cluster count
    seed: int | None = None
    source_space: str = "embedding"
    margin: float | None = None
    hyperplanes: list[Hyperplane] | None = None
    objective: float | None = None
    objective_trace: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.assignment.shape[0]

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)

    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(c) for c in self.clusters], dtype=np.int64)

    def validate(self) -> None:
        if self.provenance not in PROVENANCES:
            raise DataError(f"unknown provenance {self.provenance!r}")
        seen = np.full(self.n, -1, dtype=np.int64)
        for c, members in enumerate(self.clusters):
            if len(members) == 0:
                raise DataError(f"cluster {c} is empty")
            if np.any(seen[members] != -1):
                raise DataError(f"cluster {c} reuses points of another cluster")
            seen[members] = c
        if not np.array_equal(seen, self.assignment):
            raise DataError("assignment vector and cluster lists disagree")
        if self.centroids is not None and self.centroids.shape[0] != len(self.clusters):
            raise DataError(f"{self.centroids.shape[0]} centroids for "
                            f"{len(self.clusters)} clusters")


def _clusters_from_assignment(assignment: np.ndarray) -> list[np.ndarray]:
    k = int(assignment.max()) + 1 if assignment.size and assignment.max() >= 0 else 0
    return [np.flatnonzero(assignment == c) for c in range(k)]


# -- metric-scaled k-means ------------------------------------------------------

def _check_points(points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ShapeError(f"points must be 2-d, got {points.shape}")
    if not np.isfinite(points).all():
        raise DataError("points contain non-finite values")
    return points


def kmeans(points: np.ndarray, k: int, scaling: np.ndarray | None = None,
           seed: int | np.random.Generator = 0, max_iter: int = KMEANS_MAX_ITER,
           tol: float = KMEANS_TOL, plusplus: bool = False,
           restarts: int = 1) -> Partition:
    """Lloyd iteration under the diagonal metric ||z - mu||^2_A.

    Scaling is the diagonal of A (all-ones when omitted). Points are
    pre-multiplied by sqrt(A), which leaves assignments and member means
    identical to running the scaled objective directly. The objective is
    asserted nonincreasing every iteration; returned centroids are member
    means in the original coordinates and no cluster is empty. With
    restarts > 1 the lowest-objective run wins.
    """
    points = _check_points(points)
    n, d = points.shape
    if k > n:
        raise InfeasibleError(f"k={k} exceeds point count n={n}")
    if k < 1:
        raise ConfigError("k must be >= 1")
    if scaling is None:
        scaling = np.ones(d)
    scaling = np.asarray(scaling, dtype=np.float64)
    if scaling.shape != (d,):
        raise ShapeError(f"scaling shape {scaling.shape} != ({d},)")
    if np.any(scaling <= 0):
        raise ConfigError("scaling entries must be positive")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    seed_val = None if isinstance(seed, np.random.Generator) else int(seed)
    if restarts > 1:
        best = None
        for _ in range(restarts):
            run = kmeans(points, k, scaling=scaling, seed=rng, max_iter=max_iter,
                         tol=tol, plusplus=plusplus)
            if best is None or run.objective < best.objective:
                best = run
        best.seed = seed_val
        return best

    y = points * np.sqrt(scaling)
    if plusplus:
        centroids = y[_plusplus_init(y, k, rng)]
    else:
        centroids = y[rng.choice(n, size=k, replace=False)]
    sq_y = (y * y).sum(axis=1)
    prev_assign = None
    prev_obj = np.inf
    trace = []
    for _ in range(max_iter):
        d2 = _sq_dists(y, sq_y, centroids)
        assign = d2.argmin(axis=1)
        assign, d2 = _repair_empty(y, sq_y, centroids, assign, d2, k)
        obj = float(d2[np.arange(n), assign].sum())
        if obj > prev_obj * (1 + 1e-12) + 1e-12:
            raise NumericError(f"k-means objective increased: {prev_obj} -> {obj}")
        trace.append(obj)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if prev_assign is not None and prev_obj - obj <= tol * max(prev_obj, 1e-300):
            break
        for c in range(k):
            centroids[c] = y[assign == c].mean(axis=0)
        prev_assign, prev_obj = assign, obj
    clusters = [np.flatnonzero(assign == c) for c in range(k)]
    means = np.stack([points[m].mean(axis=0) for m in clusters])
    return Partition(assignment=assign.astype(np.int64), clusters=clusters,
                     centroids=means, scaling=scaling, provenance="kmeans",
                     k=k, seed=seed_val, objective=float(trace[-1]),
                     objective_trace=np.array(trace))


def _sq_dists(y, sq_y, centroids):
    d2 = sq_y[:, None] + (centroids * centroids).sum(axis=1)[None, :] - 2.0 * (y @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _repair_empty(y, sq_y, centroids, assign, d2, k):
    # reseed an empty centroid at the point farthest from its own centroid
    n = y.shape[0]
    for _ in range(2 * k):
        sizes = np.bincount(assign, minlength=k)
        empties = np.flatnonzero(sizes == 0)
        if empties.size == 0:
            return assign, d2
        worst = int(d2[np.arange(n), assign].argmax())
        centroids[empties[0]] = y[worst]
        d2 = _sq_dists(y, sq_y, centroids)
        assign = d2.argmin(axis=1)
    raise InfeasibleError(f"cannot keep {k} nonempty clusters; "
                          "fewer than k distinct points?")


def _plusplus_init(y, k, rng):
    n = y.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = ((y - y[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(k - 1):
        total = d2.sum()
        if total <= 0:
            remaining = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(rng.choice(remaining)))
            continue
        nxt = int(rng.choice(n, p=d2 / total))
        chosen.append(nxt)
        d2 = np.minimum(d2, ((y - y[nxt]) ** 2).sum(axis=1))
    return np.array(chosen)


def generate_partitions(ds: DataSet, P: int, k: int, seed: int,
                        scaling: str | np.ndarray = "random",
                        split: str = "meta-train", workers: int = 1,
                        **kmeans_kwargs) -> list[Partition]:
    """P independent k-means partitions of the split's embeddings, each under
    a fresh random diagonal metric with entries drawn i.i.d. uniform on (0, 1].
    Partitions are seeded per index, so workers > 1 changes nothing but speed."""
    if ds.embeddings is None:
        raise DataError("generate_partitions requires embeddings")
    rows = ds.split_indices(split)
    points = ds.embeddings[rows]

    def build(p: int) -> Partition:
        rng = stable_rng(seed, p)
        if isinstance(scaling, str):
            if scaling != "random":
                raise ConfigError(f"unknown scaling mode {scaling!r}")
            diag = 1.0 - rng.random(points.shape[1])  # uniform on (0, 1]
        else:
            diag = np.asarray(scaling, dtype=np.float64)
        part = kmeans(points, k, scaling=diag, seed=rng, **kmeans_kwargs)
        part.seed = seed
        return _lift(part, rows, ds.n)

    from .ioutil import parallel_map
    return parallel_map(build, range(P), workers)


def pixel_partition(ds: DataSet, k: int, seed: int,
                    split: str = "meta-train", **kmeans_kwargs) -> Partition:
    """k-means over raw vectors (all-ones scaling)."""
    rows = ds.split_indices(split)
    part = kmeans(ds.raw[rows], k, seed=seed, **kmeans_kwargs)
    part.source_space = "raw"
    return _lift(part, rows, ds.n)


def _lift(part: Partition, rows: np.ndarray, n: int) -> Partition:
    """Re-index a partition built on a row subset into full-dataset indices."""
    assignment = np.full(n, -1, dtype=np.int64)
    assignment[rows] = part.assignment
    part.assignment = assignment
    part.clusters = [rows[m] for m in part.clusters]
    return part


# -- random-hyperplane slicing ---------------------------------------------------

def sample_hyperplanes(points: np.ndarray, count: int, rng: np.random.Generator) -> list[Hyperplane]:
    """Standard-normal normals; the on-plane point is a uniformly chosen
    data point, so every plane crosses the data cloud."""
    points = _check_points(points)
    planes = []
    for _ in range(count):
        normal = rng.standard_normal(points.shape[1])
        anchor = points[int(rng.integers(points.shape[0]))].copy()
        planes.append(Hyperplane(normal, anchor))
    return planes


def partition_by_hyperplanes(points: np.ndarray, hyperplanes: list[Hyperplane],
                             margin: float, r_min: int) -> Partition:
    """Bucket points by the sign pattern of their distances to each plane.

    Points within (-margin, margin) of any plane are discarded; buckets
    with fewer than r_min members are pruned. The caller checks whether
    enough clusters survive.
    """
    points = _check_points(points)
    if margin < 0:
        raise ConfigError("margin must be >= 0")
    dists = np.stack([signed_distance(h, points) for h in hyperplanes], axis=1)
    kept = (np.abs(dists) >= margin).all(axis=1)
    pattern = (dists >= 0).astype(np.int64) @ (1 << np.arange(len(hyperplanes)))
    assignment = np.full(points.shape[0], -1, dtype=np.int64)
    clusters = []
    for pat in range(1 << len(hyperplanes)):
        members = np.flatnonzero(kept & (pattern == pat))
        if members.size >= r_min:
            assignment[members] = len(clusters)
            clusters.append(members)
    return Partition(assignment=assignment, clusters=clusters, centroids=None,
                     provenance="hyperplane", k=len(clusters), margin=margin,
                     hyperplanes=list(hyperplanes))


def hyperplane_partition(points: np.ndarray, n_way: int, margin: float, r_min: int,
                         seed: int | np.random.Generator,
                         pool: list[Hyperplane] | None = None,
                         retry_cap: int = HYPERPLANE_RETRY_CAP) -> Partition:
    """Slice the space with H = ceil(log2 n_way) hyperplanes; reject and
    retry while fewer than n_way subsets survive margin and size pruning."""
    points = _check_points(points)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = max(1, math.ceil(math.log2(n_way)))
    last_kept = 0.0
    for _ in range(retry_cap + 1):
        if pool is None:
            planes = sample_hyperplanes(points, h, rng)
        else:
            if len(pool) < h:
                raise ConfigError(f"pool of {len(pool)} hyperplanes < H={h}")
            planes = [pool[i] for i in rng.choice(len(pool), size=h, replace=False)]
        part = partition_by_hyperplanes(points, planes, margin, r_min)
        if part.num_clusters >= n_way:
            part.seed = None if isinstance(seed, np.random.Generator) else int(seed)
            return part
        last_kept = float((part.assignment >= 0).sum()) / points.shape[0]
    raise InfeasibleError(
        f"hyperplane partition infeasible after {retry_cap + 1} attempts: "
        f"margin {margin} keeps {last_kept:.1%} of points in surviving subsets, "
        f"need {n_way} subsets of >= {r_min}")


def generate_hyperplane_partitions(ds: DataSet, P: int, n_way: int, margin: float,
                                   r_min: int, seed: int, split: str = "meta-train",
                                   pool_size: int = HYPERPLANE_POOL_SIZE,
                                   retry_cap: int = HYPERPLANE_RETRY_CAP,
                                   workers: int = 1) -> list[Partition]:
    """P hyperplane partitions drawn as H-combinations from one pre-computed
    pool of hyperplanes."""
    if ds.embeddings is None:
        raise DataError("hyperplane partitions require embeddings")
    rows = ds.split_indices(split)
    points = ds.embeddings[rows]
    pool = sample_hyperplanes(points, pool_size, stable_rng(seed, 0xB00))

    def build(p: int) -> Partition:
        part = hyperplane_partition(points, n_way, margin, r_min,
                                    stable_rng(seed, p), pool=pool,
                                    retry_cap=retry_cap)
        part.seed = seed
        return _lift(part, rows, ds.n)

    from .ioutil import parallel_map
    return parallel_map(build, range(P), workers)


# -- random and label partitions ---------------------------------------------------

def random_partition(n: int, k: int, rng: np.random.Generator) -> Partition:
    """Uniform independent assignment into k clusters; empty clusters are
    dropped and ids compacted."""
    if k < 2:
        raise ConfigError(f"random partition needs k >= 2, got {k}")
    assignment = rng.integers(0, k, size=n).astype(np.int64)
    used = np.unique(assignment)
    remap = -np.ones(k, dtype=np.int64)
    remap[used] = np.arange(used.size)
    assignment = remap[assignment]
    return Partition(assignment=assignment,
                     clusters=_clusters_from_assignment(assignment),
                     provenance="random", k=k)


def partition_from_labels(ds: DataSet, split: str | None = None) -> Partition:
    """One cluster per label value; drives oracle task generation."""
    if ds.labels is None:
        raise DataError("partition_from_labels requires labels")
    rows = np.arange(ds.n) if split is None else ds.split_indices(split)
    assignment = np.full(ds.n, -1, dtype=np.int64)
    values = np.unique(ds.labels[rows])
    clusters = []
    for c, value in enumerate(values):
        members = rows[ds.labels[rows] == value]
        assignment[members] = c
        clusters.append(members)
    centroids = None
    if ds.embeddings is not None:
        centroids = np.stack([ds.embeddings[m].mean(axis=0) for m in clusters])
    return Partition(assignment=assignment, clusters=clusters, centroids=centroids,
                     provenance="supervised", k=len(clusters))


# -- text serialization --------------------------------------------------------

def save_partition(part: Partition, path) -> None:
    """One `index,cluster` line per point; header lines carry provenance,
    k, seed, scaling, and (for hyperplane partitions) margin and planes."""
    with open(path, "w") as fh:
        fh.write(f"# provenance={part.provenance}\n")
        fh.write(f"# n={part.n}\n")
        fh.write(f"# k={part.k if part.k is not None else len(part.clusters)}\n")
        fh.write(f"# seed={part.seed if part.seed is not None else ''}\n")
        fh.write(f"# source_space={part.source_space}\n")
        if part.scaling is not None:
            fh.write("# scaling=" + ",".join(fmt_float(v) for v in part.scaling) + "\n")
        if part.margin is not None:
            fh.write(f"# margin={fmt_float(part.margin)}\n")
        for h in part.hyperplanes or []:
            fh.write("# hyperplane="
                     + ",".join(fmt_float(v) for v in h.normal) + ";"
                     + ",".join(fmt_float(v) for v in h.point) + "\n")
        for i, c in enumerate(part.assignment):
            fh.write(f"{i},{int(c)}\n")


def load_partition(path, points: np.ndarray | None = None) -> Partition:
    """Rebuild a partition from its text form. When the clustered points
    are supplied, centroids are recomputed as member means."""
    header: dict[str, str] = {}
    planes: list[Hyperplane] = []
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "hyperplane":
                    normal, _, anchor = value.partition(";")
                    planes.append(Hyperplane(
                        np.array([float(v) for v in normal.split(",")]),
                        np.array([float(v) for v in anchor.split(",")])))
                else:
                    header[key] = value
                continue
            idx, _, cluster = line.partition(",")
            pairs.append((int(idx), int(cluster)))
    n = int(header.get("n", len(pairs)))
    if len(pairs) != n:
        raise DataError(f"{path}: {len(pairs)} assignment lines, header says n={n}")
    assignment = np.full(n, -1, dtype=np.int64)
    for idx, cluster in pairs:
        assignment[idx] = cluster
    scaling = None
    if "scaling" in header:
        scaling = np.array([float(v) for v in header["scaling"].split(",")])
    part = Partition(
        assignment=assignment,
        clusters=_clusters_from_assignment(assignment),
        scaling=scaling,
        provenance=header.get("provenance", "kmeans"),
        k=int(header["k"]) if header.get("k") else None,
        seed=int(header["seed"]) if header.get("seed") else None,
        source_space=header.get("source_space", "embedding"),
        margin=float(header["margin"]) if "margin" in header else None,
        hyperplanes=planes or None,
    )
    if points is not None:
        part.centroids = np.stack([points[m].mean(axis=0) for m in part.clusters])
    part.validate()
    return part
