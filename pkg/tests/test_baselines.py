import numpy as np
import pytest

from metafew.baselines import (cluster_matching_classify, knn_classify,
                               linear_fit, linear_predict, mlp_dropout_fit,
                               mlp_dropout_predict, train_from_scratch)
from metafew.data import synth_mixture
from metafew.errors import ConfigError, DataError
from metafew.partition import (Partition, kmeans, partition_from_labels)
from metafew.tasks import (TaskStreamConfig, make_supervised_task_stream,
                           sample_supervised_task)
from test_metalearn import toy_task


# -- knn ---------------------------------------------------------------------

def test_knn_query_on_train_point_returns_its_label():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 4))
    y = rng.integers(0, 3, 10)
    pred = knn_classify(x, y, x[4:5], k_nn=1)
    assert pred[0] == y[4]

def test_knn_majority_vote():
    x = np.array([[0.0], [0.1], [5.0]])
    y = np.array([0, 0, 1])
    assert knn_classify(x, y, np.array([[0.05]]), k_nn=3)[0] == 0

def test_knn_with_all_points_is_global_plurality():
    x = np.concatenate([np.zeros((4, 2)), np.ones((3, 2)) * 9])
    y = np.array([0] * 4 + [1] * 3)
    pred = knn_classify(x, y, np.array([[100.0, 100.0]]), k_nn=7)
    assert pred[0] == 0  # 4 votes beat 3 regardless of distance

def test_knn_tie_breaks_by_summed_distance_then_label():
    x = np.array([[0.0], [2.0]])
    y = np.array([1, 0])
    # one vote each; label 1 is closer to the query at 0.5
    assert knn_classify(x, y, np.array([[0.5]]), k_nn=2)[0] == 1
    # perfectly symmetric: lower label index wins
    assert knn_classify(x, y, np.array([[1.0]]), k_nn=2)[0] == 0

def test_knn_matches_brute_force_single_neighbor():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((30, 3))
    y = rng.integers(0, 4, 30)
    q = rng.standard_normal((12, 3))
    pred = knn_classify(x, y, q, k_nn=1)
    for i in range(12):
        d = ((x - q[i]) ** 2).sum(axis=1)
        assert pred[i] == y[d.argmin()]

def test_knn_validates_inputs():
    with pytest.raises(DataError):
        knn_classify(np.zeros((0, 2)), np.zeros(0, dtype=int), np.zeros((1, 2)), 1)
    with pytest.raises(ConfigError):
        knn_classify(np.zeros((3, 2)), np.zeros(3, dtype=int), np.zeros((1, 2)), 5)


# -- linear classifier ------------------------------------------------------------

def test_linear_separable_task_reaches_full_train_accuracy():
    rng = np.random.default_rng(2)
    x = np.concatenate([rng.standard_normal((10, 3)) + 4.0,
                        rng.standard_normal((10, 3)) - 4.0])
    y = np.array([0] * 10 + [1] * 10)
    model = linear_fit(x, y, 2)
    assert np.array_equal(linear_predict(model, x), y)

def test_linear_duplicate_training_point_as_query():
    rng = np.random.default_rng(3)
    x = np.concatenate([rng.standard_normal((8, 2)) + 3.0,
                        rng.standard_normal((8, 2)) - 3.0])
    y = np.array([0] * 8 + [1] * 8)
    model = linear_fit(x, y, 2)
    assert linear_predict(model, x[3:4])[0] == 0

def test_linear_identical_embeddings_collapse_to_one_class():
    x = np.ones((6, 3))
    y = np.array([0, 1, 2, 0, 1, 2])
    model = linear_fit(x, y, 3)
    pred = linear_predict(model, np.ones((4, 3)))
    assert np.unique(pred).size == 1

def test_linear_requires_enough_examples():
    with pytest.raises(ConfigError):
        linear_fit(np.zeros((2, 2)), np.array([0, 1]), 3)


# -- dropout MLP ---------------------------------------------------------------------

def test_mlp_dropout_zero_matches_plain_training():
    rng = np.random.default_rng(4)
    x = rng.standard_normal((20, 3))
    y = rng.integers(0, 2, 20)
    a = mlp_dropout_fit(x, y, 2, np.random.default_rng(7), dropout=0.0, steps=50)
    b = mlp_dropout_fit(x, y, 2, np.random.default_rng(7), dropout=0.0, steps=50)
    q = rng.standard_normal((10, 3))
    assert np.array_equal(mlp_dropout_predict(a, q), mlp_dropout_predict(b, q))
    # identical trajectories: weights agree exactly
    for la, lb in zip(a.params.layers, b.params.layers):
        assert np.array_equal(la.weights, lb.weights)

def test_mlp_hidden_width_default_is_128():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((12, 4))
    y = rng.integers(0, 3, 12)
    model = mlp_dropout_fit(x, y, 3, np.random.default_rng(8), steps=5)
    assert model.params.layers[0].weights.shape == (4, 128)

def test_inverted_dropout_preserves_expected_preactivation():
    rng = np.random.default_rng(6)
    h = rng.uniform(0.5, 1.5, size=(1, 64))
    w2 = rng.uniform(0.5, 1.5, size=(64, 3))
    keep = 0.5
    masks = (np.random.default_rng(9).random((10000, 64)) < keep) / keep
    mc = ((h * masks) @ w2).mean(axis=0)
    expected = (h @ w2)[0]
    assert np.abs(mc - expected).max() <= 0.01 * np.abs(expected).min()

def test_mlp_learns_separable_task():
    rng = np.random.default_rng(10)
    x = np.concatenate([rng.standard_normal((15, 3)) + 3.0,
                        rng.standard_normal((15, 3)) - 3.0])
    y = np.array([0] * 15 + [1] * 15)
    model = mlp_dropout_fit(x, y, 2, np.random.default_rng(11), dropout=0.3, steps=200)
    assert (mlp_dropout_predict(model, x) == y).mean() >= 0.95


# -- cluster matching ---------------------------------------------------------------

@pytest.fixture(scope="module")
def separable():
    return synth_mixture(10, 20, 6, 4, noise=0.05, seed=20)

def test_supervised_partition_matching_is_perfect(separable):
    part = partition_from_labels(separable)
    rng = np.random.default_rng(21)
    for _ in range(10):
        task = sample_supervised_task(separable, "meta-train", 5, 1, 5, rng,
                                      input_repr="embedding")
        pred = cluster_matching_classify(part, part.centroids, task)
        assert np.array_equal(pred, task.query_labels_int())

def test_query_in_unlabeled_cluster_falls_through_to_nearest_labeled():
    # three clusters; train shots label clusters 0 and 2 only; cluster 1's
    # centroid is nearer to cluster 0's
    assignment = np.array([0, 0, 1, 1, 2, 2])
    clusters = [np.array([0, 1]), np.array([2, 3]), np.array([4, 5])]
    centroids = np.array([[0.0], [1.0], [5.0]])
    part = Partition(assignment=assignment, clusters=clusters, centroids=centroids,
                     provenance="kmeans")
    task = toy_task(np.random.default_rng(22), n_way=2, k=1, q=1, d=1)
    task.train_indices = np.array([0, 4])   # clusters 0 and 2
    task.query_indices = np.array([2, 100])  # cluster 1, and an unknown point
    task.train_x = centroids[[0, 2]]
    task.query_x = np.array([[1.0], [4.9]])
    task.input_repr = "embedding"
    task.train_y = np.eye(2)
    task.query_y = np.eye(2)
    pred = cluster_matching_classify(part, centroids, task)
    assert pred[0] == 0  # unlabeled cluster 1 -> nearest labeled centroid 0
    assert pred[1] == 1  # unknown point -> nearest centroid 2 -> label 1

def test_all_shots_discarded_is_an_error():
    part = Partition(assignment=np.array([-1, -1, 0, 0]),
                     clusters=[np.array([2, 3])], centroids=None,
                     provenance="hyperplane")
    task = toy_task(np.random.default_rng(23), n_way=2, k=1, q=1, d=1)
    task.train_indices = np.array([0, 1])
    task.query_indices = np.array([2, 3])
    task.input_repr = "embedding"
    with pytest.raises(DataError, match="labeled"):
        cluster_matching_classify(part, None, task)

def test_matching_high_accuracy_with_true_cluster_count(separable):
    rows = separable.split_indices("meta-train")
    part = kmeans(separable.embeddings[rows], 10, seed=24, plusplus=True,
                  restarts=8)
    rng = np.random.default_rng(25)
    accs = []
    for _ in range(30):
        task = sample_supervised_task(separable, "meta-train", 10, 1, 5, rng,
                                      input_repr="embedding")
        pred = cluster_matching_classify(part, part.centroids, task)
        accs.append((pred == task.query_labels_int()).mean())
    assert np.mean(accs) >= 0.95


# -- training from scratch --------------------------------------------------------------

def test_scratch_zero_steps_is_chance_level(separable):
    cfg = TaskStreamConfig(tasks=200, n_way=4, k_shot=1, q_queries=5, seed=26)
    tasks = list(make_supervised_task_stream(cfg, separable))
    rng = np.random.default_rng(27)
    accs = [
        (train_from_scratch(t, rng, steps=0) == t.query_labels_int()).mean()
        for t in tasks
    ]
    assert abs(np.mean(accs) - 0.25) < 0.05

def test_scratch_separable_task_reaches_full_train_accuracy():
    from metafew.metalearn import maml_adapt, build_maml_model
    from metafew.network import forward
    rng = np.random.default_rng(28)
    task = toy_task(rng, n_way=2, k=5, separation=4.0)
    params = build_maml_model(3, 2, rng)
    adapted = maml_adapt(params, task, inner_lr=0.05, steps=100)
    assert (forward(adapted, task.train_x).argmax(axis=1)
            == task.train_labels_int()).all()

def test_scratch_deterministic_given_rng():
    task = toy_task(np.random.default_rng(29), n_way=3, k=2, q=4)
    a = train_from_scratch(task, np.random.default_rng(30), steps=10)
    b = train_from_scratch(task, np.random.default_rng(30), steps=10)
    assert np.array_equal(a, b)
