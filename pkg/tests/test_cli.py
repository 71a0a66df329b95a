import hashlib

import numpy as np
import pytest

from metafew.cli import main
from metafew.data import load_dataset
from metafew.evaluation import read_report_csv
from metafew.metalearn import MetaConfig, initial_model
from metafew.network import load_checkpoint, params_flatten
from metafew.tasks import read_task_manifest


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def synth_args(out, **over):
    args = {"out": str(out), "classes": "6", "per_class": "12", "d_in": "4",
            "d_z": "3", "noise": "0.3", "seed": "5",
            "split_mode": "by_class_counts", "train_classes": "4",
            "val_classes": "0", "test_classes": "2"}
    args.update({k: str(v) for k, v in over.items()})
    return ["synth"] + [f"{k}={v}" for k, v in args.items()]


@pytest.fixture()
def dataset(tmp_path):
    path = tmp_path / "ds.emb1"
    assert main(synth_args(path)) == 0
    return path


def test_synth_is_deterministic_and_loads(tmp_path):
    a = tmp_path / "a.emb1"
    assert main(synth_args(a)) == 0
    first = digest(a)
    assert main(synth_args(a)) == 0
    assert digest(a) == first
    ds = load_dataset(a)
    assert ds.n == 72 and ds.d_in == 4 and ds.d_z == 3
    assert ds.split_indices("meta-test").size == 24

def test_synth_zero_noise_flag_honored(tmp_path):
    path = tmp_path / "zero.emb1"
    assert main(synth_args(path, noise="0.0", split_mode="none")) == 0
    ds = load_dataset(path)
    first_class = ds.raw[ds.labels == 0]
    assert np.all(first_class == first_class[0])

def test_unknown_config_key_is_exit_2(tmp_path):
    assert main(["synth", "bogus_key=1"]) == 2

def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "synth.cfg"
    cfg.write_text("out=ignored.emb1\nclasses=6\nper_class=12\nd_in=4\nd_z=3\n"
                   "noise=0.3\nseed=5\n")
    out = tmp_path / "c.emb1"
    assert main(["synth", str(cfg), f"out={out}"]) == 0
    assert out.exists()

def test_missing_dataset_is_exit_3(tmp_path):
    assert main(["partition", "data=/nope.emb1", "out_prefix=x",
                 "method=kmeans", "k=3"]) == 3


def test_partition_writes_files_and_reruns_identically(tmp_path, dataset):
    prefix = tmp_path / "parts"
    args = ["partition", f"data={dataset}", f"out_prefix={prefix}",
            "method=kmeans", "P=3", "k=4", "seed=9"]
    assert main(args) == 0
    files = sorted(tmp_path.glob("parts_0*.part"))
    assert len(files) == 3
    manifest = tmp_path / "parts_manifest.txt"
    assert manifest.exists()
    before = [digest(f) for f in files] + [digest(manifest)]
    assert main(args) == 0
    after = [digest(f) for f in sorted(tmp_path.glob("parts_0*.part"))] + [digest(manifest)]
    assert before == after

def test_partition_random_ignores_embeddings(tmp_path):
    raw_only = tmp_path / "raw.csv"
    rows = "\n".join(f"{i}.0,{i + 1}.0" for i in range(30))
    raw_only.write_text("raw_0,raw_1\n" + rows + "\n")
    prefix = tmp_path / "rp"
    assert main(["partition", f"data={raw_only}", f"out_prefix={prefix}",
                 "method=random", "k=3", "seed=1"]) == 0
    assert (tmp_path / "rp_000.part").exists()

def test_gen_tasks_manifest(tmp_path, dataset):
    prefix = tmp_path / "parts"
    assert main(["partition", f"data={dataset}", f"out_prefix={prefix}",
                 "method=kmeans", "P=2", "k=4", "seed=9"]) == 0
    out = tmp_path / "tasks.txt"
    args = ["gen-tasks", f"data={dataset}", f"partitions={prefix}_manifest.txt",
            f"out={out}", "tasks=8", "n_way=3", "k_shot=1", "q_queries=2",
            "seed=11"]
    assert main(args) == 0
    tasks = read_task_manifest(out, load_dataset(dataset))
    assert len(tasks) == 8
    h = digest(out)
    assert main(args) == 0
    assert digest(out) == h


def meta_train_args(dataset, prefix, ckpt, log=None, **over):
    args = {"data": str(dataset), "partitions": f"{prefix}_manifest.txt",
            "out": str(ckpt), "learner": "maml", "meta_iterations": "4",
            "task_batch_size": "2", "n_way": "3", "k_shot": "1",
            "inner_steps": "2", "seed": "13"}
    if log:
        args["log"] = str(log)
    args.update({k: str(v) for k, v in over.items()})
    return ["meta-train"] + [f"{k}={v}" for k, v in args.items()]


@pytest.fixture()
def partitions(tmp_path, dataset):
    prefix = tmp_path / "parts"
    assert main(["partition", f"data={dataset}", f"out_prefix={prefix}",
                 "method=kmeans", "P=2", "k=4", "seed=9"]) == 0
    return prefix


def test_meta_train_zero_iterations_writes_init(tmp_path, dataset, partitions):
    ckpt = tmp_path / "model.ckpt"
    assert main(meta_train_args(dataset, partitions, ckpt,
                                meta_iterations=0)) == 0
    params = load_checkpoint(ckpt)
    cfg = MetaConfig(learner="maml", n_way=3, seed=13, meta_iterations=0)
    expect = initial_model(cfg, 4)
    assert np.array_equal(params_flatten(params), params_flatten(expect))

def test_meta_train_deterministic_and_resumable(tmp_path, dataset, partitions):
    ckpt = tmp_path / "model.ckpt"
    log = tmp_path / "log.csv"
    args = meta_train_args(dataset, partitions, ckpt, log=log)
    assert main(args) == 0
    first = digest(ckpt)
    first_log = digest(log)
    assert main(args) == 0
    assert digest(ckpt) == first and digest(log) == first_log
    # resume=true with an existing checkpoint is a no-op
    assert main(args + ["resume=true"]) == 0
    assert digest(ckpt) == first

def test_meta_train_protonet(tmp_path, dataset, partitions):
    ckpt = tmp_path / "proto.ckpt"
    assert main(meta_train_args(dataset, partitions, ckpt, learner="protonet",
                                task_batch_size=1, q_queries=4)) == 0
    params = load_checkpoint(ckpt)
    assert params.layers[-1].activation == "relu"


def eval_args(dataset, out, learner, **over):
    args = {"data": str(dataset), "out": str(out), "learner": learner,
            "tasks": "12", "n_way": "2", "k_shot": "1", "q_queries": "5",
            "seed": "17", "adapt_steps": "5", "workers": "1"}
    args.update({k: str(v) for k, v in over.items()})
    return ["evaluate"] + [f"{k}={v}" for k, v in args.items()]


def test_evaluate_scratch_needs_no_checkpoint(tmp_path, dataset):
    out = tmp_path / "scratch.csv"
    assert main(eval_args(dataset, out, "scratch")) == 0
    report, summary = read_report_csv(out)
    assert report.task_count == 12
    assert float(summary["mean"]) == report.mean
    assert float(summary["ci95"]) == report.ci95

def test_evaluate_same_seed_identical_csv(tmp_path, dataset):
    a = tmp_path / "a.csv"
    assert main(eval_args(dataset, a, "knn")) == 0
    first = digest(a)
    assert main(eval_args(dataset, a, "knn")) == 0
    assert digest(a) == first
    # a second output path differs only in the echoed out= line
    b = tmp_path / "b.csv"
    assert main(eval_args(dataset, b, "knn")) == 0
    rows_a = [l for l in a.read_text().splitlines() if not l.startswith("#")]
    rows_b = [l for l in b.read_text().splitlines() if not l.startswith("#")]
    assert rows_a == rows_b

def test_evaluate_meta_learner_and_cluster_match(tmp_path, dataset, partitions):
    ckpt = tmp_path / "model.ckpt"
    assert main(meta_train_args(dataset, partitions, ckpt)) == 0
    out = tmp_path / "maml.csv"
    assert main(eval_args(dataset, out, "maml", checkpoint=ckpt, n_way="2")) == 0
    cm = tmp_path / "cm.csv"
    assert main(eval_args(dataset, cm, "cluster-match",
                          partition=f"{partitions}_000.part")) == 0
    ra, _ = read_report_csv(out)
    rb, _ = read_report_csv(cm)
    assert ra.fingerprint == rb.fingerprint
    proto_ckpt = tmp_path / "proto.ckpt"
    assert main(meta_train_args(dataset, partitions, proto_ckpt,
                                learner="protonet", task_batch_size=1,
                                q_queries=4)) == 0
    pr = tmp_path / "proto.csv"
    assert main(eval_args(dataset, pr, "protonet", checkpoint=proto_ckpt)) == 0
    rc, _ = read_report_csv(pr)
    assert rc.fingerprint == ra.fingerprint

def test_evaluate_missing_checkpoint_is_exit_2(tmp_path, dataset):
    out = tmp_path / "x.csv"
    assert main(eval_args(dataset, out, "maml")) == 2

def test_compare_pipeline(tmp_path, dataset):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(eval_args(dataset, a, "knn")) == 0
    assert main(eval_args(dataset, b, "linear")) == 0
    table = tmp_path / "table.csv"
    assert main(["compare", str(a), str(b), f"out={table}"]) == 0
    text = table.read_text()
    assert "knn" in text and "linear" in text
    # single input echoes itself
    assert main(["compare", str(a)]) == 0

def test_compare_mismatched_fingerprints_rejected(tmp_path, dataset):
    a = tmp_path / "a.csv"
    assert main(eval_args(dataset, a, "knn")) == 0
    other = tmp_path / "ds2.emb1"
    assert main(synth_args(other, seed=99)) == 0
    b = tmp_path / "b.csv"
    assert main(eval_args(other, b, "knn")) == 0
    assert main(["compare", str(a), str(b)]) == 2

def test_evaluate_from_task_manifest(tmp_path, dataset, partitions):
    manifest = tmp_path / "tasks.txt"
    assert main(["gen-tasks", f"data={dataset}",
                 f"partitions={partitions}_manifest.txt", f"out={manifest}",
                 "tasks=6", "n_way=3", "k_shot=1", "q_queries=2",
                 "seed=19"]) == 0
    out = tmp_path / "knn.csv"
    assert main(eval_args(dataset, out, "knn", tasks_manifest=manifest)) == 0
    report, _ = read_report_csv(out)
    assert report.task_count == 6

def test_meta_train_on_embeddings_and_oracle_source(tmp_path, dataset, partitions):
    # meta-learn directly on embeddings: model width follows d_z
    ckpt = tmp_path / "emb.ckpt"
    assert main(meta_train_args(dataset, partitions, ckpt, meta_iterations=2,
                                input_repr="embedding")) == 0
    assert load_checkpoint(ckpt).in_dim == 3
    out = tmp_path / "emb_eval.csv"
    assert main(eval_args(dataset, out, "maml", checkpoint=ckpt,
                          input_repr="embedding")) == 0
    # oracle training consumes labels instead of partitions
    oracle = tmp_path / "oracle.ckpt"
    assert main(meta_train_args(dataset, partitions, oracle, meta_iterations=2,
                                source="labels", split="meta-train")) == 0
    assert load_checkpoint(oracle).in_dim == 4


def test_gen_tasks_attribute_source(tmp_path):
    rng = np.random.default_rng(31)
    import metafew
    ds = metafew.DataSet(raw=rng.standard_normal((300, 3)),
                         attributes=rng.integers(0, 2, (300, 8)).astype(bool))
    path = tmp_path / "attr.emb1"
    metafew.save_dataset(ds, path)
    out = tmp_path / "attr_tasks.txt"
    assert main(["gen-tasks", f"data={path}", f"out={out}", "source=attributes",
                 "tasks=5", "n_way=2", "k_shot=5", "q_queries=5", "seed=23"]) == 0
    tasks = read_task_manifest(out, ds)
    assert len(tasks) == 5
    assert all(t.n_way == 2 for t in tasks)

def test_usage_and_help():
    assert main([]) == 0
    assert main(["synth", "--help"]) == 0
    assert main(["frobnicate"]) == 2
