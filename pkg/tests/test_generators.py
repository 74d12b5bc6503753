import json
import logging

import numpy as np
import pytest

from ndprop.generators import (
    DatasetConfigError,
    N2LParams,
    ThreeLPParams,
    build_dataset,
    gen_3lp,
    gen_n2l,
    list_files,
    load_dataset,
    regenerate,
)

from .oracles import stable_models_bruteforce


def _within_3_sigma(values, mean, var):
    sigma = np.sqrt(var / len(values))
    return abs(np.mean(values) - mean) <= 3 * sigma


def test_n2l_expected_counts():
    pure, contra = [], []
    for s in range(10_000):
        p = gen_n2l(N2LParams(10, 5, 1, s))
        k = sum(1 for r in p.rules if r.neg != (r.head,))
        pure.append(k)
        contra.append(len(p.rules) - k)
    assert _within_3_sigma(pure, 45, 90 * 0.25)
    assert _within_3_sigma(contra, 1, 10 * 0.1 * 0.9)


def test_n2l_boundaries():
    assert gen_n2l(N2LParams(10, 0, 0, 3)).rules == ()
    p = gen_n2l(N2LParams(10, 10, 0, 3))
    assert len(p.rules) == 90 and all(r.neg != (r.head,) for r in p.rules)
    assert p.atoms == tuple(f"a{i}" for i in range(10))


@pytest.mark.parametrize("kw", [dict(n=1), dict(n=5, c1=6), dict(n=5, c2=-1)])
def test_n2l_param_validation(kw):
    with pytest.raises(ValueError):
        N2LParams(**kw)


def test_3lp_shape():
    p = gen_3lp(ThreeLPParams(10, 50, 1))
    assert len(p.rules) == 50
    assert all(len(r.pos) + len(r.neg) == 3 for r in p.rules)
    with pytest.raises(ValueError):
        ThreeLPParams(3, 5)


def test_3lp_distinct_bodies_and_negation_rate():
    negs = []
    for s in range(1000):
        for r in gen_3lp(ThreeLPParams(8, 10, s)).rules:
            body = r.pos + r.neg
            assert len(set(body)) == 3 and r.head not in body
            negs.append(len(r.neg))
    assert len(negs) == 10_000
    assert _within_3_sigma(negs, 1.5, 0.75)


def test_generators_deterministic():
    assert gen_n2l(N2LParams(8, seed=4)) == gen_n2l(N2LParams(8, seed=4))
    assert gen_3lp(ThreeLPParams(8, 40, 4)) == gen_3lp(ThreeLPParams(8, 40, 4))


def test_easy_dataset_layout(tmp_path, caplog):
    with caplog.at_level(logging.INFO, logger="ndprop.generators"):
        ds = build_dataset(tmp_path, "n2l", "easy", (1000, 100, 100), seed=0)
    files = list_files(tmp_path)
    assert len(files) == 2 * 1200 + 1
    assert all(i.models for part in ("train", "val") for i in ds[part])
    assert all(5 <= i.program.n <= 10 for part in ("train", "val", "test") for i in ds[part])
    manifest = json.loads((tmp_path / "manifest").read_text())
    assert manifest["params"] == {"c1": 5.0, "c2": 1.0}
    assert 0 < manifest["rejected"]["train"] < 1000
    assert "rejected" in caplog.text


def test_dataset_byte_identical(tmp_path):
    a = build_dataset(tmp_path / "a", "3lp", "easy", (20, 5, 5), seed=9)
    regenerate(a.manifest, tmp_path / "b")
    files = list_files(tmp_path / "a")
    assert files == list_files(tmp_path / "b")
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_load_round_trip(tmp_path):
    ds = build_dataset(tmp_path, "n2l", "easy", (10, 3, 3), seed=2)
    back = load_dataset(tmp_path)
    for part in ("train", "val", "test"):
        assert [i.program for i in back[part]] == [i.program for i in ds[part]]
        assert [i.models for i in back[part]] == [i.models for i in ds[part]]


def test_labels_match_reduct_oracle(tmp_path):
    ds = build_dataset(tmp_path, "3lp", "easy", (100, 20, 20), seed=5)
    rng = np.random.default_rng(0)
    pool = [i for part in ("train", "val", "test") for i in ds[part]]
    for k in rng.choice(len(pool), size=len(pool) // 20, replace=False):
        inst = pool[k]
        assert inst.models == stable_models_bruteforce(inst.program)


def test_unlabelled_hard_test_split(tmp_path):
    ds = build_dataset(tmp_path, "n2l", "hard", (0, 0, 2), seed=1)
    assert all(not i.labeled for i in ds["test"])
    assert all(51 <= i.program.n <= 100 for i in ds["test"])
    assert (tmp_path / "test" / "0000.models").read_text() == ""


def test_inconsistent_test_instances_kept_on_request(tmp_path):
    ds = build_dataset(tmp_path, "n2l", "easy", (0, 0, 60), seed=1, consistent_test=False)
    assert any(i.models == [] for i in ds["test"])
    assert ds.manifest["rejected"]["test"] == 0


@pytest.mark.parametrize("args", [("n2l", "hard", (5, 0, 0)), ("xyz", "easy", (1, 1, 1)),
                                  ("n2l", "tiny", (1, 1, 1)), ("n2l", "easy", (0, 0, 0))])
def test_dataset_config_errors(tmp_path, args):
    with pytest.raises(DatasetConfigError):
        build_dataset(tmp_path, *args)
