import numpy as np
import pytest

from eans.dataset import (FilterIndex, candidate_filter, contains, load_dataset)
from eans.errors import DatasetError

from conftest import write_kg


TOY3 = [("a", "r", "b"), ("b", "r", "c"), ("a", "r", "c")]


def test_three_line_toy_counts(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3, valid=[("a", "r", "b")][:0] or [("b", "r", "a")],
                 test=[("c", "r", "a")])
    ds = load_dataset(str(d))
    assert ds.n_entities == 3
    assert ds.n_relations == 1
    assert len(ds.train) == 3


def test_first_appearance_order(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3, valid=[("b", "r", "a")], test=[("c", "r", "a")])
    ds = load_dataset(str(d))
    assert ds.entity_to_id == {"a": 0, "b": 1, "c": 2}
    assert ds.relation_to_id == {"r": 0}
    # round trip: decode then re-encode reproduces identical indices
    for split in ("train", "valid", "test"):
        for h, r, t in ds.splits[split]:
            names = (ds.id_to_entity[h], ds.id_to_relation[r], ds.id_to_entity[t])
            again = (ds.entity_to_id[names[0]], ds.relation_to_id[names[1]],
                     ds.entity_to_id[names[2]])
            assert again == (h, r, t)


def test_empty_train_is_error(tmp_path):
    d = write_kg(tmp_path / "kg", [], valid=TOY3, test=TOY3)
    with pytest.raises(DatasetError, match="empty split"):
        load_dataset(str(d))


def test_missing_file_is_error(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3)
    with pytest.raises(DatasetError, match="missing file"):
        load_dataset(str(d))


def test_malformed_line_names_position(tmp_path):
    d = tmp_path / "kg"
    write_kg(d, TOY3, valid=[("b", "r", "a")], test=[("c", "r", "a")])
    with open(d / "train.txt", "a", encoding="utf-8") as fh:
        fh.write("only\ttwo\n")
    with pytest.raises(DatasetError, match="train.txt:4"):
        load_dataset(str(d))


def test_duplicate_line_rejected(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3 + [("a", "r", "b")],
                 valid=[("b", "r", "a")], test=[("c", "r", "a")])
    with pytest.raises(DatasetError, match="duplicate triple"):
        load_dataset(str(d))


def test_oov_entities_flagged_not_rejected(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3, valid=[("zz", "r", "a")], test=[("c", "r", "a")])
    ds = load_dataset(str(d))
    assert "zz" in ds.entity_to_id
    assert ds.report.oov_entities == ["zz"]
    assert "entities_only_in_valid_or_test 1" in ds.report.to_text()


def test_dict_files_override_assignment(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3, valid=[("b", "r", "a")], test=[("c", "r", "a")])
    (d / "entities.dict").write_text("0\tc\n1\tb\n2\ta\n", encoding="utf-8")
    ds = load_dataset(str(d))
    assert ds.entity_to_id == {"c": 0, "b": 1, "a": 2}


def test_dict_file_must_cover_data(tmp_path):
    d = write_kg(tmp_path / "kg", TOY3, valid=[("b", "r", "a")], test=[("c", "r", "a")])
    (d / "entities.dict").write_text("0\ta\n1\tb\n", encoding="utf-8")
    with pytest.raises(DatasetError, match="missing from dictionary"):
        load_dataset(str(d))


class TestMembership:
    @pytest.fixture()
    def ds(self, tmp_path):
        d = write_kg(tmp_path / "kg", TOY3, valid=[("b", "r", "a")],
                     test=[("c", "r", "b")])
        return load_dataset(str(d))

    def test_train_membership(self, ds):
        triple = tuple(ds.train[0])
        assert contains(ds.filter, triple, scope="train")
        assert contains(ds.filter, triple, scope="all")

    def test_test_only_membership(self, ds):
        c, b = ds.entity_to_id["c"], ds.entity_to_id["b"]
        t = (c, 0, b)
        assert not contains(ds.filter, t, scope="train")
        assert contains(ds.filter, t, scope="all")

    def test_absent_triple(self, ds):
        c = ds.entity_to_id["c"]
        assert not contains(ds.filter, (c, 0, c), scope="train")
        assert not contains(ds.filter, (c, 0, c), scope="all")

    def test_every_split_triple_in_all_scope(self, ds):
        for split in ("train", "valid", "test"):
            for row in ds.splits[split]:
                assert contains(ds.filter, tuple(row), scope="all")

    def test_contains_batch_agrees_with_scalar(self, ds):
        rng = np.random.default_rng(0)
        h = rng.integers(0, ds.n_entities, 200)
        r = np.zeros(200, dtype=np.int64)
        t = rng.integers(0, ds.n_entities, 200)
        for scope in ("train", "all"):
            batch = ds.filter.contains_batch(h, r, t, scope)
            scalar = [contains(ds.filter, (hh, rr, tt), scope)
                      for hh, rr, tt in zip(h, r, t)]
            assert batch.tolist() == scalar


class TestCandidateFilter:
    @pytest.fixture()
    def ds(self, tmp_path):
        # second relation keeps the r-queries at their hand-enumerated values
        d = write_kg(tmp_path / "kg", [("a", "r", "b"), ("a", "r", "c")],
                     valid=[("b", "s", "c")], test=[("c", "s", "a")])
        return load_dataset(str(d))

    def test_tail_candidates(self, ds):
        a = ds.entity_to_id["a"]
        expect = {ds.entity_to_id["b"], ds.entity_to_id["c"]}
        assert candidate_filter(ds.filter, head=a, relation=0) == expect

    def test_unseen_key_empty(self, ds):
        # (c, r, .) appears in no split
        c = ds.entity_to_id["c"]
        assert candidate_filter(ds.filter, head=c, relation=0) == set()

    def test_head_candidates(self, ds):
        c = ds.entity_to_id["c"]
        assert candidate_filter(ds.filter, relation=0, tail=c) == {ds.entity_to_id["a"]}

    def test_grouped_views_partition_all_triples(self, ds):
        total = sum(len(v) for v in ds.filter.tails_by_hr.values())
        assert total == len(ds.filter.all_set)
        total_h = sum(len(v) for v in ds.filter.heads_by_rt.values())
        assert total_h == len(ds.filter.all_set)


def test_toy_dataset_loads(toy_dataset):
    assert toy_dataset.n_entities == 135
    assert toy_dataset.n_relations == 46
    assert len(toy_dataset.train) > 4000
    fi = toy_dataset.filter
    assert isinstance(fi, FilterIndex)
    # splits are disjoint by construction of the generator
    train_keys = {tuple(r) for r in toy_dataset.train}
    assert not train_keys & {tuple(r) for r in toy_dataset.test}
