import numpy as np
import pytest

from eans.errors import CheckpointError
from eans.params import (ModelParams, OptimizerState, adam_step, entity_repr,
                         entity_repr_all, init_params, load_checkpoint,
                         save_checkpoint)


class TestInit:
    def test_deterministic(self):
        a = init_params("transe", 20, 3, 8, margin=9.0, seed=5)
        b = init_params("transe", 20, 3, 8, margin=9.0, seed=5)
        for name in a.tables:
            np.testing.assert_array_equal(a.tables[name], b.tables[name])

    def test_transe_bound_and_mean(self):
        # b = (9 + 2) / 1000 = 0.011; empirical mean within 3 sigma of 0
        p = init_params("transe", 2000, 5, 1000, margin=9.0, seed=0)
        ent = p.tables["ent"]
        bound = 0.011
        assert np.abs(ent).max() <= bound
        sigma_mean = bound / np.sqrt(3.0) / np.sqrt(ent.size)
        assert abs(float(ent.mean())) < 3 * sigma_mean

    def test_bilinear_bound(self):
        p = init_params("distmult", 50, 5, 16, margin=9.0, seed=0)
        assert np.abs(p.tables["ent"]).max() <= 1 / np.sqrt(16)

    def test_rotate_phases_in_range(self):
        p = init_params("rotate", 50, 5, 16, margin=9.0, seed=0)
        phases = p.tables["rel_phase"]
        assert phases.min() >= -np.pi and phases.max() < np.pi

    def test_relation_table_has_extra_row(self):
        for kind in ("transe", "transd", "distmult", "complex", "rotate"):
            p = init_params(kind, 10, 4, 6, margin=9.0, seed=0)
            for name in p.relation_tables:
                assert p.tables[name].shape[0] == 5
            assert p.r_sub == 4

    def test_bad_dims_rejected(self):
        with pytest.raises(ValueError):
            init_params("transe", 10, 3, 0, margin=9.0, seed=0)
        with pytest.raises(ValueError):
            init_params("nope", 10, 3, 4, margin=9.0, seed=0)


class TestEntityRepr:
    def test_single_table_identity(self):
        p = init_params("transe", 3, 1, 4, margin=9.0, seed=0)
        p.tables["ent"][1] = [1, 2, 3, 4]
        np.testing.assert_array_equal(entity_repr(p, 1), [1, 2, 3, 4])

    def test_transd_concatenates_embedding_then_transfer(self):
        p = init_params("transd", 3, 1, 2, margin=9.0, seed=0)
        p.tables["ent"][0] = [1, 2]
        p.tables["ent_p"][0] = [3, 4]
        np.testing.assert_array_equal(entity_repr(p, 0), [1, 2, 3, 4])

    def test_rotate_splits_components(self):
        p = init_params("rotate", 2, 1, 1, margin=9.0, seed=0)
        p.tables["ent_re"][0] = [1.0]
        p.tables["ent_im"][0] = [2.0]
        np.testing.assert_array_equal(entity_repr(p, 0), [1.0, 2.0])

    def test_length_constant_across_entities(self):
        for kind in ("transe", "transd", "complex", "rotate"):
            p = init_params(kind, 7, 2, 5, margin=9.0, seed=1)
            lengths = {len(entity_repr(p, i)) for i in range(7)}
            assert len(lengths) == 1
            assert lengths.pop() == sum(p.tables[n].shape[1] for n in p.entity_tables)

    def test_repr_all_matches_rows(self):
        p = init_params("complex", 6, 2, 3, margin=9.0, seed=2)
        mat = entity_repr_all(p)
        for i in range(6):
            np.testing.assert_array_equal(mat[i], entity_repr(p, i))


def scalar_params(value=1.0):
    """One-entity one-dim model for scalar Adam oracles (float64)."""
    p = init_params("transe", 1, 1, 1, margin=9.0, seed=0, dtype=np.float64)
    p.tables["ent"][:] = value
    return p


class TestAdam:
    def test_scalar_first_step(self):
        # m=0.1, v=0.001, mhat=1, vhat=1 -> delta = -lr / (1 + eps)
        p = scalar_params(1.0)
        s = OptimizerState.for_params(p, lr=0.001)
        before = float(p.tables["ent"][0, 0])
        adam_step(s, p, {"ent": (np.array([0]), np.array([[1.0]]))})
        delta = float(p.tables["ent"][0, 0]) - before
        assert abs(delta + 0.001) < 1e-9
        assert abs(delta - (-0.001 / (1 + 1e-8))) < 1e-15

    def test_zero_gradient_no_move(self):
        p = scalar_params(2.0)
        s = OptimizerState.for_params(p, lr=0.1)
        adam_step(s, p, {"ent": (np.array([0]), np.array([[0.0]]))})
        assert float(p.tables["ent"][0, 0]) == 2.0
        assert float(s.m["ent"][0, 0]) == 0.0
        assert float(s.v["ent"][0, 0]) == 0.0

    def test_duplicate_contributions_sum(self):
        p = scalar_params(3.0)
        s = OptimizerState.for_params(p, lr=0.1)
        adam_step(s, p, {"ent": (np.array([0, 0]), np.array([[1.0], [-1.0]]))})
        assert float(p.tables["ent"][0, 0]) == 3.0

    def test_untouched_rows_unchanged(self):
        p = init_params("transe", 10, 2, 4, margin=9.0, seed=3, dtype=np.float64)
        s = OptimizerState.for_params(p, lr=0.01)
        before = p.tables["ent"].copy()
        grad = np.ones((1, 4))
        adam_step(s, p, {"ent": (np.array([4]), grad)})
        changed = np.flatnonzero((p.tables["ent"] != before).any(axis=1))
        np.testing.assert_array_equal(changed, [4])

    def test_disjoint_updates_commute_within_one_step(self):
        # presenting the same disjoint row contributions in any order
        # (across tables and within the index arrays) is bitwise equivalent
        p1 = init_params("transe", 8, 2, 4, margin=9.0, seed=4, dtype=np.float64)
        p2 = p1.copy()
        s1 = OptimizerState.for_params(p1, lr=0.01)
        s2 = OptimizerState.for_params(p2, lr=0.01)
        rng = np.random.default_rng(0)
        ent_idx = np.array([0, 1, 5, 6])
        ent_rows = rng.normal(size=(4, 4))
        rel_idx = np.array([2, 0])
        rel_rows = rng.normal(size=(2, 4))
        adam_step(s1, p1, {"ent": (ent_idx, ent_rows), "rel": (rel_idx, rel_rows)})
        perm = np.array([2, 0, 3, 1])
        adam_step(s2, p2, {"rel": (rel_idx[::-1], rel_rows[::-1]),
                           "ent": (ent_idx[perm], ent_rows[perm])})
        for name in ("ent", "rel"):
            np.testing.assert_array_equal(p1.tables[name], p2.tables[name])

    def test_nan_gradient_rejected_and_aborted(self):
        p = init_params("transe", 4, 2, 4, margin=9.0, seed=5, dtype=np.float64)
        s = OptimizerState.for_params(p, lr=0.01)
        before = p.tables["ent"].copy()
        grad = np.ones((2, 4))
        grad[1, 2] = np.nan
        with pytest.raises(ValueError, match=r"ent\[3\]"):
            adam_step(s, p, {"ent": (np.array([1, 3]), grad)})
        np.testing.assert_array_equal(p.tables["ent"], before)
        assert s.step == 0

    def test_params_stay_finite_under_many_updates(self):
        p = init_params("transe", 6, 2, 4, margin=9.0, seed=6)
        s = OptimizerState.for_params(p, lr=0.05)
        rng = np.random.default_rng(1)
        for _ in range(200):
            idx = rng.integers(0, 6, size=3)
            adam_step(s, p, {"ent": (idx, rng.normal(size=(3, 4)) * 10)})
        assert np.isfinite(p.tables["ent"]).all()


class TestCheckpoint:
    def make(self, kind="transd", seed=7):
        p = init_params(kind, 9, 3, 4, margin=9.0, seed=seed)
        s = OptimizerState.for_params(p, lr=0.002)
        rng = np.random.default_rng(0)
        adam_step(s, p, {"ent": (np.array([2, 5]), rng.normal(size=(2, 4)))})
        return p, s

    def test_round_trip_bit_exact(self, tmp_path):
        p, s = self.make()
        path = tmp_path / "a.ckpt"
        vmap = np.random.default_rng(1).permutation(9).astype(np.int32)
        save_checkpoint(p, s, "deadbeef", path, seed=7, substitution_trained=True,
                        virt_to_real=vmap)
        ck = load_checkpoint(path)
        for name in p.tables:
            np.testing.assert_array_equal(ck.params.tables[name], p.tables[name])
            np.testing.assert_array_equal(ck.state.m[name], s.m[name])
            np.testing.assert_array_equal(ck.state.v[name], s.v[name])
        assert ck.step == s.step == 1
        assert ck.seed == 7
        assert ck.config_digest == "deadbeef"
        assert ck.substitution_trained
        np.testing.assert_array_equal(ck.virt_to_real, vmap)
        assert (ck.state.lr, ck.state.beta1, ck.state.beta2, ck.state.eps) == \
            (0.002, 0.9, 0.999, 1e-8)

    def test_truncated_payload_rejected(self, tmp_path):
        p, s = self.make()
        path = tmp_path / "b.ckpt"
        save_checkpoint(p, s, "-", path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(CheckpointError, match="payload length mismatch"):
            load_checkpoint(path)

    def test_model_kind_mismatch_rejected(self, tmp_path):
        p, s = self.make(kind="transe")
        path = tmp_path / "c.ckpt"
        save_checkpoint(p, s, "-", path)
        with pytest.raises(CheckpointError, match="model kind mismatch"):
            load_checkpoint(path, expect_model="rotate")

    def test_not_a_checkpoint(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"hello world")
        with pytest.raises(CheckpointError, match="not a checkpoint"):
            load_checkpoint(path)

    def test_options_round_trip(self, tmp_path):
        p = init_params("transe", 4, 2, 3, margin=9.0, seed=0,
                        options={"transe_norm": "l2"})
        s = OptimizerState.for_params(p, lr=0.01)
        path = tmp_path / "d.ckpt"
        save_checkpoint(p, s, "-", path)
        ck = load_checkpoint(path)
        assert ck.params.options == {"transe_norm": "l2"}
