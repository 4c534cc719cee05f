import numpy as np
import pytest

from eans.params import MODEL_KINDS, init_params
from eans.scoring import (candidate_scores, score, score_grad, scores_batch,
                          substitution_score)


def make_params(kind, n_entities=7, n_relations=3, dim=6, seed=0, **kw):
    return init_params(kind, n_entities, n_relations, dim, margin=9.0, seed=seed,
                       dtype=np.float64, **kw)


def fd_grads(params, triple, step=1e-5):
    """Central-difference gradients for every row the score touches."""
    analytic = score_grad(params, triple)
    numeric = {}
    for (table, row) in analytic.grads:
        arr = params.tables[table]
        g = np.zeros(arr.shape[1])
        for j in range(arr.shape[1]):
            keep = arr[row, j]
            arr[row, j] = keep + step
            up = score(params, triple)
            arr[row, j] = keep - step
            down = score(params, triple)
            arr[row, j] = keep
            g[j] = (up - down) / (2 * step)
        numeric[(table, row)] = g
    return analytic, numeric


def assert_grads_close(analytic, numeric, rtol=1e-4):
    for key, num in numeric.items():
        ana = analytic.grads[key]
        scale = np.maximum(1.0, np.maximum(np.abs(ana), np.abs(num)))
        np.testing.assert_array_less(np.abs(ana - num) / scale, rtol,
                                     err_msg=f"row {key}")


class TestWorkedExamples:
    def test_transe_exact_translation(self):
        p = make_params("transe", dim=2)
        p.tables["ent"][0] = [1, 2]
        p.tables["rel"][0] = [0, 1]
        p.tables["ent"][1] = [1, 3]
        assert score(p, (0, 0, 1)) == 0.0

    def test_transe_l1_subgradient_zero_at_kink(self):
        p = make_params("transe", dim=2)
        p.tables["ent"][0] = [1, 2]
        p.tables["rel"][0] = [0, 1]
        p.tables["ent"][1] = [1, 3]
        sg = score_grad(p, (0, 0, 1))
        np.testing.assert_array_equal(sg.grads[("ent", 0)], [0, 0])

    def test_distmult_direct_product(self):
        p = make_params("distmult", dim=2)
        p.tables["ent"][0] = [1, 1]
        p.tables["rel"][0] = [1, 1]
        assert score(p, (0, 0, 0)) == -2.0
        sg = score_grad(p, (0, 0, 0))
        # h == t here, so the ent row accumulates both slots' partials
        np.testing.assert_array_equal(sg.grads[("ent", 0)], [-2, -2])

    def test_distmult_head_grad_alone(self):
        p = make_params("distmult", dim=2)
        p.tables["ent"][0] = [1, 1]
        p.tables["ent"][1] = [1, 1]
        p.tables["rel"][0] = [1, 1]
        sg = score_grad(p, (0, 0, 1))
        np.testing.assert_array_equal(sg.grads[("ent", 0)], [-1, -1])

    def test_rotate_half_turn(self):
        p = make_params("rotate", dim=1)
        p.tables["ent_re"][0] = [1.0]
        p.tables["ent_im"][0] = [0.0]
        p.tables["rel_phase"][0] = [np.pi]
        p.tables["ent_re"][1] = [-1.0]
        p.tables["ent_im"][1] = [0.0]
        assert abs(score(p, (0, 0, 1))) < 1e-12

    def test_transd_orthogonal_transfer(self):
        p = make_params("transd", dim=2)
        p.tables["ent"][0] = [1, 0]
        p.tables["ent_p"][0] = [0, 1]   # w_h . h = 0: projection term vanishes
        p.tables["rel"][0] = [0, 0]
        p.tables["rel_p"][0] = [1, 0]
        p.tables["ent"][1] = [1, 0]
        p.tables["ent_p"][1] = [0, 1]
        assert score(p, (0, 0, 1)) == 0.0


class TestSubstitutionScore:
    def test_identical_entities_zero_translation(self):
        p = make_params("transe", dim=3)
        p.tables["rel"][p.r_sub] = 0.0
        assert substitution_score(p, 4, 4) == 0.0

    def test_distmult_direct(self):
        p = make_params("distmult", dim=2)
        p.tables["ent"][1] = [1, 1]
        p.tables["ent"][2] = [1, 1]
        p.tables["rel"][p.r_sub] = [1, 1]
        assert substitution_score(p, 1, 2) == -2.0

    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_matches_explicit_relation_index(self, kind):
        p = make_params(kind)
        rng = np.random.default_rng(3)
        for _ in range(100):
            a, b = rng.integers(0, p.n_entities, 2)
            assert substitution_score(p, int(a), int(b)) == \
                score(p, (int(a), p.n_relations, int(b)))


class TestGradientsAgainstFiniteDifferences:
    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_random_triples(self, kind):
        p = make_params(kind, seed=11)
        rng = np.random.default_rng(7)
        for _ in range(25):
            h, t = rng.integers(0, p.n_entities, 2)
            r = rng.integers(0, p.n_relations + 1)  # substitution row included
            analytic, numeric = fd_grads(p, (int(h), int(r), int(t)))
            assert_grads_close(analytic, numeric)

    def test_transe_l2_option(self):
        p = make_params("transe", options={"transe_norm": "l2"})
        analytic, numeric = fd_grads(p, (0, 1, 3))
        assert_grads_close(analytic, numeric)

    def test_value_matches_score(self):
        for kind in MODEL_KINDS:
            p = make_params(kind, seed=2)
            sg = score_grad(p, (1, 0, 2))
            assert sg.value == score(p, (1, 0, 2))

    def test_grads_cover_exactly_touched_rows(self):
        p = make_params("transd")
        sg = score_grad(p, (2, 1, 5))
        assert set(sg.grads) == {("ent", 2), ("ent", 5), ("ent_p", 2), ("ent_p", 5),
                                 ("rel", 1), ("rel_p", 1)}


class TestModelProperties:
    def test_rotate_phase_2pi_invariance(self):
        p = make_params("rotate", seed=5)
        f0 = score(p, (0, 1, 2))
        p.tables["rel_phase"][1, 0] += 2 * np.pi
        f1 = score(p, (0, 1, 2))
        assert abs(f0 - f1) < 1e-9

    def test_complex_reduces_to_distmult(self):
        pc = make_params("complex", seed=8)
        pc.tables["ent_im"][:] = 0.0
        pc.tables["rel_im"][:] = 0.0
        pd = make_params("distmult", seed=9)
        pd.tables["ent"] = pc.tables["ent_re"].copy()
        pd.tables["rel"] = pc.tables["rel_re"].copy()
        for triple in [(0, 0, 1), (3, 2, 4), (6, 1, 6)]:
            assert score(pc, triple) == score(pd, triple)

    def test_distmult_symmetry(self):
        p = make_params("distmult", seed=10)
        rng = np.random.default_rng(1)
        for _ in range(50):
            h, t = rng.integers(0, p.n_entities, 2)
            r = rng.integers(0, p.n_relations)
            assert score(p, (h, r, t)) == score(p, (t, r, h))


class TestBatchPaths:
    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_batch_matches_scalar(self, kind):
        p = make_params(kind, seed=12)
        rng = np.random.default_rng(4)
        h = rng.integers(0, p.n_entities, 40)
        r = rng.integers(0, p.n_relations + 1, 40)
        t = rng.integers(0, p.n_entities, 40)
        batch = scores_batch(p, h, r, t)
        for i in range(40):
            assert batch[i] == score(p, (h[i], r[i], t[i]))

    @pytest.mark.parametrize("kind", MODEL_KINDS)
    def test_candidate_scores_match_scalar(self, kind):
        p = make_params(kind, seed=13)
        tail_scores = candidate_scores(p, "tail", 2, 1)
        head_scores = candidate_scores(p, "head", 2, 1)
        for c in range(p.n_entities):
            assert tail_scores[c] == score(p, (2, 1, c))
            assert head_scores[c] == score(p, (c, 1, 2))
