"""Feature blocks, match scoring, diagonal boost, and tuple assembly."""

import logging
import math

import numpy as np
import pytest
from scipy.special import softmax

from tupex.allocator import (
    DEFAULT_LAMBDA,
    AllocFlags,
    AllocParams,
    EntityRep,
    MatcherTrainConfig,
    MatchMatrix,
    apply_diagonal_boost,
    assemble_tuples,
    correlation,
    entity_repr,
    init_alloc_params,
    inter_attention,
    intra_attention,
    match_features,
    match_score,
    matching_grad,
    matching_loss,
    score_matrix,
    train_matcher,
)
from tupex.corpus import EntitySpan, EntityType
from tupex.embedding import EmbeddingRecord, TokenizedSentence

MAT = EntityType.MATERIAL
PROP = EntityType.PROPERTY
PV = EntityType.PROPERTY_VALUE
COND = EntityType.CONDITION
CV = EntityType.CONDITION_VALUE

_NEXT = [0]


def span(etype=MAT, width=4):
    # Unique offsets so spans stay distinguishable.
    start = _NEXT[0]
    _NEXT[0] += width + 1
    return EntitySpan(etype, start, start + width, "x" * width)


def rep(vec, etype=MAT):
    return EntityRep(span(etype), np.asarray(vec, dtype=np.float64))


def uniform_params(dim, value=0.0, bias=0.0, lam=DEFAULT_LAMBDA, flags=AllocFlags()):
    return AllocParams(dim, np.full(6 * dim, value), bias, lam, flags)


class TestFeatures:
    def test_entity_repr_sums_token_vectors(self):
        tok = TokenizedSentence("s", ((0, 4), (5, 7), (8, 12)))
        vecs = np.array([[1.0, 2.0], [10.0, 20.0], [100.0, 200.0]], dtype=np.float32)
        emb = EmbeddingRecord("s", vecs)
        sp = EntitySpan(MAT, 0, 7, "x" * 7)
        out = entity_repr(sp, tok, emb)
        np.testing.assert_allclose(out.vec, [11.0, 22.0])

    def test_correlation_scaled_dot(self):
        out = correlation([rep([1.0, 2.0])], [rep([3.0, -1.0])])
        assert out.shape == (1, 1)
        assert out[0, 0] == pytest.approx(1.0 / math.sqrt(2))

    def test_inter_attention_unnormalized(self):
        anchors = [rep([1.0, 0.0]), rep([0.0, 1.0])]
        others = [rep([2.0, 2.0])]
        s = correlation(anchors, others)
        a_o2a, a_a2o = inter_attention(s, anchors, others)
        np.testing.assert_allclose(a_o2a, s @ np.array([[2.0, 2.0]]))
        np.testing.assert_allclose(a_a2o, s.T @ np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_intra_attention_matches_softmax_oracle(self):
        rng = np.random.default_rng(0)
        h = rng.normal(size=(4, 8))
        reps = [rep(v) for v in h]
        expected = softmax(h @ h.T / math.sqrt(8), axis=1) @ h
        np.testing.assert_allclose(intra_attention(reps), expected, atol=1e-12)

    def test_intra_attention_single_entity_is_itself(self):
        np.testing.assert_allclose(intra_attention([rep([3.0, -1.0])]), [[3.0, -1.0]])

    def test_block_layout(self):
        rng = np.random.default_rng(1)
        anchors = [rep(v) for v in rng.normal(size=(2, 4))]
        others = [rep(v) for v in rng.normal(size=(3, 4))]
        feats = match_features(anchors, others, AllocFlags())
        assert feats.shape == (2, 3, 24)
        for i in range(2):
            for j in range(3):
                np.testing.assert_allclose(feats[i, j, 0:4], anchors[i].vec)
                np.testing.assert_allclose(feats[i, j, 4:8], others[j].vec)
        # Anchor-side blocks are column-constant, candidate-side row-constant.
        np.testing.assert_allclose(feats[0, 0, 8:12], feats[0, 2, 8:12])
        np.testing.assert_allclose(feats[0, 0, 12:16], feats[1, 0, 12:16])
        np.testing.assert_allclose(feats[1, 0, 16:20], feats[1, 2, 16:20])
        np.testing.assert_allclose(feats[0, 1, 20:24], feats[1, 1, 20:24])

    def test_disabled_blocks_are_zero(self):
        rng = np.random.default_rng(2)
        anchors = [rep(v) for v in rng.normal(size=(2, 4))]
        others = [rep(v) for v in rng.normal(size=(2, 4))]
        no_inter = match_features(anchors, others, AllocFlags(enable_inter=False))
        assert not no_inter[:, :, 8:16].any()
        assert no_inter[:, :, 16:24].any()
        no_intra = match_features(anchors, others, AllocFlags(enable_intra=False))
        assert not no_intra[:, :, 16:24].any()
        assert no_intra[:, :, 8:16].any()

    def test_empty_side_raises(self):
        with pytest.raises(ValueError, match="each side"):
            match_features([], [rep([1.0])], AllocFlags())


class TestScoring:
    def test_hand_example(self):
        # Six one-dimensional blocks of 0.5 with unit weights: z = 3.
        params = AllocParams(1, np.ones(6), 0.0)
        half = np.array([0.5])
        z, p = match_score(params, half, half, half, half, half, half)
        assert z == pytest.approx(3.0)
        assert p == pytest.approx(1.0 / (1.0 + math.exp(-3.0)))

    def test_match_score_respects_flags(self):
        params = uniform_params(1, value=1.0, flags=AllocFlags(enable_inter=False))
        half = np.array([0.5])
        z, _ = match_score(params, half, half, half, half, half, half)
        assert z == pytest.approx(2.0)  # inter blocks zeroed

    def test_score_matrix_consistent_with_match_score(self):
        rng = np.random.default_rng(3)
        anchors = [rep(v) for v in rng.normal(size=(2, 4))]
        others = [rep(v) for v in rng.normal(size=(3, 4))]
        params = AllocParams(4, rng.normal(size=24), 0.3)
        m = score_matrix(params, anchors, others)
        feats = match_features(anchors, others, AllocFlags())
        i, j = 1, 2
        z, p = match_score(
            params,
            feats[i, j, 0:4], feats[i, j, 4:8], feats[i, j, 8:12],
            feats[i, j, 12:16], feats[i, j, 16:20], feats[i, j, 20:24],
        )
        assert m.scores[i, j] == pytest.approx(z)
        assert m.probs[i, j] == pytest.approx(p)
        assert not m.boosted

    def test_additive_structure(self):
        # Every block depends on only one side, so z decomposes as f(i) + g(j):
        # z[i, j] - z[i, 0] is the same for every row i.
        rng = np.random.default_rng(4)
        anchors = [rep(v) for v in rng.normal(size=(3, 8))]
        others = [rep(v) for v in rng.normal(size=(3, 8))]
        params = AllocParams(8, rng.normal(size=48), 0.0)
        z = score_matrix(params, anchors, others).scores
        deltas = z - z[:, :1]
        np.testing.assert_allclose(deltas[0], deltas[1], atol=1e-9)
        np.testing.assert_allclose(deltas[0], deltas[2], atol=1e-9)

    def test_column_permutation_equivariance(self):
        rng = np.random.default_rng(5)
        anchors = [rep(v) for v in rng.normal(size=(2, 4))]
        others = [rep(v) for v in rng.normal(size=(4, 4))]
        params = AllocParams(4, rng.normal(size=24), 0.1)
        base = score_matrix(params, anchors, others).probs
        perm = [2, 0, 3, 1]
        permuted = score_matrix(params, anchors, [others[j] for j in perm]).probs
        np.testing.assert_allclose(permuted, base[:, perm], atol=1e-12)


class TestBoost:
    def matrix(self, probs):
        probs = np.asarray(probs, dtype=np.float64)
        return MatchMatrix(np.zeros_like(probs), probs)

    def test_identity_when_lam_one(self):
        m = apply_diagonal_boost(self.matrix([[0.2, 0.8], [0.6, 0.4]]), 1.0)
        np.testing.assert_allclose(m.probs, [[0.2, 0.8], [0.6, 0.4]])
        assert m.boosted

    def test_scales_only_diagonal(self):
        m = apply_diagonal_boost(self.matrix([[0.5, 0.5], [0.5, 0.5]]), 1.2)
        np.testing.assert_allclose(m.probs, [[0.6, 0.5], [0.5, 0.6]])

    def test_non_square_passes_through(self):
        m = self.matrix([[0.5, 0.5, 0.5]])
        out = apply_diagonal_boost(m, 1.5)
        assert out is m
        assert not out.boosted

    def test_clamped_below_one(self):
        m = apply_diagonal_boost(self.matrix([[0.9]]), 100.0)
        assert m.probs[0, 0] == pytest.approx(1.0 - 1e-12)

    def test_rejects_lam_below_one(self):
        with pytest.raises(ValueError, match=">= 1"):
            apply_diagonal_boost(self.matrix([[0.5]]), 0.9)

    def test_uniform_square_resolves_to_diagonal(self):
        probs = np.full((3, 3), 0.5)
        m = apply_diagonal_boost(self.matrix(probs), DEFAULT_LAMBDA)
        assert [int(np.argmax(row)) for row in m.probs] == [0, 1, 2]


class TestLossAndGrad:
    def instance(self, rng, n=2, m=3, dim=4):
        feats = rng.normal(size=(n, m, 6 * dim))
        gold = (rng.random((n, m)) < 0.4).astype(np.float64)
        return feats, gold

    def test_zero_params_loss_is_log_two(self):
        rng = np.random.default_rng(0)
        batch = [self.instance(rng), self.instance(rng, 3, 1)]
        assert matching_loss(uniform_params(4), batch) == pytest.approx(math.log(2))

    def test_instance_mean(self):
        rng = np.random.default_rng(1)
        a, b = self.instance(rng), self.instance(rng, 1, 5)
        params = AllocParams(4, rng.normal(size=24), 0.2)
        lone = matching_loss(params, [a])
        ltwo = matching_loss(params, [b])
        assert matching_loss(params, [a, b]) == pytest.approx((lone + ltwo) / 2)

    def test_empty_batch_raises(self):
        with pytest.raises(ValueError, match="empty"):
            matching_loss(uniform_params(4), [])

    def test_grad_matches_central_differences(self):
        rng = np.random.default_rng(2)
        batch = [self.instance(rng), self.instance(rng, 1, 4), self.instance(rng, 3, 3)]
        params = AllocParams(4, rng.normal(size=24) * 0.3, 0.1)
        gu, gb = matching_grad(params, batch)
        eps = 1e-6
        for k in range(0, 24, 5):
            params.u[k] += eps
            up = matching_loss(params, batch)
            params.u[k] -= 2 * eps
            down = matching_loss(params, batch)
            params.u[k] += eps
            assert (up - down) / (2 * eps) == pytest.approx(gu[k], rel=1e-5, abs=1e-9)
        params.bias += eps
        up = matching_loss(params, batch)
        params.bias -= 2 * eps
        down = matching_loss(params, batch)
        params.bias += eps
        assert (up - down) / (2 * eps) == pytest.approx(gb, rel=1e-5, abs=1e-9)

    def test_one_step_decreases_loss(self):
        rng = np.random.default_rng(3)
        batch = [self.instance(rng) for _ in range(4)]
        for seed in range(20):
            params = init_alloc_params(seed, 4)
            before = matching_loss(params, batch)
            gu, gb = matching_grad(params, batch)
            params.u -= 1e-3 * gu
            params.bias -= 1e-3 * gb
            assert matching_loss(params, batch) < before


class TestTraining:
    def batch(self, rng, n=6):
        out = []
        for _ in range(n):
            feats = rng.normal(size=(2, 2, 24))
            gold = np.eye(2)
            out.append((feats, gold))
        return out

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        batch = self.batch(rng)
        cfg = MatcherTrainConfig(lr=0.1, epochs=25)
        p1, log1 = train_matcher(0, batch, batch, cfg, 4)
        p2, log2 = train_matcher(0, batch, batch, cfg, 4)
        np.testing.assert_array_equal(p1.u, p2.u)
        assert p1.bias == p2.bias
        assert log1 == log2

    def test_returns_best_validation_params(self):
        rng = np.random.default_rng(5)
        train = self.batch(rng)
        val = self.batch(rng, 2)
        params, log = train_matcher(1, train, val, MatcherTrainConfig(lr=0.1, epochs=40), 4)
        assert matching_loss(params, val) == pytest.approx(
            min(e.val_loss for e in log), rel=1e-12
        )

    def test_loss_decreases(self):
        rng = np.random.default_rng(6)
        batch = self.batch(rng)
        _, log = train_matcher(0, batch, batch, MatcherTrainConfig(lr=0.1, epochs=30), 4)
        assert log[-1].train_loss < log[0].train_loss

    def test_all_negative_training_data_rejected(self):
        rng = np.random.default_rng(7)
        batch = [(rng.normal(size=(2, 2, 24)), np.zeros((2, 2))) for _ in range(3)]
        with pytest.raises(ValueError, match="positive"):
            train_matcher(0, batch, batch, MatcherTrainConfig(), 4)

    def test_empty_split_rejected(self):
        rng = np.random.default_rng(8)
        batch = self.batch(rng, 2)
        with pytest.raises(ValueError, match="non-empty"):
            train_matcher(0, batch, [], MatcherTrainConfig(), 4)

    def test_init_bounds(self):
        p = init_alloc_params(0, 32)
        bound = 1.0 / math.sqrt(192)
        assert np.all(np.abs(p.u) <= bound)
        assert abs(p.bias) <= bound

    def test_lam_validation(self):
        with pytest.raises(ValueError, match=">= 1"):
            AllocParams(1, np.zeros(6), 0.0, lam=0.5)


def matrix_for(probs):
    probs = np.asarray(probs, dtype=np.float64)
    return MatchMatrix(np.zeros_like(probs), probs)


class TestAssembly:
    def entities(self, n_pv=2, n_mat=2, n_prop=1, n_cond=0, n_cv=0):
        out = {}
        for etype, count in (
            (MAT, n_mat), (PROP, n_prop), (PV, n_pv), (COND, n_cond), (CV, n_cv),
        ):
            out[etype] = [span(etype) for _ in range(count)]
        return out

    def test_row_best_candidate_with_tie_to_lowest_index(self):
        ents = self.entities(n_pv=1, n_mat=3)
        matrices = {
            MAT: matrix_for([[0.4, 0.9, 0.9]]),
            PROP: matrix_for([[0.7]]),
        }
        out = assemble_tuples(ents, matrices, uniform_params(4))
        assert len(out) == 1
        assert out[0].record.material == ents[MAT][1]
        tie = {MAT: matrix_for([[0.5, 0.5, 0.5]]), PROP: matrix_for([[0.7]])}
        out = assemble_tuples(ents, tie, uniform_params(4))
        assert out[0].record.material == ents[MAT][0]

    def test_square_diagonal_after_boost(self):
        ents = self.entities(n_pv=3, n_mat=1, n_prop=3)
        prop_m = apply_diagonal_boost(matrix_for(np.full((3, 3), 0.5)), DEFAULT_LAMBDA)
        matrices = {
            MAT: matrix_for(np.full((3, 1), 0.8)),
            PROP: prop_m,
        }
        out = assemble_tuples(ents, matrices, uniform_params(4))
        assert [t.record.property for t in out] == ents[PROP]
        assert [t.record.property_value for t in out] == ents[PV]

    def test_missing_mandatory_type_suppresses(self, caplog):
        ents = self.entities(n_pv=2, n_mat=0)
        matrices = {PROP: matrix_for(np.full((2, 1), 0.9))}
        with caplog.at_level(logging.WARNING):
            out = assemble_tuples(ents, matrices, uniform_params(4))
        assert out == []
        assert "no material" in caplog.text

    def test_missing_optional_type_leaves_none(self):
        ents = self.entities(n_pv=1)
        matrices = {
            MAT: matrix_for([[0.9, 0.1]]),
            PROP: matrix_for([[0.8]]),
        }
        out = assemble_tuples(ents, matrices, uniform_params(4))
        assert out[0].record.condition is None
        assert out[0].record.condition_value is None

    def test_condition_value_without_condition_dropped(self, caplog):
        ents = self.entities(n_pv=1, n_cv=1)
        matrices = {
            MAT: matrix_for([[0.9, 0.1]]),
            PROP: matrix_for([[0.8]]),
            CV: matrix_for([[0.95]]),
        }
        with caplog.at_level(logging.WARNING):
            out = assemble_tuples(ents, matrices, uniform_params(4))
        assert out[0].record.condition_value is None
        assert "condition value without" in caplog.text

    def test_score_is_mean_of_chosen_probabilities(self):
        ents = self.entities(n_pv=1, n_mat=2, n_cond=1, n_cv=1)
        matrices = {
            MAT: matrix_for([[0.2, 0.6]]),
            PROP: matrix_for([[0.8]]),
            COND: matrix_for([[0.5]]),
            CV: matrix_for([[0.9]]),
        }
        out = assemble_tuples(ents, matrices, uniform_params(4))
        assert out[0].score == pytest.approx((0.6 + 0.8 + 0.5 + 0.9) / 4)

    def test_matrix_shape_mismatch_raises(self):
        ents = self.entities(n_pv=2, n_mat=2)
        matrices = {
            MAT: matrix_for([[0.5, 0.5]]),  # one row, two anchors
            PROP: matrix_for(np.full((2, 1), 0.5)),
        }
        with pytest.raises(ValueError, match="shape"):
            assemble_tuples(ents, matrices, uniform_params(4))

    def test_no_anchors_no_tuples(self):
        out = assemble_tuples(self.entities(n_pv=0), {}, uniform_params(4))
        assert out == []


class TestCartesian:
    def flags(self):
        return AllocFlags(enable_allocation=False)

    def params(self):
        return AllocParams(4, np.zeros(24), 0.0, flags=self.flags())

    def entities(self, **kw):
        return TestAssembly().entities(**kw)

    def test_full_product_counts(self):
        ents = self.entities(n_pv=2, n_mat=2, n_prop=1, n_cond=2, n_cv=2)
        out = assemble_tuples(ents, {}, self.params())
        assert len(out) == 2 * 2 * 1 * 2 * 2
        assert all(t.score == 1.0 for t in out)

    def test_optional_absent_slots_omitted(self):
        ents = self.entities(n_pv=2, n_mat=1)
        out = assemble_tuples(ents, {}, self.params())
        assert len(out) == 2
        assert all(t.record.condition is None for t in out)

    def test_missing_mandatory_gives_nothing(self):
        ents = self.entities(n_pv=1, n_prop=0)
        assert assemble_tuples(ents, {}, self.params()) == []

    def test_orphan_condition_values_dropped(self, caplog):
        ents = self.entities(n_pv=1, n_mat=1, n_cv=2)
        with caplog.at_level(logging.WARNING):
            out = assemble_tuples(ents, {}, self.params())
        assert len(out) == 1
        assert out[0].record.condition_value is None

    def test_superset_of_allocation_choices(self):
        # Any allocated tuple also appears in the product over the same entities.
        ents = self.entities(n_pv=2, n_mat=2, n_prop=2, n_cond=1, n_cv=1)
        matrices = {
            MAT: matrix_for([[0.9, 0.2], [0.3, 0.8]]),
            PROP: matrix_for([[0.6, 0.5], [0.1, 0.7]]),
            COND: matrix_for([[0.5], [0.5]]),
            CV: matrix_for([[0.5], [0.5]]),
        }
        allocated = assemble_tuples(ents, matrices, uniform_params(4))
        product = assemble_tuples(ents, {}, self.params())
        product_keys = {
            tuple(s and s.offsets for _, s in t.record.slots()) for t in product
        }
        for t in allocated:
            key = tuple(s and s.offsets for _, s in t.record.slots())
            assert key in product_keys
