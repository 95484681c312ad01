import math

import numpy as np
import pytest

from marlene.br import BRMarlene, NotRegisteredError
from marlene.brpw import (
    MAX_PAIRWISE_LABELS,
    NORMALIZED,
    RAW_SUM,
    BRPWMarlene,
    ScalabilityError,
    ordered_pairs,
)
from marlene.stream import TARGET, StreamId, make_instance
from marlene.weighting import LabelIndicators

from oracles import FixedFactory, literal_brpw, literal_scores, micro_stream, replay

S1 = StreamId.source(1)


def _event(x, y, stream=TARGET, t=0):
    return stream, make_instance(x, y, stream, t)


class RecordingModel:
    """Constant-probability model that logs every input it sees."""

    def __init__(self, log, p_pos=0.5):
        self.log, self.p_pos, self.n_seen = log, p_pos, 0.0

    def learn(self, x, y, k=1):
        self.log.append(("learn", tuple(x), y))

    def predict_proba(self, x):
        self.log.append(("predict", tuple(x)))
        return 1.0 - self.p_pos, self.p_pos


class TestMembership:
    def test_first_event(self, nb):
        ens = BRPWMarlene(nb)
        ens.observe(_event([0.0, 1.0], [1, 0, 1]))
        assert len(ens.br.members) == 3 and len(ens.pw.members) == 6
        assert [m.origin.unit for m in ens.pw.members] == ordered_pairs(3)

    def test_fourteen_labels(self, nb):
        ens = BRPWMarlene(nb)
        ens.observe(_event([0.0], [0] * 14))
        assert (len(ens.br.members), len(ens.pw.members)) == (14, 182)
        assert len(ens.members) == 196

    def test_guard(self, nb):
        n = MAX_PAIRWISE_LABELS + 1
        with pytest.raises(ScalabilityError):
            BRPWMarlene(nb).observe(_event([0.0], [0] * n))
        ens = BRPWMarlene(nb, force=True)
        ens.register_stream(TARGET, n, n_features=1)
        assert len(ens.pw.members) == n * (n - 1)
        # sources are not guarded
        BRPWMarlene(nb).register_stream(S1, n, n_features=1)

    def test_bad_combine(self):
        with pytest.raises(ValueError):
            BRPWMarlene(combine="product")

    def test_br_half_is_plain_br(self, touchy):
        events = micro_stream(np.random.default_rng(4), n_target=120)
        a, b = BRPWMarlene(drift=touchy, seed=8), BRMarlene(drift=touchy, seed=8)
        for ev in events:
            a.observe(ev)
            b.observe(ev)
        np.testing.assert_array_equal(a.br.table.data, b.table.data)
        assert a.br.drift_log == b.drift_log
        x = events[-1][1].x
        np.testing.assert_array_equal(a.br.predict_scores(x), b.predict_scores(x))


class SentinelModel:
    """BR members answer 0.7; PW members 0.9 when the appended label is 1
    and 0.2 when it is 0."""

    n_seen = 0.0

    def __init__(self, binary_mask=None):
        self.pairwise = binary_mask is not None and len(binary_mask) == 2

    def learn(self, x, y, k=1):
        pass

    def predict_proba(self, x):
        p = (0.9 if x[-1] == 1.0 else 0.2) if self.pairwise else 0.7
        return 1.0 - p, p


def _set(table, row, col, alpha):
    """Perfectly reliable cell (calibration is the identity) with weight ``alpha``."""
    sc, sw = {1.0: (1.0, 0.0), 0.5: (1.0, 1.0), 0.0: (0.0, 1.0)}[alpha]
    table.set(row, col, LabelIndicators(tp=5, tn=5, n_pos=5, n_neg=5, sc=sc, sw=sw))


def _own_only(ens):
    """BR weights: each member counts only on its own label."""
    for row, m in enumerate(ens.members):
        for col, q in enumerate(ens.target_units):
            _set(ens.table, row, col, 1.0 if m.origin.unit == q else 0.0)


class TestAugmentedInput:
    def test_training_appends_true_label(self):
        ens = BRPWMarlene(lambda mask: RecordingModel([], 0.9), seed=0)
        rng = np.random.default_rng(0)
        events = [_event([float(t)], rng.integers(0, 2, 3), t=t) for t in range(30)]
        for ev in events:
            ens.observe(ev)
        ys = {inst.x[0]: inst.y for _, inst in events}
        n = 0
        for m in ens.pw.members:
            a, b = m.origin.unit
            for kind, x, *label in m.model.log:
                if kind == "learn":
                    n += 1
                    y = ys[x[0]]
                    assert x[1] == y[a] and label[0] == y[b]
        assert n > 0

    def test_prediction_conditions_on_br_labels(self):
        ens = BRPWMarlene(SentinelModel, combine=RAW_SUM)
        ens.register_stream(TARGET, 2, n_features=1)
        for e in (ens.br, ens.pw):
            for row in range(len(e.members)):
                for col in range(len(e.target_units)):
                    _set(e.table, row, col, 0.5)
        scores, y_br = ens.predict_scores(np.zeros(1))
        assert y_br.tolist() == [1, 1]
        # BR: 2 x 0.5 x (0.3, 0.7); PW conditioned on 1: 2 x 0.5 x (0.1, 0.9)
        np.testing.assert_allclose(scores, [[0.4, 1.6], [0.4, 1.6]])


class TestPairScores:
    def test_untrained_symmetric(self):
        ens = BRPWMarlene()
        ens.register_stream(TARGET, 3, n_features=2)
        for pair in ordered_pairs(3):
            s = ens.pw_pair_score(np.zeros(2), 1, pair)
            np.testing.assert_allclose(s, [0.25 * 6, 0.25 * 6])

    def test_single_member(self):
        ens = BRPWMarlene(FixedFactory([0.5, 0.5, 0.9, 0.5]))
        ens.register_stream(TARGET, 2, n_features=1)
        perfect = LabelIndicators(tp=5, tn=5, n_pos=5, n_neg=5, sc=1.0, sw=0.0)
        col = ens.pw.target_col[(0, 1)]
        ens.pw.table.set(0, col, perfect)
        ens.pw.table.set(1, col, LabelIndicators(sw=1.0))
        np.testing.assert_allclose(ens.pw_pair_score(np.zeros(1), 0, (0, 1)), [0.1, 0.9])

    def test_unknown_pair(self):
        ens = BRPWMarlene()
        ens.register_stream(TARGET, 2, n_features=1)
        with pytest.raises(KeyError):
            ens.pw_pair_score(np.zeros(1), 0, (0, 0))

    def test_unregistered(self):
        with pytest.raises(NotRegisteredError):
            BRPWMarlene().predict(np.zeros(1))


class TestPredict:
    def test_single_label_is_br(self, nb):
        ens = BRPWMarlene(nb, seed=1)
        rng = np.random.default_rng(0)
        for t in range(40):
            x = rng.normal(size=2)
            ens.observe(_event(x, [int(x[0] > 0)], t=t))
        x = rng.normal(size=2)
        np.testing.assert_array_equal(ens.predict(x)[0], ens.br.predict(x)[0])
        assert math.isnan(ens.aswr_pw())

    def test_symmetric_pw_leaves_br_decision(self):
        ens = BRPWMarlene(FixedFactory([0.8, 0.3, 0.6]))
        ens.register_stream(TARGET, 3, n_features=1)
        _own_only(ens.br)
        assert ens.br.predict(np.zeros(1))[1].tolist() == [1, 0, 1]
        _, y_hat = ens.predict(np.zeros(1))
        assert y_hat.tolist() == [1, 0, 1]

    @pytest.mark.parametrize("combine", [NORMALIZED, RAW_SUM])
    @pytest.mark.parametrize("seed", range(6))
    def test_votes_match_literal_combination(self, seed, combine, nb, touchy):
        rng = np.random.default_rng(100 + seed)
        events = micro_stream(rng, n_labels=int(rng.integers(2, 5)))
        ens = BRPWMarlene(nb, touchy, seed=seed, combine=combine)
        tb, tp = replay([ens.br, ens.pw], events, driver=ens)
        for e, tr in ((ens.br, tb), (ens.pw, tp)):
            SC, SW = literal_scores(tr)
            np.testing.assert_allclose(e.table.sc, SC, rtol=0, atol=1e-9)
            np.testing.assert_allclose(e.table.sw, SW, rtol=0, atol=1e-9)
        x = rng.normal(size=len(events[0][1].x))
        want, y_br = literal_brpw(ens, tb, tp, x, combine)
        got, got_br = ens.predict_scores(x)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)
        assert got_br.tolist() == y_br.tolist()
        _, y_hat = ens.predict(x)
        assert y_hat.tolist() == (want[:, 1] > want[:, 0]).astype(int).tolist()

    @pytest.mark.parametrize("combine, want", [
        (RAW_SUM, [[0.45, 1.55], [1.3, 1.2]]),
        (NORMALIZED, [[0.45, 1.55], [0.8 + 1 / 3, 0.2 + 2 / 3]]),
    ])
    def test_hand_built(self, combine, want):
        # BR members 0.9 and 0.2 (own label only); PW (0, 1) member 0.7, PW (1, 0) member 0.6
        ens = BRPWMarlene(FixedFactory([0.9, 0.2, 0.7, 0.6]), combine=combine)
        ens.register_stream(TARGET, 2, n_features=1)
        _own_only(ens.br)
        c01, c10 = ens.pw.target_col[(0, 1)], ens.pw.target_col[(1, 0)]
        _set(ens.pw.table, 0, c01, 1.0)
        _set(ens.pw.table, 1, c01, 0.5)
        _set(ens.pw.table, 0, c10, 0.5)
        _set(ens.pw.table, 1, c10, 0.5)
        # pair (0, 1): (0.3 + 0.2, 0.7 + 0.3); pair (1, 0): (0.35, 0.65)
        scores, y_br = ens.predict_scores(np.zeros(1))
        assert y_br.tolist() == [1, 0]
        np.testing.assert_allclose(scores, want, rtol=1e-12)
        assert ens.predict(np.zeros(1))[1].tolist() == [1, 0]


class TestASWR:
    def test_fresh_pairs(self, nb):
        ens = BRPWMarlene(nb)
        ens.observe(_event([0.0], [1, 0]))
        # per pair column: one own member and one other, equal weights
        assert ens.aswr_pw() == pytest.approx(0.5)
        assert ens.aswr() == pytest.approx(0.5)

    def test_own_and_source_extremes(self):
        ens = BRPWMarlene()
        ens.register_stream(TARGET, 2, n_features=1)
        for col, pair in enumerate(ens.pw.target_units):
            for row, m in enumerate(ens.pw.members):
                own = m.origin.unit == pair
                ens.pw.table.set(row, col, LabelIndicators(sc=1.0 if own else 0.0, sw=0.0 if own else 1.0))
        assert ens.aswr_pw() == 0.0
        for col, pair in enumerate(ens.pw.target_units):
            for row, m in enumerate(ens.pw.members):
                own = m.origin.unit == pair
                ens.pw.table.set(row, col, LabelIndicators(sc=0.0 if own else 1.0, sw=1.0 if own else 0.0))
        assert ens.aswr_pw() == 1.0


def test_checkpoint_round_trip(tmp_path, nb):
    from marlene.br import load_checkpoint

    events = micro_stream(np.random.default_rng(6), n_target=60)
    ens = BRPWMarlene(nb, seed=3)
    for ev in events[: len(events) // 2]:
        ens.observe(ev)
    ens.save(tmp_path / "m.pkl")
    back = load_checkpoint(tmp_path / "m.pkl")
    for ev in events[len(events) // 2:]:
        ens.observe(ev)
        back.observe(ev)
    x = events[-1][1].x
    np.testing.assert_array_equal(ens.predict(x)[0], back.predict(x)[0])
