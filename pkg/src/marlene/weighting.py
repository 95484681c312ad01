"""Imbalance-aware resampling and the difficulty-based sub-classifier weighting.

The array functions broadcast, so the same code scores one (member, label)
cell or the whole ``(members, target columns)`` grid at once.  Degenerate
denominators fall back to neutral values: correction factors ``(1, 1)`` until
both classes have been seen, PPV/NPV ``0.5``, weight ``0.5`` before any score
has accumulated, Poisson rate ``1`` when the class count is zero.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, astuple

import numpy as np


def poisson_rate(n_pos: float, n_neg: float, y: int) -> float:
    """Rate of the Poisson draw for one training example of class ``y``.

    ``max(n_pos, n_neg)`` divided by the count of the example's own class, so
    minority-class examples are presented more often.  The counts are expected
    to include the current example.
    """
    own = n_pos if y == 1 else n_neg
    if own <= 0:
        return 1.0
    return max(n_pos, n_neg) / own


def draw_training_count(rate: float, rng: np.random.Generator) -> int:
    if not rate > 0:
        raise ValueError(f"Poisson rate must be positive, got {rate}")
    return int(rng.poisson(rate))


def correction_factors(n_pos, n_neg):
    """``kappa+ = (n+ + n-) / (2 n+)``, ``kappa- = (n+ + n-) / (2 n-)``."""
    n_pos = np.asarray(n_pos, dtype=float)
    n_neg = np.asarray(n_neg, dtype=float)
    ok = (n_pos > 0) & (n_neg > 0)
    tot = n_pos + n_neg
    with np.errstate(divide="ignore", invalid="ignore"):
        kp = np.where(ok, tot / (2.0 * n_pos), 1.0)
        kn = np.where(ok, tot / (2.0 * n_neg), 1.0)
    if kp.ndim == 0:
        return float(kp), float(kn)
    return kp, kn


def predictive_values(tp, fp, tn, fn, n_pos, n_neg):
    """Class-balanced PPV and NPV; 0.5 wherever the denominator is zero."""
    kp, kn = correction_factors(n_pos, n_neg)
    a = np.asarray(tp) * kp
    b = np.asarray(fp) * kn
    c = np.asarray(tn) * kn
    d = np.asarray(fn) * kp
    with np.errstate(divide="ignore", invalid="ignore"):
        ppv = np.where(a + b > 0, a / (a + b), 0.5)
        npv = np.where(c + d > 0, c / (c + d), 0.5)
    if ppv.ndim == 0:
        return float(ppv), float(npv)
    return ppv, npv


def calibrate(p_pos, p_neg, ppv, npv):
    """Reliability-calibrated probabilities ``(p^+, p^-)``.

    ``p^+ = p+ PPV + p- (1 - NPV)`` and ``p^- = p- NPV + p+ (1 - PPV)``; they
    sum to ``p+ + p- = 1``.
    """
    hp = p_pos * ppv + p_neg * (1.0 - npv)
    hn = p_neg * npv + p_pos * (1.0 - ppv)
    return hp, hn


def difficulty(p_true, p_wrong=None):
    """Sum over members (axis 0) of the calibrated probability of the true
    class and of the wrong class: ``(lambda_SC, lambda_SW)``."""
    p_true = np.asarray(p_true, dtype=float)
    if p_true.shape[0] == 0:
        raise ValueError("difficulty of an empty ensemble is undefined")
    if p_wrong is None:
        p_wrong = 1.0 - p_true
    lsc, lsw = p_true.sum(axis=0), np.asarray(p_wrong).sum(axis=0)
    if lsc.ndim == 0:
        return float(lsc), float(lsw)
    return lsc, lsw


def score_increments(p_true, p_wrong, lam_sc, lam_sw):
    """Additions to SC and SW for one example.

    ``dSC = (lam_SW / lam_SC) * p_true / lam_SC`` and
    ``dSW = (lam_SW / lam_SC) * p_wrong / lam_SW`` (zero when ``lam_SW == 0``).
    Columns with ``lam_SC == 0`` get no update.
    """
    lam_sc = np.asarray(lam_sc, dtype=float)
    lam_sw = np.asarray(lam_sw, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(lam_sc > 0, lam_sw / lam_sc, 0.0)
        dsc = np.where(lam_sc > 0, ratio * p_true / lam_sc, 0.0)
        dsw = np.where((lam_sc > 0) & (lam_sw > 0), ratio * p_wrong / lam_sw, 0.0)
    return dsc, dsw


def alpha(sc, sw):
    """Sub-classifier weight ``SC / (SC + SW)``, 0.5 before any score."""
    sc = np.asarray(sc, dtype=float)
    sw = np.asarray(sw, dtype=float)
    tot = sc + sw
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(tot > 0, sc / tot, 0.5)
    return float(a) if a.ndim == 0 else a


@dataclass
class LabelIndicators:
    """Everything the weighting scheme tracks for one (member, target label)."""

    tp: float = 0.0
    fp: float = 0.0
    tn: float = 0.0
    fn: float = 0.0
    n_pos: float = 0.0
    n_neg: float = 0.0
    sc: float = 0.0
    sw: float = 0.0

    @property
    def alpha(self) -> float:
        return alpha(self.sc, self.sw)

    def predictive_values(self) -> tuple[float, float]:
        return predictive_values(self.tp, self.fp, self.tn, self.fn, self.n_pos, self.n_neg)


FIELDS = tuple(f.name for f in fields(LabelIndicators))
_FIELD_INDEX = {f: i for i, f in enumerate(FIELDS)}


def ppv_npv(ind: LabelIndicators) -> tuple[float, float]:
    return ind.predictive_values()


def update_scores(ind: LabelIndicators, p_true: float, lam_sc: float, lam_sw: float) -> LabelIndicators:
    """Return ``ind`` with SC/SW advanced by one example (the wrong-class
    probability is ``1 - p_true``)."""
    if not lam_sc > 0:
        raise ValueError("lambda_SC must be positive")
    if lam_sw < 0 or not 0.0 <= p_true <= 1.0:
        raise ValueError("need lambda_SW >= 0 and p_true in [0, 1]")
    dsc, dsw = score_increments(p_true, 1.0 - p_true, lam_sc, lam_sw)
    out = LabelIndicators(*astuple(ind))
    out.sc += float(dsc)
    out.sw += float(dsw)
    return out


class IndicatorTable:
    """Indicators of every (member, target column) cell as ``(M, J)`` arrays.

    PPV/NPV are cached between changes; code writing to ``data`` directly
    must call :meth:`touch` afterwards.
    """

    def __init__(self, n_cols: int, n_rows: int = 0):
        self.n_cols = n_cols
        # rows live in a buffer with spare capacity so growth is amortised
        self._buf = np.zeros((len(FIELDS), max(n_rows, 4), n_cols))
        self._rows = n_rows
        self._pv = None

    @property
    def data(self) -> np.ndarray:
        """``(fields, M, J)`` view of the live rows."""
        return self._buf[:, : self._rows]

    def __getattr__(self, name):
        # field views: table.tp, table.sc, ... (read-only use)
        if name in _FIELD_INDEX:
            return self.data[_FIELD_INDEX[name]]
        raise AttributeError(name)

    def touch(self) -> None:
        self._pv = None

    def predictive_values(self):
        """PPV and NPV of every cell, ``(M, J)`` each (cached)."""
        if self._pv is None:
            d = self.data
            tp, fp, tn, fn, n_pos, n_neg = d[0], d[1], d[2], d[3], d[4], d[5]
            ok = (n_pos > 0) & (n_neg > 0)
            tot = n_pos + n_neg
            kp = np.divide(tot, 2.0 * n_pos, out=np.ones_like(tot), where=ok)
            kn = np.divide(tot, 2.0 * n_neg, out=np.ones_like(tot), where=ok)
            a, b = tp * kp, fp * kn
            c, e = tn * kn, fn * kp
            ab, ce = a + b, c + e
            ppv = np.divide(a, ab, out=np.full_like(a, 0.5), where=ab > 0)
            npv = np.divide(c, ce, out=np.full_like(c, 0.5), where=ce > 0)
            self._pv = (ppv, npv)
        return self._pv

    def add_rows(self, n: int = 1) -> None:
        need = self._rows + n
        if need > self._buf.shape[1]:
            buf = np.zeros((len(FIELDS), max(need, 2 * self._buf.shape[1]), self.n_cols))
            buf[:, : self._rows] = self.data
            self._buf = buf
        else:
            self._buf[:, self._rows : need] = 0.0
        self._rows = need
        self._pv = None

    def delete_row(self, i: int) -> None:
        self._buf[:, i : self._rows - 1] = self._buf[:, i + 1 : self._rows]
        self._rows -= 1
        self._pv = None

    def reset_columns(self, cols) -> None:
        self.data[:, :, cols] = 0.0
        self._pv = None

    def get(self, row: int, col: int) -> LabelIndicators:
        return LabelIndicators(*(float(v) for v in self.data[:, row, col]))

    def set(self, row: int, col: int, ind: LabelIndicators) -> None:
        self.data[:, row, col] = astuple(ind)
        self._pv = None

    def alpha(self) -> np.ndarray:
        return alpha(self.sc, self.sw)

    def calibrated(self, p_pos):
        """Calibrated ``(p^+, p^-)`` for raw positive probabilities ``p_pos``
        broadcastable to ``(M, J)``."""
        ppv, npv = self.predictive_values()
        return calibrate(p_pos, 1.0 - p_pos, ppv, npv)

    def update(self, p_pos, y):
        """One target example: calibrate with the current indicators, count
        the raw hard predictions, then advance SC/SW.

        ``p_pos`` holds raw positive probabilities (``(M,)`` or ``(M, J)``),
        ``y`` the true class of every column.  Returns ``(lambda_SC, lambda_SW)``.
        """
        p = np.asarray(p_pos, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        yb = np.asarray(y, dtype=bool)
        ppv, npv = self.predictive_values()
        q = 1.0 - p
        hp = p * ppv + q * (1.0 - npv)
        hn = q * npv + p * (1.0 - ppv)
        p_true = np.where(yb, hp, hn)
        p_wrong = np.where(yb, hn, hp)
        hard = p > 0.5
        d = self.data
        d[0] += hard & yb
        d[1] += hard & ~yb
        d[2] += ~hard & ~yb
        d[3] += ~hard & yb
        d[4] += yb
        d[5] += ~yb
        lam_sc, lam_sw = p_true.sum(axis=0), p_wrong.sum(axis=0)
        # dSC = (lsw/lsc) p_true / lsc, dSW = (lsw/lsc) p_wrong / lsw; no update when lsc == 0
        sc_ok = lam_sc > 0
        ratio = np.divide(lam_sw, lam_sc, out=np.zeros_like(lam_sc), where=sc_ok)
        f_sc = np.divide(ratio, lam_sc, out=np.zeros_like(lam_sc), where=sc_ok)
        f_sw = np.divide(ratio, lam_sw, out=np.zeros_like(lam_sw), where=sc_ok & (lam_sw > 0))
        d[6] += p_true * f_sc
        d[7] += p_wrong * f_sw
        self._pv = None
        return lam_sc, lam_sw
