"""Dense small-tensor algebra over jet entries.

A JetTensor is a 4^rank block of jets sharing one base point and one degree
budget, stored as a single array whose trailing axis is the Taylor-coefficient
axis.  Contravariant slots come first, then covariant slots; a slot freed by
raising or lowering re-enters at the end of its new block.  All operations are
pure and the arrays are treated as immutable.
"""

from __future__ import annotations

import math
from itertools import permutations

import numpy as np

from .errors import TensorError
from .jets import SIZES, Jet4, bmul, bpartial


class JetTensor:
    """Tensor of valence (p contravariant, q covariant) with jet entries."""

    __slots__ = ("p", "q", "base", "degree", "data")

    def __init__(self, p, q, base, degree, data):
        data = np.asarray(data, dtype=float)
        expected = (4,) * (p + q) + (SIZES[degree],)
        if data.shape != expected:
            raise TensorError(f"data shape {data.shape} does not match {expected}")
        self.p = p
        self.q = q
        self.base = tuple(float(x) for x in base)
        self.degree = degree
        self.data = data

    @classmethod
    def zeros(cls, p, q, base, degree):
        return cls(p, q, base, degree, np.zeros((4,) * (p + q) + (SIZES[degree],)))

    @classmethod
    def delta(cls, base, degree):
        """Identity (1,1) tensor."""
        data = np.zeros((4, 4, SIZES[degree]))
        data[np.arange(4), np.arange(4), 0] = 1.0
        return cls(1, 1, base, degree, data)

    @classmethod
    def from_jets(cls, p, q, entries):
        """Build from a nested sequence (shape 4^(p+q)) of Jet4 values."""
        entries = np.asarray(entries, dtype=object)
        flat = entries.reshape(-1)
        base, degree = flat[0].base, flat[0].degree
        data = np.empty((flat.size, SIZES[degree]))
        for k, jet in enumerate(flat):
            if jet.base != base or jet.degree != degree:
                raise TensorError("entries must share base point and degree")
            data[k] = jet.coeffs
        return cls(p, q, base, degree, data.reshape((4,) * (p + q) + (SIZES[degree],)))

    @property
    def rank(self):
        return self.p + self.q

    @property
    def valence(self):
        return (self.p, self.q)

    def entry(self, *index):
        if len(index) != self.rank:
            raise TensorError(f"need {self.rank} indices, got {len(index)}")
        return Jet4(self.base, self.degree, self.data[index].copy())

    def __getitem__(self, index):
        if isinstance(index, int):
            index = (index,)
        return self.entry(*index)

    def truncate(self, degree):
        if degree > self.degree:
            raise TensorError(f"cannot extend degree {self.degree} to {degree}")
        if degree == self.degree:
            return self
        return JetTensor(self.p, self.q, self.base, degree, self.data[..., : SIZES[degree]].copy())

    def constants(self):
        """Array of the constant terms, shape 4^rank."""
        return self.data[..., 0].copy()

    def _check_mate(self, other):
        if self.valence != other.valence:
            raise TensorError(f"valence mismatch {self.valence} vs {other.valence}")
        if self.base != other.base:
            raise TensorError("base points differ")

    def _aligned(self, other):
        self._check_mate(other)
        d = min(self.degree, other.degree)
        n = SIZES[d]
        return self.data[..., :n], other.data[..., :n], d

    def __add__(self, other):
        a, b, d = self._aligned(other)
        return JetTensor(self.p, self.q, self.base, d, a + b)

    def __sub__(self, other):
        a, b, d = self._aligned(other)
        return JetTensor(self.p, self.q, self.base, d, a - b)

    def __neg__(self):
        return JetTensor(self.p, self.q, self.base, self.degree, -self.data)

    def __mul__(self, factor):
        if isinstance(factor, (int, float)):
            return JetTensor(self.p, self.q, self.base, self.degree, self.data * float(factor))
        if isinstance(factor, Jet4):
            if factor.base != self.base:
                raise TensorError("base points differ")
            d = min(self.degree, factor.degree)
            n = SIZES[d]
            data = bmul(self.data[..., :n], factor.coeffs[:n], d)
            return JetTensor(self.p, self.q, self.base, d, data)
        return NotImplemented

    __rmul__ = __mul__

    def __repr__(self):
        return f"JetTensor(valence={self.valence}, degree={self.degree}, base={self.base})"


def max_abs(t):
    """Largest |constant term| over all entries; the scale of the tensor."""
    if isinstance(t, Jet4):
        return abs(t.value)
    return float(np.max(np.abs(t.data[..., 0])))


def pair_contract(adata, aaxis, bdata, baxis, degree):
    """sum_e a[.., e, ..] * b[.., e, ..] on raw coefficient arrays.

    Result axes are (a-axes minus aaxis) followed by (b-axes minus baxis),
    coefficient axis last.  Inputs must be sliced to SIZES[degree] already.
    """
    a = np.moveaxis(adata, aaxis, -2)
    b = np.moveaxis(bdata, baxis, -2)
    a_rest = a.shape[:-2]
    b_rest = b.shape[:-2]
    a = a.reshape(a_rest + (1,) * len(b_rest) + a.shape[-2:])
    return bmul(a, b, degree).sum(axis=-2)


def _slice(t, degree):
    return t.data[..., : SIZES[degree]]


def contract(t, slot_up, slot_down):
    """Trace one contravariant slot against one covariant slot."""
    if not 0 <= slot_up < t.p:
        raise TensorError(f"contravariant slot {slot_up} out of range for valence {t.valence}")
    if not 0 <= slot_down < t.q:
        raise TensorError(f"covariant slot {slot_down} out of range for valence {t.valence}")
    data = np.trace(t.data, axis1=slot_up, axis2=t.p + slot_down)
    return JetTensor(t.p - 1, t.q - 1, t.base, t.degree, data)


def _metric_contract(t, axis, metric):
    d = min(t.degree, metric.degree)
    res = pair_contract(_slice(metric, d), 1, _slice(t, d), axis, d)
    return res, d


def raise_slot(t, slot, metric_inv):
    """Raise covariant slot (index within the covariant block) with g^{ab}.

    The new contravariant slot lands at the end of the contravariant block.
    """
    if metric_inv.valence != (2, 0):
        raise TensorError("raising needs a (2,0) inverse metric")
    if not 0 <= slot < t.q:
        raise TensorError(f"covariant slot {slot} out of range")
    res, d = _metric_contract(t, t.p + slot, metric_inv)
    data = np.moveaxis(res, 0, t.p)
    return JetTensor(t.p + 1, t.q - 1, t.base, d, data)


def lower_slot(t, slot, metric):
    """Lower contravariant slot with g_{ab}; new slot ends the covariant block."""
    if metric.valence != (0, 2):
        raise TensorError("lowering needs a (0,2) metric")
    if not 0 <= slot < t.p:
        raise TensorError(f"contravariant slot {slot} out of range")
    res, d = _metric_contract(t, slot, metric)
    data = np.moveaxis(res, 0, t.rank - 1)
    return JetTensor(t.p - 1, t.q + 1, t.base, d, data)


def raise_lower(t, slot, metric_or_inverse):
    """Flip one slot with the supplied metric; direction follows its valence."""
    if metric_or_inverse.valence == (2, 0):
        return raise_slot(t, slot, metric_or_inverse)
    if metric_or_inverse.valence == (0, 2):
        return lower_slot(t, slot, metric_or_inverse)
    raise TensorError("metric argument must have valence (0,2) or (2,0)")


def _permutation_sign(perm):
    sign = 1
    seen = [False] * len(perm)
    for start in range(len(perm)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = perm[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def _sym_core(t, slots, antisym):
    slots = list(slots)
    if len(set(slots)) != len(slots):
        raise TensorError("slots must be distinct")
    in_contra = all(s < t.p for s in slots)
    in_cov = all(s >= t.p for s in slots)
    if not (in_contra or in_cov):
        raise TensorError("cannot (anti)symmetrize across slot kinds")
    acc = np.zeros_like(t.data)
    for perm in permutations(range(len(slots))):
        moved = np.moveaxis(t.data, slots, [slots[k] for k in perm])
        acc += _permutation_sign(perm) * moved if antisym else moved
    return JetTensor(t.p, t.q, t.base, t.degree, acc / math.factorial(len(slots)))


def symmetrize(t, slots):
    """Average over slot permutations; 1/n! normalization (round brackets)."""
    return _sym_core(t, slots, antisym=False)


def antisymmetrize(t, slots):
    """Signed average over slot permutations (square brackets)."""
    return _sym_core(t, slots, antisym=True)


def trace_free(t, metric, metric_inv):
    """t_ab - (1/4) g_ab g^{cd} t_cd for a (0,2) tensor."""
    if t.valence != (0, 2):
        raise TensorError("trace_free expects a (0,2) tensor")
    d = min(t.degree, metric.degree, metric_inv.degree)
    tr = bmul(_slice(metric_inv, d), _slice(t, d), d).sum(axis=(0, 1))
    data = _slice(t, d) - 0.25 * bmul(_slice(metric, d), tr, d)
    return JetTensor(0, 2, t.base, d, data)


def sym_antisym_tf(t, slots, mode, metric=None, metric_inv=None):
    """Dispatch for the three projection modes used by the curvature stack."""
    if mode == "sym":
        return symmetrize(t, slots)
    if mode == "antisym":
        return antisymmetrize(t, slots)
    if mode == "trace_free":
        if metric is None or metric_inv is None:
            raise TensorError("trace_free needs the metric and its inverse")
        return trace_free(t, metric, metric_inv)
    raise TensorError(f"unknown mode {mode!r}")


def outer(a, b):
    """Tensor product; contravariant slots of both factors come first."""
    if a.base != b.base:
        raise TensorError("base points differ")
    d = min(a.degree, b.degree)
    n = SIZES[d]
    ad = _slice(a, d).reshape(a.data.shape[:-1] + (1,) * b.rank + (n,))
    data = bmul(ad, _slice(b, d), d)
    # interleave: (a-contra, a-cov, b-contra, b-cov) -> contra first
    order = (
        list(range(a.p))
        + list(range(a.rank, a.rank + b.p))
        + list(range(a.p, a.rank))
        + list(range(a.rank + b.p, a.rank + b.rank))
    )
    data = np.transpose(data, order + [a.rank + b.rank])
    return JetTensor(a.p + b.p, a.q + b.q, a.base, d, data)


def swap_slots(t, s1, s2):
    """Exchange two slots of the same kind."""
    both_contra = s1 < t.p and s2 < t.p
    both_cov = s1 >= t.p and s2 >= t.p
    if not (both_contra or both_cov):
        raise TensorError("cannot swap slots of different kinds")
    return JetTensor(t.p, t.q, t.base, t.degree, np.swapaxes(t.data, s1, s2))


def gradient(j):
    """Partial derivatives of a scalar jet as a (0,1) tensor (= nabla of a scalar)."""
    data = np.stack([bpartial(j.coeffs, j.degree, m) for m in range(4)])
    return JetTensor(0, 1, j.base, j.degree - 1, data)
