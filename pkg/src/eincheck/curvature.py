"""The Levi-Civita pipeline at one evaluation point.

Everything here consumes a degree-4 metric jet and walks down the derivative
budget: metric 4 -> connection 3 -> curvature/Schouten/Weyl 2 -> their first
covariant derivatives 1 -> second derivatives (Bach) 0.  The budget is
enforced structurally: every arithmetic step truncates to the minimum degree
of its inputs, so code that would need a fifth metric derivative cannot be
written without tripping a DegreeBudgetError.

Sign conventions are pinned by the curvature commutator identity
(nabla_a nabla_b - nabla_b nabla_a) w_c = R_abc^d w_d, which the test suite
checks against random covector fields; no component formula is trusted on
transcription alone.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np

from .errors import DegenerateMetricError, DegreeBudgetError, TensorError
from .jets import SIZES, Jet4, bmul, bpartial
from .tensors import JetTensor, contract, pair_contract, raise_slot

_DEGENERACY_FACTOR = 1e-12


class MetricAtPoint:
    """A nondegenerate metric jet, its exact inverse, determinant, signature."""

    __slots__ = ("g", "g_inv", "det_g", "signature")

    def __init__(self, g, g_inv, det_g, signature):
        self.g = g
        self.g_inv = g_inv
        self.det_g = det_g
        self.signature = signature

    @property
    def base(self):
        return self.g.base

    @property
    def degree(self):
        return self.g.degree


def _det3(m):
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def _minor(m, row, col):
    return [[m[i][j] for j in range(4) if j != col] for i in range(4) if i != row]


def metric_from_tensor(g):
    """Validate a (0,2) metric tensor and attach inverse/determinant/signature.

    The inverse is adjugate/determinant on jets, so g.g_inv = delta holds to
    rounding at every Taylor order.
    """
    if g.valence != (0, 2):
        raise TensorError("metric must be a (0,2) tensor")
    scale = float(np.max(np.abs(g.data[..., 0])))
    asym = float(np.max(np.abs(g.data - np.swapaxes(g.data, 0, 1))))
    if asym > 1e-12 * max(scale, 1e-300):
        raise TensorError("metric tensor is not symmetric")

    entries = [[g.entry(i, j) for j in range(4)] for i in range(4)]
    det = Jet4.constant(0.0, g.base, g.degree)
    for j in range(4):
        det = det + (-1.0) ** j * entries[0][j] * _det3(_minor(entries, 0, j))
    if abs(det.value) <= _DEGENERACY_FACTOR * max(scale, 1e-300) ** 4:
        raise DegenerateMetricError(
            f"metric determinant {det.value:.3e} is numerically zero at {g.base}"
        )

    inv = JetTensor.zeros(2, 0, g.base, g.degree)
    inv_data = inv.data
    for i in range(4):
        for j in range(4):
            cof = (-1.0) ** (i + j) * _det3(_minor(entries, j, i))
            inv_data[i, j] = (cof / det).coeffs
    signature = tuple(int(np.sign(v)) for v in np.linalg.eigvalsh(g.data[..., 0]))
    return MetricAtPoint(g, inv, det, signature)


def christoffel(metric):
    """Gamma^a_bc = (1/2) g^{ad} (d_b g_dc + d_c g_db - d_d g_bc), degree 3."""
    g = metric.g
    if g.degree < 1:
        raise DegreeBudgetError("christoffel needs a metric of degree >= 1")
    d_out = g.degree - 1
    n = SIZES[d_out]
    dg = np.stack([bpartial(g.data, g.degree, m) for m in range(4)])  # (m, a, b, .)
    lower = 0.5 * (
        np.moveaxis(dg, 0, 1)  # d_b g_dc as [d, b, c]
        + np.transpose(dg, (1, 2, 0, 3))  # d_c g_db as [d, b, c]
        - dg  # d_d g_bc as [d, b, c]
    )
    gi = metric.g_inv.data[..., :n]
    prod = bmul(gi[:, :, None, None, :], lower[None, :, :, :, :], d_out)
    return JetTensor(1, 2, g.base, d_out, prod.sum(axis=1))


def riemann(gamma):
    """R_abc^d stored as (1,3) with axes [d, a, b, c]; degree drops by one.

    Component form (sign fixed by the commutator self-test):
    R_abc^d = -d_a Gamma^d_bc + d_b Gamma^d_ac
              + Gamma^f_ac Gamma^d_bf - Gamma^f_bc Gamma^d_af.
    """
    if gamma.degree < 1:
        raise DegreeBudgetError("riemann needs a connection of degree >= 1")
    d_out = gamma.degree - 1
    n = SIZES[d_out]
    dG = np.stack([bpartial(gamma.data, gamma.degree, m) for m in range(4)])  # (m, d, b, c, .)
    term_b = np.transpose(dG, (1, 2, 0, 3, 4))  # d_b Gamma^d_ac as [d, a, b, c]
    term_a = np.moveaxis(dG, 0, 1)  # d_a Gamma^d_bc as [d, a, b, c]
    G = gamma.data[..., :n]
    # Q[d, b, a, c] = sum_f Gamma^d_bf Gamma^f_ac
    prod = bmul(G[:, :, :, None, None, :], G[None, None, :, :, :, :], d_out)
    Q = prod.sum(axis=2)
    data = (term_b - term_a) + (np.swapaxes(Q, 1, 2) - Q)
    return JetTensor(1, 3, gamma.base, d_out, data)


def ricci_tensor(riem):
    """R_ac = R_abc^b: trace the up slot against the middle covariant slot."""
    return contract(riem, 0, 1)


def scalar_curvature(ricci, metric):
    d = min(ricci.degree, metric.degree)
    n = SIZES[d]
    coeffs = bmul(metric.g_inv.data[..., :n], ricci.data[..., :n], d).sum(axis=(0, 1))
    return Jet4(ricci.base, d, coeffs)


def schouten_tensor(ricci, scalar, metric):
    """L_ab = (1/2)(R_ab - (1/6) R g_ab)."""
    d = min(ricci.degree, scalar.degree)
    n = SIZES[d]
    rg = bmul(metric.g.data[..., :n], scalar.coeffs[:n], d)
    return JetTensor(0, 2, ricci.base, d, 0.5 * (ricci.data[..., :n] - rg / 6.0))


def ricci_scalar_schouten(riem, metric):
    ricci = ricci_tensor(riem)
    scalar = scalar_curvature(ricci, metric)
    return ricci, scalar, schouten_tensor(ricci, scalar, metric)


def weyl_tensor(riem, schouten, metric):
    """C_abc^d = R_abc^d - 2 L^d_[b g_a]c - 2 delta^d_[b L_a]c.

    Returns the (1,3) form ([d, a, b, c]), the fully lowered (0,4) form
    ([a, b, c, d]) and the Weyl scalar C.C = C_abcd C^abcd.
    """
    d = riem.degree
    n = SIZES[d]
    L = schouten.data[..., :n]
    g = metric.g.data[..., :n]
    L_up = raise_slot(schouten, 0, metric.g_inv).data[..., :n]  # L^d_b as [d, b]
    eye = np.eye(4)
    lg = bmul(L_up[:, None, :, None, :], g[None, :, None, :, :], d)  # [d,a,b,c] = L^d_b g_ac
    term1 = lg - np.swapaxes(lg, 1, 2)
    term2 = (
        eye[:, None, :, None, None] * L[None, :, None, :, :]
        - eye[:, :, None, None, None] * L[None, None, :, :, :]
    )
    weyl_ud = JetTensor(1, 3, riem.base, d, riem.data[..., :n] - term1 - term2)

    lowered = pair_contract(metric.g.data[..., :n], 1, weyl_ud.data, 0, d)
    weyl_down = JetTensor(0, 4, riem.base, d, np.moveaxis(lowered, 0, 3))

    up = weyl_down.data
    gi = metric.g_inv.data[..., :n]
    for axis in range(4):
        up = np.moveaxis(pair_contract(gi, 1, up, axis, d), 0, axis)
    cdotc = Jet4(riem.base, d, bmul(weyl_down.data, up, d).sum(axis=(0, 1, 2, 3)))
    weyl_up = JetTensor(4, 0, riem.base, d, up)
    return weyl_ud, weyl_down, weyl_up, cdotc


def covariant_derivative(t, gamma):
    """Levi-Civita covariant derivative; the new covariant slot is leftmost
    within the covariant block (axis position p)."""
    if isinstance(t, Jet4):
        from .tensors import gradient

        return gradient(t)
    if t.degree < 1:
        raise DegreeBudgetError("covariant derivative of a degree-0 tensor")
    d_out = t.degree - 1
    n = SIZES[d_out]
    total = np.stack([bpartial(t.data, t.degree, m) for m in range(4)])
    G = gamma.data[..., :n]
    td = t.data[..., :n]
    for slot in range(t.p):
        corr = pair_contract(G, 2, td, slot, d_out)  # (c, m, rest...)
        corr = np.moveaxis(corr, 1, 0)  # (m, c, rest...)
        total = total + np.moveaxis(corr, 1, 1 + slot)
    for slot in range(t.p, t.rank):
        corr = pair_contract(G, 0, td, slot, d_out)  # (m, b, rest...)
        total = total - np.moveaxis(corr, 1, 1 + slot)
    data = np.moveaxis(total, 0, t.p)
    return JetTensor(t.p, t.q + 1, t.base, d_out, data)


class GeometryFrame:
    """All Levi-Civita concomitants of one metric at one point.

    The Bach tensor consumes the final two derivative orders and is computed
    lazily; everything else is built eagerly by ``geometry_frame``.
    """

    def __init__(self, metric):
        self.metric = metric
        self.christoffel = christoffel(metric)
        self.riemann = riemann(self.christoffel)
        self.ricci, self.scalar_R, self.schouten = ricci_scalar_schouten(self.riemann, metric)
        self.weyl_ud, self.weyl_down, self.weyl_up, self.cdotc = weyl_tensor(
            self.riemann, self.schouten, metric
        )

    @property
    def base(self):
        return self.metric.base

    @cached_property
    def nabla_schouten(self):
        """nabla_m L_ab, degree 1; feeds the Lambda field."""
        return covariant_derivative(self.schouten, self.christoffel)

    @cached_property
    def nabla_weyl_down(self):
        """nabla_m C_abcd, degree 1."""
        return covariant_derivative(self.weyl_down, self.christoffel)

    @cached_property
    def bach(self):
        return bach_tensor(self)

    def curvature_scale(self):
        """max |Riemann| constant entry; the natural curvature magnitude used
        to floor relative residuals."""
        return float(np.max(np.abs(self.riemann.data[..., 0])))


def geometry_frame(metric):
    """Build the full concomitant tower for one metric jet."""
    return GeometryFrame(metric)


def bach_tensor(frame):
    """B_bc = nabla^a nabla^d C_abdc - (1/2) R^{ad} C_abcd, degree 0."""
    metric = frame.metric
    ddC = covariant_derivative(frame.nabla_weyl_down, frame.christoffel)
    # ddC axes: (outer deriv n, inner deriv m, a, b, c, d) for nabla_n nabla_m C_abcd
    d = ddC.degree
    n = SIZES[d]
    gi = metric.g_inv.data[..., :n]
    X = pair_contract(gi, 1, ddC.data, 0, d)  # (a', m, a, b, c, d)
    X = np.trace(X, axis1=0, axis2=2)  # contract a' with slot a -> (m, b, c, d)
    X = pair_contract(gi, 1, X, 0, d)  # (d', b, c, d)
    term1 = np.trace(X, axis1=0, axis2=2)  # contract d' with the slot holding d

    ric_up = raise_slot(raise_slot(frame.ricci, 0, metric.g_inv), 0, metric.g_inv)
    W = frame.weyl_down.truncate(d)
    Y = pair_contract(ric_up.data[..., :n], 0, W.data, 0, d)  # (d', b, c, d)
    term2 = np.trace(Y, axis1=0, axis2=3)
    return JetTensor(0, 2, metric.base, d, term1 - 0.5 * term2)
