"""Conformal machinery: Upsilon, the Lambda field, the conformal
pseudo-differential, and the conformally invariant connection.

The central scalar is C.C = C_abcd C^abcd.  Where it vanishes the Lambda
field is undefined and every operation here raises DegenerateWeylError; the
caller must report the point as inapplicable rather than continue.

Weight bookkeeping follows Q_phys = Theta^s Q_unphys for g = Theta^2 g_phys;
the derived weights of the stock concomitants are tabulated in WEIGHTS.
"""

from __future__ import annotations

import numpy as np

from .curvature import covariant_derivative, geometry_frame, metric_from_tensor, riemann
from .errors import DegenerateWeylError, InvariantViolationError, TensorError
from .jets import SIZES, Jet4, bmul, brecip
from .tensors import JetTensor, antisymmetrize, contract, gradient, max_abs, pair_contract, raise_slot

#: Conformal weights s with Q_physical = Theta^s Q_unphysical.
WEIGHTS = {
    "metric": -2,  # g_ab
    "inverse_metric": 2,  # g^ab
    "weyl_ud": 0,  # C_abc^d
    "weyl_down": -2,  # C_abcd
    "bach": 0,  # B_ab
    "weyl_scalar": 4,  # C.C
}

_WEYL_DEGENERACY_FACTOR = 1e-10


def jet_einsum(spec, a, b, degree):
    """Two-operand einsum over jet coefficient arrays ('db,ac->dabc').

    Tensor labels refer to the leading axes; the trailing coefficient axis is
    implicit and multiplied by truncated convolution.  Repeated labels that do
    not appear in the output are summed.  Inputs must be sliced to
    SIZES[degree] coefficients.
    """
    inputs, out = spec.split("->")
    la, lb = inputs.split(",")
    letters = list(dict.fromkeys(la + lb))

    def expand(arr, labels):
        order = [labels.index(ch) for ch in letters if ch in labels]
        arr = np.transpose(arr, order + [len(labels)])
        for pos, ch in enumerate(letters):
            if ch not in labels:
                arr = np.expand_dims(arr, pos)
        return arr

    prod = bmul(expand(a, la), expand(b, lb), degree)
    summed = tuple(pos for pos, ch in enumerate(letters) if ch not in out)
    if summed:
        prod = prod.sum(axis=summed)
    remaining = [ch for ch in letters if ch in out]
    return np.transpose(prod, [remaining.index(ch) for ch in out] + [len(out)])


class ConformalPair:
    """A physical metric, a positive factor Theta, and the rescaled metric.

    ``unphysical`` is the geometry frame of g = Theta^2 g_phys, ``physical``
    that of g_phys; ``upsilon`` holds nabla_a Theta / Theta.
    """

    __slots__ = ("physical", "unphysical", "theta", "upsilon")

    def __init__(self, physical, unphysical, theta, upsilon):
        self.physical = physical
        self.unphysical = unphysical
        self.theta = theta
        self.upsilon = upsilon


def rescale_metric(metric, theta):
    """The (0,2) jet tensor of Theta^2 g."""
    theta_sq = theta * theta
    d = min(metric.g.degree, theta_sq.degree)
    data = bmul(metric.g.data[..., : SIZES[d]], theta_sq.coeffs[: SIZES[d]], d)
    return JetTensor(0, 2, metric.g.base, d, data)


def upsilon_field(theta):
    """Upsilon_a = nabla_a Theta / Theta as a (0,1) tensor."""
    if theta.value <= 0.0:
        raise TensorError("conformal factor must be positive at the point")
    grad = gradient(theta)
    n = SIZES[grad.degree]
    data = bmul(grad.data, brecip(theta.coeffs[:n], grad.degree), grad.degree)
    return JetTensor(0, 1, theta.base, grad.degree, data)


def conformal_pair(physical_metric, theta):
    """Build both geometry frames for g_phys and g = Theta^2 g_phys."""
    rescaled = metric_from_tensor(rescale_metric(physical_metric, theta))
    return ConformalPair(
        physical=geometry_frame(physical_metric),
        unphysical=geometry_frame(rescaled),
        theta=theta,
        upsilon=upsilon_field(theta),
    )


def weyl_degenerate(frame):
    """True when the standing assumption C.C != 0 fails at the point.

    Two ways to be degenerate: the Weyl tensor itself is numerically zero
    (conformally flat; compared against the connection/curvature magnitudes
    that set the rounding noise of the pipeline), or it is nonzero but null,
    so the scalar C.C still vanishes.
    """
    cmax = max_abs(frame.weyl_down)
    noise = max_abs(frame.riemann) + max_abs(frame.christoffel) ** 2
    if cmax <= _WEYL_DEGENERACY_FACTOR * noise:
        return True
    return abs(frame.cdotc.value) < _WEYL_DEGENERACY_FACTOR * cmax**2


def lambda_field(frame):
    """Lambda_d = 8 C_d^{amp} nabla_[m L_p]a / (C.C), degree 1."""
    if weyl_degenerate(frame):
        raise DegenerateWeylError(
            f"Weyl scalar {frame.cdotc.value:.3e} vanishes at {frame.base}; "
            "the Lambda field is undefined (test inapplicable)"
        )
    grad_L = antisymmetrize(frame.nabla_schouten, [0, 1])  # nabla_[m L_p]a as [m,p,a]
    d = min(grad_L.degree, frame.weyl_down.degree, frame.cdotc.degree)
    n = SIZES[d]
    # C_d^{amp}: the lowered Weyl tensor read as C_{damp} with slots a,m,p raised.
    raised = frame.weyl_down.data[..., :n]
    gi = frame.metric.g_inv.data[..., :n]
    for axis in (1, 2, 3):
        raised = np.moveaxis(pair_contract(gi, 1, raised, axis, d), 0, axis)
    num = jet_einsum("damp,mpa->d", raised, grad_L.data[..., :n], d)
    coeffs = 8.0 * bmul(num, brecip(frame.cdotc.coeffs[:n], d), d)
    return JetTensor(0, 1, frame.base, d, coeffs)


def m_coefficients(lam, metric, rank_total, s):
    """Correction tensors of the conformal pseudo-differential, as (1,2)
    tensors with axes [c, b, a] (b is the derivative index):

    M^c_ba    = ((s+N)/N) Lam_b delta_a^c + Lam_a delta_b^c - g_ab g^{cd} Lam_d
    Mbar^c_ba = ((s-N)/N) Lam_b delta_a^c - Lam_a delta_b^c + g_ab g^{cd} Lam_d
    """
    if rank_total == 0:
        raise TensorError("rank_total must be at least 1")
    d = min(lam.degree, metric.degree)
    n = SIZES[d]
    lam_d = lam.data[..., :n]
    lam_up = raise_slot(lam.truncate(d), 0, metric.g_inv).data[..., :n]
    eye = np.eye(4)
    lam_b_delta = eye[:, None, :, None] * lam_d[None, :, None, :]  # Lam_b delta_a^c
    lam_a_delta = eye[:, :, None, None] * lam_d[None, None, :, :]  # Lam_a delta_b^c
    g_lam = jet_einsum("ba,c->cba", metric.g.data[..., :n], lam_up, d)  # g_ab Lam^c
    f_plus = (s + rank_total) / rank_total
    f_minus = (s - rank_total) / rank_total
    M = JetTensor(1, 2, lam.base, d, f_plus * lam_b_delta + lam_a_delta - g_lam)
    Mbar = JetTensor(1, 2, lam.base, d, f_minus * lam_b_delta - lam_a_delta + g_lam)
    return M, Mbar


def pseudo_differential(K, s, frame, lam, rank_total=None):
    """Conformal pseudo-differential D^{s,(p,q)} of a weight-s concomitant.

    For scalars this is nabla_a w + s Lambda_a w.  For tensors, nabla picks up
    one Mbar correction per contravariant slot and one M correction per
    covariant slot.  The weight term s Lambda is split evenly over the
    N = rank_total slots (default p+q); any consistent split closes the
    covariance identity and the test suite pins the default.
    """
    if isinstance(K, JetTensor) and K.rank == 0:
        K = Jet4(K.base, K.degree, K.data)
    if isinstance(K, Jet4):
        grad = gradient(K)
        d = min(grad.degree, lam.degree)
        n = SIZES[d]
        data = grad.data[..., :n] + s * bmul(lam.data[..., :n], K.coeffs[:n], d)
        return JetTensor(0, 1, K.base, d, data)
    N = K.rank if rank_total is None else rank_total
    M, Mbar = m_coefficients(lam, frame.metric, N, s)
    nab = covariant_derivative(K, frame.christoffel)
    d = min(nab.degree, M.degree)
    n = SIZES[d]
    td = K.data[..., :n]
    total = np.moveaxis(nab.data[..., :n], K.p, 0)  # derivative axis in front
    for slot in range(K.p):
        corr = pair_contract(Mbar.data[..., :n], 2, td, slot, d)  # (c, m, rest)
        corr = np.moveaxis(corr, 1, 0)
        total = total + np.moveaxis(corr, 1, 1 + slot)
    for slot in range(K.p, K.rank):
        corr = pair_contract(M.data[..., :n], 0, td, slot, d)  # (m, b, rest)
        total = total + np.moveaxis(corr, 1, 1 + slot)
    data = np.moveaxis(total, 0, K.p)
    return JetTensor(K.p, K.q + 1, K.base, d, data)


def c_transition_tensor(lam, metric):
    """Gamma[C,nabla]^c_ab = g^{cd} g_ab Lam_d - delta_b^c Lam_a - delta_a^c Lam_b,
    stored as (1,2) with axes [c, a, b]; symmetric in (a, b)."""
    d = min(lam.degree, metric.degree)
    n = SIZES[d]
    lam_d = lam.data[..., :n]
    lam_up = raise_slot(lam.truncate(d), 0, metric.g_inv).data[..., :n]
    eye = np.eye(4)
    g_term = jet_einsum("ab,c->cab", metric.g.data[..., :n], lam_up, d)
    t_a = eye[:, None, :, None] * lam_d[None, :, None, :]  # delta_b^c Lam_a
    t_b = eye[:, :, None, None] * lam_d[None, None, :, :]  # delta_a^c Lam_b
    return JetTensor(1, 2, lam.base, d, g_term - t_a - t_b)


class CFrame:
    """The conformally invariant connection and its curvature at one point."""

    __slots__ = (
        "lam",
        "c_transition",
        "c_nabla_lambda",
        "c_riemann",
        "c_riemann_generic",
        "c_ricci",
        "c_scalar",
        "two_path_residual",
    )

    def __init__(self, lam, c_transition, c_nabla_lambda, c_riemann, c_riemann_generic,
                 c_ricci, c_scalar, two_path_residual):
        self.lam = lam
        self.c_transition = c_transition
        self.c_nabla_lambda = c_nabla_lambda
        self.c_riemann = c_riemann
        self.c_riemann_generic = c_riemann_generic
        self.c_ricci = c_ricci
        self.c_scalar = c_scalar
        self.two_path_residual = two_path_residual


def c_connection(frame, lam):
    """Assemble the C-connection and its curvature.

    The curvature is computed along two independent routes: the explicit
    Lambda expansion of the curvature difference, and the generic curvature
    of the total connection coefficients Gamma_LC + Gamma[C,nabla].  A
    mismatch beyond rounding raises InvariantViolationError since it can only
    come from a transcription bug.
    """
    metric = frame.metric
    trans = c_transition_tensor(lam, metric)

    # C_a Lam_b = nabla_a Lam_b - Gamma[C,nabla]^c_ab Lam_c
    nabla_lam = covariant_derivative(lam, frame.christoffel)
    d = min(nabla_lam.degree, trans.degree)
    n = SIZES[d]
    corr = jet_einsum("cab,c->ab", trans.data[..., :n], lam.data[..., :n], d)
    CL = nabla_lam.data[..., :n] - corr
    c_nabla_lambda = JetTensor(0, 2, lam.base, d, CL)

    lam_d = lam.data[..., :n]
    lam_up = raise_slot(lam.truncate(d), 0, metric.g_inv).data[..., :n]
    g = metric.g.data[..., :n]
    gi = metric.g_inv.data[..., :n]
    eye = np.eye(4)
    lam_sq = jet_einsum("e,e->", lam_d, lam_up, d)

    # explicit expansion of the curvature of the C-connection:
    # RA_abc^d = R_abc^d - Lam^d (Lam_b g_ac - Lam_a g_bc)
    #            + delta_a^d X_bc - delta_b^d X_ac
    #            + delta_c^d (CL_ab - CL_ba)
    #            - g^{de} (g_cb CL_ae - g_ca CL_be)
    # with X_bc = Lam_b Lam_c - g_bc Lam.Lam - CL_bc; axes [d, a, b, c].
    Y = jet_einsum("b,ac->abc", lam_d, g, d) - jet_einsum("a,bc->abc", lam_d, g, d)
    t1 = -jet_einsum("d,abc->dabc", lam_up, Y, d)
    X = jet_einsum("b,c->bc", lam_d, lam_d, d) - jet_einsum("bc,->bc", g, lam_sq, d) - CL
    t2 = (
        eye[:, :, None, None, None] * X[None, None, :, :, :]
        - eye[:, None, :, None, None] * X[None, :, None, :, :]
    )
    CL_anti = CL - np.swapaxes(CL, 0, 1)
    t3 = eye[:, None, None, :, None] * CL_anti[None, :, :, None, :]
    V = jet_einsum("de,ae->da", gi, CL, d)
    t4 = -jet_einsum("cb,da->dabc", g, V, d) + jet_einsum("ca,db->dabc", g, V, d)
    riem = frame.riemann.data[..., :n]
    c_riemann = JetTensor(1, 3, lam.base, d, riem + t1 + t2 + t3 + t4)

    # generic route: curvature of the total coefficients
    total = frame.christoffel.truncate(trans.degree) + trans
    c_riemann_generic = riemann(total).truncate(d)

    scale = max_abs(c_riemann) + max_abs(c_riemann_generic) + max_abs(frame.riemann)
    residual = float(
        np.max(np.abs(c_riemann.data[..., 0] - c_riemann_generic.data[..., 0]))
    ) / max(scale, 1e-300)
    if residual > 1e-6:
        raise InvariantViolationError(
            f"two computations of the C-curvature disagree (residual {residual:.3e})"
        )

    c_ricci = contract(c_riemann, 0, 1)
    c_scalar = float(jet_einsum("ab,ab->", gi, c_ricci.data, d)[0])
    return CFrame(
        lam=lam,
        c_transition=trans,
        c_nabla_lambda=c_nabla_lambda,
        c_riemann=c_riemann,
        c_riemann_generic=c_riemann_generic,
        c_ricci=c_ricci,
        c_scalar=c_scalar,
        two_path_residual=residual,
    )
