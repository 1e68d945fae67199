import math

import numpy as np
import pytest

from eincheck.conformal import jet_einsum, rescale_metric
from eincheck.curvature import (
    bach_tensor,
    christoffel,
    covariant_derivative,
    geometry_frame,
    metric_from_tensor,
    riemann,
)
from eincheck.einstein import (
    commutator_residual,
    contracted_bianchi_residual,
    fourd_identity_residual,
    random_polynomial_covector,
    spec_from_components,
)
from eincheck.errors import DegenerateMetricError, DegreeBudgetError
from eincheck.expr import eval_on_jets, parse
from eincheck.jets import SIZES, Jet4, coordinate_seeds
from eincheck.tensors import JetTensor, antisymmetrize, contract, max_abs

from oracles import fd_kretschmann, fd_ricci, metric_fn

COORDS = ("t", "r", "theta", "phi")

FLAT = spec_from_components(
    "flat", ("t", "x", "y", "z"), {(0, 0): "-1", (1, 1): "1", (2, 2): "1", (3, 3): "1"}
)

SPHERICAL_BLOCK = spec_from_components(
    "spherical-block", COORDS,
    {(0, 0): "-1", (1, 1): "1", (2, 2): "r^2", (3, 3): "r^2*sin(theta)^2"},
)

DE_SITTER = spec_from_components(
    "de-sitter", COORDS,
    {
        (0, 0): "-(1 - r^2/ell^2)",
        (1, 1): "1/(1 - r^2/ell^2)",
        (2, 2): "r^2",
        (3, 3): "r^2*sin(theta)^2",
    },
    parameters={"ell": 2.0},
)


def test_flat_christoffel_and_riemann_vanish():
    frame = FLAT.frame_at((0.3, 1.0, -2.0, 0.7))
    assert max_abs(frame.christoffel) == 0.0
    assert max_abs(frame.riemann) == 0.0
    assert max_abs(contract(frame.riemann, 0, 1)) == 0.0


def test_sphere_block_christoffel_value():
    # hand value: Gamma^theta_{phi phi} = -sin(theta) cos(theta)
    th = 1.1
    frame = SPHERICAL_BLOCK.frame_at((0.0, 1.0, th, 0.0))
    expected = -math.sin(th) * math.cos(th)
    assert frame.christoffel[2, 3, 3].value == pytest.approx(expected, rel=1e-14)
    # finite-difference cross-check of the same entry
    from oracles import fd_christoffel

    fd = fd_christoffel(metric_fn(SPHERICAL_BLOCK), (0.0, 1.0, th, 0.0))
    assert fd[2, 3, 3] == pytest.approx(expected, rel=1e-8)


def test_christoffel_symmetric_exactly(geo):
    gam = geo.frame("kerr", (0.0, 3.0, 1.2, 0.3)).christoffel
    assert np.array_equal(gam.data, np.swapaxes(gam.data, 1, 2))


def test_commutator_identity_fixes_sign(geo, rng):
    # the defining identity, evaluated along two independent code paths
    frame = geo.frame("schwarzschild", (0.0, 3.0, 1.5708, 0.0))
    for _ in range(10):
        omega = random_polynomial_covector(frame.base, rng)
        assert commutator_residual(frame, omega) < 1e-10


def test_schwarzschild_is_vacuum(geo):
    frame = geo.frame("schwarzschild", (0.0, 5.0, 1.5708, 0.0))
    assert max_abs(frame.ricci) <= 1e-10 * frame.curvature_scale()
    # independent finite-difference confirmation at the oracle's own accuracy
    fd = fd_ricci(metric_fn(geo.spec("schwarzschild")), (0.0, 5.0, 1.5708, 0.0))
    assert np.max(np.abs(fd)) <= 1e-5


def _kretschmann(frame):
    riem_down = frame.riemann
    # lower the contravariant slot, then raise everything on a copy
    from eincheck.tensors import lower_slot, raise_slot

    down = lower_slot(riem_down, 0, frame.metric.g)  # [a,b,c,d]
    up = down
    for slot in range(4):
        up = raise_slot(up, 0, frame.metric.g_inv)
    n = SIZES[min(down.degree, up.degree)]
    from eincheck.jets import bmul

    total = bmul(down.data[..., :n], up.data[..., :n], min(down.degree, up.degree)).sum(
        axis=(0, 1, 2, 3)
    )
    return float(total[0])


def test_schwarzschild_kretschmann_spot_value(geo):
    # closed form 48 m^2 / r^6 = 0.75 at m=1, r=2; the EF chart is regular there
    frame = geo.frame("schwarzschild", (0.0, 2.0, 1.5708, 0.0))
    assert _kretschmann(frame) == pytest.approx(0.75, rel=1e-9)
    fd = fd_kretschmann(metric_fn(geo.spec("schwarzschild")), (0.0, 2.0, 1.5708, 0.0))
    assert fd == pytest.approx(0.75, rel=1e-4)


def test_de_sitter_scalar_curvature():
    # maximally symmetric: R = 12 / ell^2 (= 3.0 for ell = 2), frozen and
    # cross-checked against the finite-difference curvature
    frame = DE_SITTER.frame_at((0.0, 0.8, 1.2, 0.3))
    assert frame.scalar_R.value == pytest.approx(3.0, rel=1e-9)
    gfn = metric_fn(DE_SITTER)
    fd_scalar = float(
        np.einsum("ab,ab->", np.linalg.inv(gfn((0.0, 0.8, 1.2, 0.3))), fd_ricci(gfn, (0.0, 0.8, 1.2, 0.3)))
    )
    assert fd_scalar == pytest.approx(3.0, rel=1e-4)


def test_schouten_trace_identity(geo):
    # g^{ab} L_ab = R/6 follows from the definition; rounding only
    frame = geo.frame("schwarzschild-de-sitter", (0.0, 5.0, 1.3, 0.2))
    n = SIZES[frame.schouten.degree]
    tr = jet_einsum(
        "ab,ab->", frame.metric.g_inv.data[..., :n], frame.schouten.data, frame.schouten.degree
    )
    assert np.max(np.abs(tr - frame.scalar_R.coeffs[:n] / 6.0)) <= 1e-12 * (
        abs(frame.scalar_R.value) + 1.0
    )


def test_ricci_symmetry_and_bianchi(geo):
    for name, point in (
        ("kerr", (0.0, 3.0, 1.2, 0.3)),
        ("perturbed-schwarzschild", (0.0, 4.0, 1.5708, 0.0)),
    ):
        frame = geo.frame(name, point)
        scale = frame.curvature_scale()
        assert np.array_equal(frame.riemann.data, -np.swapaxes(frame.riemann.data, 1, 2))
        assert max_abs(antisymmetrize(frame.riemann, [1, 2, 3])) <= 1e-11 * scale
        asym = frame.ricci.data - np.swapaxes(frame.ricci.data, 0, 1)
        assert np.max(np.abs(asym[..., 0])) <= 1e-11 * scale


def test_weyl_totally_trace_free(geo):
    frame = geo.frame("perturbed-schwarzschild", (0.0, 4.0, 1.5708, 0.0))
    scale = max_abs(frame.weyl_down) + frame.curvature_scale()
    for j in range(3):
        assert max_abs(contract(frame.weyl_ud, 0, j)) <= 1e-10 * scale
    n = SIZES[frame.weyl_down.degree]
    gtrace = jet_einsum(
        "ac,abcd->bd", frame.metric.g_inv.data[..., :n], frame.weyl_down.data,
        frame.weyl_down.degree,
    )
    assert np.max(np.abs(gtrace[..., 0])) <= 1e-10 * scale


def test_conformally_flat_weyl_vanishes():
    theta = parse("1 + 0.1*r/(1 + r)", COORDS, set())
    spec = SPHERICAL_BLOCK
    point = (0.0, 3.0, 1.1, 0.2)
    frame = spec.frame_at(point, conformal=theta)
    assert max_abs(frame.weyl_down) <= 1e-12 * (
        frame.curvature_scale() + max_abs(frame.christoffel) ** 2
    )
    assert abs(frame.cdotc.value) <= 1e-20


def test_fourd_identity_on_catalog(geo):
    for name in ("schwarzschild", "kerr", "perturbed-schwarzschild"):
        for point in geo.points(name):
            assert fourd_identity_residual(geo.frame(name, point)) <= 1e-10


def test_metricity(geo):
    frame = geo.frame("kerr", (0.0, 5.0, 1.2, 0.3))
    grad_g = covariant_derivative(frame.metric.g, frame.christoffel)
    scale = max_abs(frame.christoffel) * max_abs(frame.metric.g)
    assert max_abs(grad_g) <= 1e-11 * scale


def test_gradient_of_constant_scalar(geo):
    frame = geo.frame("schwarzschild", (0.0, 3.0, 1.5708, 0.0))
    const = Jet4.constant(2.5, frame.base, 4)
    grad = covariant_derivative(const, frame.christoffel)
    assert max_abs(grad) == 0.0


def test_contracted_second_bianchi(geo):
    frame = geo.frame("schwarzschild", (0.0, 3.0, 1.5708, 0.0))
    assert contracted_bianchi_residual(frame) <= 1e-9


def test_covariant_derivative_budget_exhaustion(geo):
    frame = geo.frame("schwarzschild", (0.0, 3.0, 1.5708, 0.0))
    t = frame.bach  # degree 0 by construction
    with pytest.raises(DegreeBudgetError):
        covariant_derivative(t, frame.christoffel)


def test_bach_vanishes_conformally_einstein(geo):
    point = (0.0, 3.0, 1.5708, 0.0)
    frame = geo.frame("schwarzschild", point)
    floor = 1e-8 * frame.curvature_scale() ** 2
    assert max_abs(frame.bach) <= floor
    # oracle: on the conformally rescaled metric the Bach tensor must both
    # vanish and equal the unrescaled one (conformal invariance)
    pair = geo.pair("schwarzschild", "bump", point)
    b_resc = pair.unphysical.bach
    assert max_abs(b_resc) <= floor
    assert max_abs(b_resc - frame.bach) <= floor


def test_bach_flat_zero():
    frame = FLAT.frame_at((0.0, 1.0, 2.0, 3.0))
    assert max_abs(frame.bach) == 0.0


def test_bach_symmetric_trace_free(geo):
    frame = geo.frame("perturbed-schwarzschild", (0.0, 4.0, 1.5708, 0.0))
    B = frame.bach
    scale = max_abs(B) + 1e-8 * frame.curvature_scale() ** 2
    assert np.max(np.abs(B.data - np.swapaxes(B.data, 0, 1))) <= 1e-9 * scale
    n = SIZES[B.degree]
    tr = jet_einsum("ab,ab->", frame.metric.g_inv.data[..., :n], B.data, B.degree)
    assert np.max(np.abs(tr)) <= 1e-9 * scale


def test_degenerate_metric_rejected():
    spec = spec_from_components(
        "degenerate", COORDS, {(0, 0): "0", (1, 1): "1", (2, 2): "1", (3, 3): "1"}
    )
    with pytest.raises(DegenerateMetricError):
        spec.metric_at((0.0, 1.0, 1.0, 1.0))


def test_inverse_metric_exact_at_all_orders(geo):
    m = geo.frame("kerr", (0.0, 3.0, 1.2, 0.3)).metric
    prod = jet_einsum("ab,bc->ac", m.g.data, m.g_inv.data, 4)
    delta = np.eye(4)[:, :, None] * np.eye(1, SIZES[4])[0]
    scale = np.max(np.abs(m.g.data)) * np.max(np.abs(m.g_inv.data))
    assert np.max(np.abs(prod - delta)) <= 1e-12 * scale


def test_degree_ledger_through_pipeline(geo):
    frame = geo.frame("schwarzschild", (0.0, 3.0, 1.5708, 0.0))
    assert frame.metric.g.degree == 4
    assert frame.christoffel.degree == 3
    assert frame.riemann.degree == 2
    assert frame.schouten.degree == 2
    assert frame.weyl_down.degree == 2
    assert frame.nabla_schouten.degree == 1
    assert frame.bach.degree == 0
