"""The conformal-Einstein decision procedure.

Two equivalent characterizations are evaluated at every sample point and
cross-checked against each other:

  * the trace-free criterion E_ab = TF[L_ab + nabla_a Lam_b + Lam_a Lam_b]
  * the algebraic conditions on the curvature of the invariant connection,
    antisym(R_ab) = 0 and R_ab - (1/4) g_ab R = 0 (calligraphic R).

Residuals are normalized by (|L| + |nabla Lam| + |Lam|^2 + |R_ab| + eps)
where eps floors the denominator at a small multiple of the local Riemann
magnitude, so exact Einstein metrics sit at rounding level and verdicts are
invariant under constant rescaling of the metric.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conformal import (
    c_connection,
    conformal_pair,
    jet_einsum,
    lambda_field,
    rescale_metric,
    weyl_degenerate,
)
from .curvature import covariant_derivative, geometry_frame, metric_from_tensor
from .errors import DegenerateWeylError, EincheckError, EvalDomainError
from .expr import eval_on_jets, parse
from .jets import MAX_DEGREE, SIZES, Jet4, bmul, coordinate_seeds
from .tensors import (
    JetTensor,
    antisymmetrize,
    contract,
    max_abs,
    outer,
    pair_contract,
    symmetrize,
    trace_free,
)

#: Relative floor applied to residual denominators, in units of the local
#: Riemann magnitude.  Keeps vacuum metrics (where every denominator term
#: vanishes identically) at rounding level instead of 0/0; perturbations of
#: relative size above the floor are still resolved.
SCALE_FLOOR = 1e-4

DEFAULT_TOLERANCE = 1e-7


@dataclass(frozen=True)
class MetricSpec:
    """A metric as expressions: the evaluation-ready form of a metric file."""

    name: str
    coordinates: tuple
    components: tuple  # 4x4 nested tuple of ScalarExpr (symmetric)
    parameters: dict = field(default_factory=dict)
    conformal_factor: object = None  # optional ScalarExpr

    def component_tensor(self, point, degree=MAX_DEGREE):
        seeds = coordinate_seeds(point, degree)
        rows = [
            [eval_on_jets(self.components[i][j], seeds, self.parameters) for j in range(4)]
            for i in range(4)
        ]
        return JetTensor.from_jets(0, 2, rows)

    def metric_at(self, point, degree=MAX_DEGREE, conformal=None):
        """MetricAtPoint for this spec, optionally rescaled by Theta^2."""
        base = metric_from_tensor(self.component_tensor(point, degree))
        if conformal is None:
            return base
        seeds = coordinate_seeds(point, degree)
        theta = eval_on_jets(conformal, seeds, self.parameters)
        return metric_from_tensor(rescale_metric(base, theta))

    def frame_at(self, point, degree=MAX_DEGREE, conformal=None):
        return geometry_frame(self.metric_at(point, degree, conformal))

    def conformal_pair_at(self, point, factor_expr, degree=MAX_DEGREE):
        seeds = coordinate_seeds(point, degree)
        theta = eval_on_jets(factor_expr, seeds, self.parameters)
        return conformal_pair(self.metric_at(point, degree), theta)


def spec_from_components(name, coordinates, component_sources, parameters=None,
                         conformal_factor=None):
    """Parse a lower-triangular {(i,j) or 'g_x_y': source} mapping into a spec."""
    parameters = dict(parameters or {})
    coordinates = tuple(coordinates)
    exprs = [[None] * 4 for _ in range(4)]
    for key, source in component_sources.items():
        i, j = key
        expr = parse(source, coordinates, parameters.keys()) if isinstance(source, str) else source
        if exprs[i][j] is not None:
            raise EincheckError(f"component ({i},{j}) given twice")
        exprs[i][j] = expr
        if i != j:
            exprs[j][i] = expr
    zero = parse("0", coordinates, ())
    rows = tuple(tuple(exprs[i][j] if exprs[i][j] is not None else zero for j in range(4)) for i in range(4))
    factor = None
    if conformal_factor is not None:
        factor = (
            parse(conformal_factor, coordinates, parameters.keys())
            if isinstance(conformal_factor, str)
            else conformal_factor
        )
    return MetricSpec(
        name=name,
        coordinates=coordinates,
        components=rows,
        parameters=parameters,
        conformal_factor=factor,
    )


def e_tensor(frame, lam):
    """E_ab = TF_g[L_ab + nabla_a Lam_b + Lam_a Lam_b], degree 0."""
    nabla_lam = covariant_derivative(lam, frame.christoffel)
    inner = frame.schouten.truncate(nabla_lam.degree) + nabla_lam + outer(lam, lam)
    return trace_free(inner, frame.metric.g, frame.metric.g_inv)


def residual_scale(frame, lam, cframe):
    """The shared denominator of every normalized residual at one point."""
    nabla_lam = covariant_derivative(lam, frame.christoffel)
    floor = SCALE_FLOOR * frame.curvature_scale()
    return (
        max_abs(frame.schouten)
        + max_abs(nabla_lam)
        + max_abs(lam) ** 2
        + max_abs(cframe.c_ricci)
        + floor
        + 1e-300
    )


def c_ricci_conditions(cframe, metric, scale=1.0):
    """Residual norms of antisym(R_ab) = 0 and sym(R_ab) - (1/4) g_ab R = 0,
    divided by ``scale`` (pass 1.0 for raw norms)."""
    anti = antisymmetrize(cframe.c_ricci, [0, 1])
    sym = symmetrize(cframe.c_ricci, [0, 1])
    tf = trace_free(sym, metric.g, metric.g_inv)
    return max_abs(anti) / scale, max_abs(tf) / scale


def equivalence_crosscheck(frame, lam, cframe, scale=1.0):
    """Residuals of the two identities tying both criteria together:

    E_ab = TF[(1/2) sym(R_ab)] - (1/4) antisym(R_ab)   and
    antisym(C_a Lam_b) = (1/4) antisym(R_ab).
    """
    E = e_tensor(frame, lam)
    sym = symmetrize(cframe.c_ricci, [0, 1])
    anti = antisymmetrize(cframe.c_ricci, [0, 1])
    rhs = trace_free(sym * 0.5, frame.metric.g, frame.metric.g_inv) - anti * 0.25
    cl_anti = antisymmetrize(cframe.c_nabla_lambda, [0, 1])
    identity = max_abs(E.truncate(rhs.degree) - rhs) / scale
    cl_identity = max_abs(cl_anti.truncate(anti.degree) - anti * 0.25) / scale
    return identity, cl_identity


@dataclass(frozen=True)
class PointVerdict:
    point: tuple
    status: str  # pass | fail | degenerate
    cdotc_value: float
    e_ab_residual: float = None
    c_ricci_antisym_residual: float = None
    c_ricci_tracefree_residual: float = None
    crosscheck_residual: float = None


@dataclass(frozen=True)
class Report:
    metric_id: str
    tolerance: float
    points: tuple
    verdicts: tuple
    point_errors: tuple  # (point, message) pairs for evaluation domain errors
    aggregate: str  # conformally-einstein | not-conformally-einstein | inconclusive
    max_e_residual: float
    max_c_ricci_residual: float
    max_crosscheck_residual: float


def _evaluate_point(spec, point, tolerance, conformal):
    frame = spec.frame_at(point, conformal=conformal)
    if weyl_degenerate(frame):
        return PointVerdict(point=tuple(point), status="degenerate", cdotc_value=frame.cdotc.value)
    lam = lambda_field(frame)
    cframe = c_connection(frame, lam)
    scale = residual_scale(frame, lam, cframe)
    e_res = max_abs(e_tensor(frame, lam)) / scale
    anti_res, tf_res = c_ricci_conditions(cframe, frame.metric, scale)
    cross, cl_cross = equivalence_crosscheck(frame, lam, cframe, scale)
    ok = e_res <= tolerance and anti_res <= tolerance and tf_res <= tolerance
    return PointVerdict(
        point=tuple(point),
        status="pass" if ok else "fail",
        cdotc_value=frame.cdotc.value,
        e_ab_residual=e_res,
        c_ricci_antisym_residual=anti_res,
        c_ricci_tracefree_residual=tf_res,
        crosscheck_residual=max(cross, cl_cross),
    )


def _worker_count(points, workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("EINCHECK_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, min(len(points), os.cpu_count() or 1, 4))


def decide(spec, points, tolerance=DEFAULT_TOLERANCE, conformal=None, workers=None):
    """Run the conformal-Einstein test at each sample point and aggregate.

    ``conformal`` optionally rescales the metric by Theta^2 before testing
    (the verdict must not change, by conformal invariance).  Points where the
    metric expressions leave their domain are excluded from the aggregate and
    reported separately; points with vanishing Weyl scalar count as
    degenerate.  The verdict is local to the sampled points.
    """
    points = [tuple(float(x) for x in p) for p in points]
    if not points:
        raise EincheckError("need at least one sample point")
    if not 0.0 < tolerance < 1.0:
        raise EincheckError("tolerance must lie in (0, 1)")

    def run(point):
        try:
            return _evaluate_point(spec, point, tolerance, conformal)
        except (EvalDomainError, DegenerateWeylError) as err:
            if isinstance(err, DegenerateWeylError):
                return PointVerdict(point=point, status="degenerate", cdotc_value=0.0)
            return (point, str(err))
        except EincheckError as err:
            return (point, str(err))

    count = _worker_count(points, workers)
    if count == 1:
        results = [run(p) for p in points]
    else:
        with ThreadPoolExecutor(max_workers=count) as pool:
            results = list(pool.map(run, points))

    verdicts = tuple(r for r in results if isinstance(r, PointVerdict))
    errors = tuple(r for r in results if not isinstance(r, PointVerdict))
    evaluated = [v for v in verdicts if v.status != "degenerate"]
    if any(v.status == "fail" for v in evaluated):
        aggregate = "not-conformally-einstein"
    elif evaluated:
        aggregate = "conformally-einstein"
    else:
        aggregate = "inconclusive"

    def _max(values):
        values = [v for v in values if v is not None]
        return max(values) if values else 0.0

    return Report(
        metric_id=spec.name,
        tolerance=tolerance,
        points=tuple(points),
        verdicts=verdicts,
        point_errors=errors,
        aggregate=aggregate,
        max_e_residual=_max(v.e_ab_residual for v in verdicts),
        max_c_ricci_residual=_max(
            max(v.c_ricci_antisym_residual, v.c_ricci_tracefree_residual)
            for v in verdicts
            if v.e_ab_residual is not None
        ),
        max_crosscheck_residual=_max(v.crosscheck_residual for v in verdicts),
    )


def random_polynomial_covector(point, rng, degree=MAX_DEGREE):
    """A covector field with random quadratic-polynomial components,
    evaluated as exact jets at the point; used by the commutator self-test."""
    seeds = coordinate_seeds(point, degree)
    entries = []
    for _ in range(4):
        w = Jet4.constant(rng.uniform(-1, 1), seeds[0].base, degree)
        for i in range(4):
            w = w + rng.uniform(-1, 1) * seeds[i]
            for j in range(i, 4):
                w = w + rng.uniform(-1, 1) * seeds[i] * seeds[j]
        entries.append(w)
    return JetTensor.from_jets(0, 1, entries)


def commutator_residual(frame, omega):
    """Normalized residual of the curvature-defining identity
    (nabla_a nabla_b - nabla_b nabla_a) w_c - R_abc^d w_d = 0,
    with the left side evaluated through two nested covariant derivatives."""
    d1 = covariant_derivative(omega, frame.christoffel)
    d2 = covariant_derivative(d1, frame.christoffel)
    comm = d2.data - np.swapaxes(d2.data, 0, 1)
    n = SIZES[d2.degree]
    rhs = bmul(
        frame.riemann.data[..., :n], omega.data[:, None, None, None, :n], d2.degree
    ).sum(axis=0)
    scale = np.max(np.abs(d2.data)) + np.max(np.abs(rhs)) + 1e-300
    return float(np.max(np.abs(comm - rhs))) / scale


def curvature_noise_floor(frame):
    """Magnitude of the terms that cancel inside the curvature formulas,
    times a generous safety factor.  Residual denominators are floored with
    this so that numerically flat points read as clean zeros instead of
    noise-over-noise ratios."""
    gam = frame.christoffel.data
    dgam = np.max(np.abs(gam[..., 1 : SIZES[1]])) if frame.christoffel.degree >= 1 else 0.0
    return 1e-8 * (np.max(np.abs(gam[..., 0])) ** 2 + dgam + frame.curvature_scale() + 1e-292)


def fourd_identity_residual(frame, floor=0.0):
    """Normalized residual of the dimension-four contraction identity
    C_abmp C^{dbmp} = (1/4) delta_a^d C.C."""
    d = frame.weyl_down.degree
    lhs = jet_einsum("abmp,dbmp->ad", frame.weyl_down.data, frame.weyl_up.data, d)
    rhs = 0.25 * np.eye(4)[:, :, None] * frame.cdotc.coeffs[None, None, :]
    scale = np.max(np.abs(lhs)) + abs(frame.cdotc.value) + floor**2 + 1e-300
    return float(np.max(np.abs(lhs - rhs))) / scale


def contracted_bianchi_residual(frame, floor=0.0):
    """Normalized residual of nabla^d C_abdc - 2 nabla_[a L_b]c = 0 (a 4-d
    consequence of the second Bianchi identity)."""
    U = frame.nabla_weyl_down  # (m, a, b, c, d) = nabla_m C_abcd
    d = U.degree
    n = SIZES[d]
    gi = frame.metric.g_inv.data[..., :n]
    X = pair_contract(gi, 1, U.data, 0, d)  # (d', a, b, c, d)
    lhs = np.trace(X, axis1=0, axis2=3)  # contract d' with the third Weyl slot
    NS = frame.nabla_schouten.data[..., :n]  # (m, a', b')
    rhs = NS - np.swapaxes(NS, 0, 1)
    # both sides vanish identically in vacuum; normalize by the magnitudes
    # actually summed, not by the outputs
    gam_scale = np.max(np.abs(frame.christoffel.data[..., 0]))
    scale = (
        np.max(np.abs(U.data[..., 0])) * np.max(np.abs(gi[..., 0]))
        + np.max(np.abs(NS[..., 0]))
        + floor * (1.0 + gam_scale)
        + 1e-300
    )
    return float(np.max(np.abs(lhs - rhs))) / scale


def invariant_residuals(spec, point, conformal=None, covectors=10, seed=20240801):
    """The full per-point property suite, as an ordered name -> residual map.

    Entries that require the Lambda field are omitted when the Weyl scalar is
    degenerate at the point (reported via the 'weyl_degenerate' entry).
    """
    frame = spec.frame_at(point, conformal=conformal)
    g, gi = frame.metric.g, frame.metric.g_inv
    floor = curvature_noise_floor(frame)
    out = {}

    prod = jet_einsum("ab,bc->ac", g.data, gi.data, g.degree)
    delta = np.eye(4)[:, :, None] * np.eye(1, SIZES[g.degree])[0]
    gscale = np.max(np.abs(g.data)) * np.max(np.abs(gi.data)) + 1e-300
    out["metric_inverse"] = float(np.max(np.abs(prod - delta))) / gscale

    gam = frame.christoffel
    out["christoffel_symmetry"] = float(
        np.max(np.abs(gam.data - np.swapaxes(gam.data, 1, 2)))
    ) / (np.max(np.abs(gam.data)) + 1e-300)

    R = frame.riemann
    rscale = max_abs(R) + floor
    out["riemann_antisymmetry"] = float(
        np.max(np.abs(R.data + np.swapaxes(R.data, 1, 2)))
    ) / rscale
    out["first_bianchi"] = max_abs(antisymmetrize(R, [1, 2, 3])) / rscale
    ricci_t = JetTensor(0, 2, R.base, frame.ricci.degree, np.swapaxes(frame.ricci.data, 0, 1))
    out["ricci_symmetry"] = max_abs(frame.ricci - ricci_t) / (max_abs(frame.ricci) + rscale)

    traces = [max_abs(contract(frame.weyl_ud, 0, j)) for j in range(3)]
    gtrace = jet_einsum("ac,abcd->bd", gi.data[..., : SIZES[R.degree]], frame.weyl_down.data, R.degree)
    traces.append(float(np.max(np.abs(gtrace[..., 0]))))
    out["weyl_trace_free"] = max(traces) / (max_abs(frame.weyl_down) + rscale)

    grad_g = covariant_derivative(g, gam)
    out["metricity"] = max_abs(grad_g) / (
        np.max(np.abs(gam.data[..., 0])) * np.max(np.abs(g.data[..., 0])) + 1e-300
    )

    sch_trace = jet_einsum(
        "ab,ab->", gi.data[..., : SIZES[frame.schouten.degree]], frame.schouten.data,
        frame.schouten.degree,
    )
    out["schouten_trace"] = float(np.max(np.abs(sch_trace - frame.scalar_R.coeffs / 6.0))) / (
        abs(frame.scalar_R.value) + max_abs(frame.ricci) + rscale
    )

    rng = np.random.default_rng(seed)
    out["curvature_commutator"] = max(
        commutator_residual(frame, random_polynomial_covector(point, rng))
        for _ in range(covectors)
    )
    out["fourd_identity"] = fourd_identity_residual(frame, floor)
    out["contracted_bianchi"] = contracted_bianchi_residual(frame, floor)

    degenerate = weyl_degenerate(frame)
    out["weyl_degenerate"] = 1.0 if degenerate else 0.0
    if not degenerate:
        lam = lambda_field(frame)
        cframe = c_connection(frame, lam)
        scale = residual_scale(frame, lam, cframe)
        out["c_curvature_two_path"] = cframe.two_path_residual
        cross, cl_cross = equivalence_crosscheck(frame, lam, cframe, scale)
        out["criteria_equivalence"] = cross
        out["clambda_quarter_antisym"] = cl_cross
    return out
