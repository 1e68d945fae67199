"""Independent oracles for the test suite.

Everything in this file deliberately avoids the jet/tensor pipeline: plain
float evaluation of expression ASTs with math.*, and central finite
differences on top of that.  Tests compare package output against these,
so the two sides never share a code path beyond the parsed AST itself.
"""

from __future__ import annotations

import math

import numpy as np

from eincheck import expr as ex

_FUNCS = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sinh": math.sinh,
    "cosh": math.cosh,
    "tanh": math.tanh,
    "sqrt": math.sqrt,
    "neg": lambda v: -v,
}


def eval_float(node, point, params):
    """Evaluate an AST on plain floats."""
    if isinstance(node, ex.Const):
        return float(node.value)
    if isinstance(node, ex.Coord):
        return float(point[node.index])
    if isinstance(node, ex.Param):
        return float(params[node.name])
    if isinstance(node, ex.Unary):
        return -eval_float(node.operand, point, params)
    if isinstance(node, ex.Binary):
        left = eval_float(node.left, point, params)
        right = eval_float(node.right, point, params)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        if node.op == "/":
            return left / right
        return left**right
    if isinstance(node, ex.Call):
        if node.func == "pow":
            return eval_float(node.args[0], point, params) ** eval_float(node.args[1], point, params)
        return _FUNCS[node.func](eval_float(node.args[0], point, params))
    raise TypeError(node)


def expr_fn(expr, params=None):
    params = dict(params or {})
    return lambda point: eval_float(expr.root, point, params)


def fd_derivative(f, point, alpha, steps):
    """Central-difference mixed partial d^alpha f at point.

    ``steps[i]`` is the step used for direction i; each order of
    differentiation applies one central difference (2^|alpha| evaluations).
    """
    alpha = list(alpha)
    for i in range(4):
        if alpha[i] > 0:
            alpha[i] -= 1
            h = steps[i]

            def reduced(x, _i=i, _h=h, _alpha=tuple(alpha)):
                xp = list(x)
                xm = list(x)
                xp[_i] += _h
                xm[_i] -= _h
                return (fd_derivative(f, xp, _alpha, steps) - fd_derivative(f, xm, _alpha, steps)) / (2 * _h)

            return reduced(point)
    return f(point)


#: steps tuned per total derivative order; higher orders need wider stencils
#: to beat roundoff amplification eps / h^k.
FD_STEPS = {1: 1e-6, 2: 8e-5, 3: 8e-4, 4: 5e-3}


def fd_derivative_for_order(f, point, alpha):
    order = sum(alpha)
    h = FD_STEPS[order]
    return fd_derivative(f, point, alpha, [h] * 4)


def metric_fn(spec):
    """point -> 4x4 float metric matrix, via direct evaluation."""
    fns = [[expr_fn(spec.components[i][j], spec.parameters) for j in range(4)] for i in range(4)]

    def g(point):
        return np.array([[fns[i][j](point) for j in range(4)] for i in range(4)])

    return g


def fd_christoffel(gfn, point, h=1e-6):
    """Levi-Civita coefficients from finite differences of the metric."""
    g0 = gfn(point)
    gi = np.linalg.inv(g0)
    dg = np.empty((4, 4, 4))
    for m in range(4):
        xp, xm = list(point), list(point)
        xp[m] += h
        xm[m] -= h
        dg[m] = (gfn(xp) - gfn(xm)) / (2 * h)
    lower = 0.5 * (
        np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - np.einsum("dbc->dbc", dg)
    )
    return np.einsum("ad,dbc->abc", gi, lower)


def fd_riemann(gfn, point, h=1e-4, h_inner=1e-6):
    """R_abc^d (axes [d,a,b,c]) from finite differences of the connection.

    Same commutator sign convention as the package; the formula is restated
    here rather than imported so the code paths stay disjoint.
    """
    gamma0 = fd_christoffel(gfn, point, h_inner)
    dgamma = np.empty((4, 4, 4, 4))
    for m in range(4):
        xp, xm = list(point), list(point)
        xp[m] += h
        xm[m] -= h
        dgamma[m] = (fd_christoffel(gfn, xp, h_inner) - fd_christoffel(gfn, xm, h_inner)) / (2 * h)
    # R[d,a,b,c] = d_b Gamma^d_ac - d_a Gamma^d_bc + Gamma^f_ac Gamma^d_bf - Gamma^f_bc Gamma^d_af
    term = np.einsum("bdac->dabc", dgamma) - np.einsum("adbc->dabc", dgamma)
    gg = np.einsum("fac,dbf->dabc", gamma0, gamma0)
    return term + gg - np.einsum("dabc->dbac", gg)


def fd_ricci(gfn, point, h=1e-4):
    """R_ac = R_abc^b from the finite-difference curvature."""
    riem = fd_riemann(gfn, point, h)  # [d, a, b, c]
    return np.einsum("babc->ac", riem)


def fd_kretschmann(gfn, point, h=1e-4):
    """R_abcd R^abcd from the finite-difference curvature."""
    g0 = gfn(point)
    gi = np.linalg.inv(g0)
    riem = fd_riemann(gfn, point, h)  # [d, a, b, c]
    down = np.einsum("dabc,de->abce", riem, g0)  # R_abc e
    up = np.einsum("abce,am,bn,cp,eq->mnpq", down, gi, gi, gi, gi)
    return float(np.einsum("abce,abce->", down, up))
