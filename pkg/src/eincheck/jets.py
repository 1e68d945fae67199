"""Truncated multivariate Taylor arithmetic in four variables.

A jet stores, for one scalar function f and one base point x0, the Taylor
coefficients c_alpha = d^alpha f(x0) / alpha! for every multi-index alpha with
|alpha| <= degree.  With this normalization the product of two jets is a plain
truncated convolution, with no binomial bookkeeping, which keeps the hot loop
a single fused gather/matmul over precomputed index tables.

Multi-indices are ordered graded-lexicographically, so the coefficients of a
degree-d jet are a prefix of the coefficients of any higher-degree jet and
truncation is array slicing.

The ``b``-prefixed functions operate on raw coefficient arrays whose trailing
axis is the coefficient axis; any leading axes broadcast.  They are the
backbone of the tensor module, which stacks 4^rank jets into one array.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegreeBudgetError, JetError

NVARS = 4
MAX_DEGREE = 4


def _graded_indices(max_degree):
    out = []
    for total in range(max_degree + 1):
        for a in range(total, -1, -1):
            for b in range(total - a, -1, -1):
                for c in range(total - a - b, -1, -1):
                    out.append((a, b, c, total - a - b - c))
    return tuple(out)


#: All multi-indices with |alpha| <= 4, graded: indices of total degree d form
#: the contiguous block SIZES[d-1]:SIZES[d].
ALL_INDICES = _graded_indices(MAX_DEGREE)
INDEX_OF = {alpha: i for i, alpha in enumerate(ALL_INDICES)}
SIZES = tuple(math.comb(d + NVARS, NVARS) for d in range(MAX_DEGREE + 1))


def ncoeffs(degree):
    """Number of stored coefficients at the given degree budget (70 at 4)."""
    return SIZES[degree]


def _build_mul_table(degree):
    n = SIZES[degree]
    left, right, target = [], [], []
    for i in range(n):
        ai = ALL_INDICES[i]
        di = sum(ai)
        for j in range(n):
            aj = ALL_INDICES[j]
            if di + sum(aj) <= degree:
                left.append(i)
                right.append(j)
                target.append(INDEX_OF[tuple(x + y for x, y in zip(ai, aj))])
    scatter = np.zeros((len(left), n))
    scatter[np.arange(len(left)), target] = 1.0
    return np.asarray(left, dtype=np.intp), np.asarray(right, dtype=np.intp), scatter


_MUL = tuple(_build_mul_table(d) for d in range(MAX_DEGREE + 1))


def _build_partial_table(degree, direction):
    n_out = SIZES[degree - 1]
    src = np.empty(n_out, dtype=np.intp)
    weight = np.empty(n_out)
    for k in range(n_out):
        alpha = ALL_INDICES[k]
        bumped = list(alpha)
        bumped[direction] += 1
        src[k] = INDEX_OF[tuple(bumped)]
        weight[k] = alpha[direction] + 1
    return src, weight


_PARTIAL = tuple(
    tuple(_build_partial_table(d, i) for i in range(NVARS))
    for d in range(1, MAX_DEGREE + 1)
)


def bmul(a, b, degree):
    """Truncated convolution of coefficient arrays; leading axes broadcast.

    Both inputs must already be sliced to ``ncoeffs(degree)`` coefficients.
    """
    left, right, scatter = _MUL[degree]
    return (a[..., left] * b[..., right]) @ scatter


def bpartial(a, degree, direction):
    """Coefficient array of the partial derivative; degree drops by one."""
    if degree < 1:
        raise DegreeBudgetError("cannot differentiate a degree-0 jet")
    src, weight = _PARTIAL[degree - 1][direction]
    return a[..., src] * weight


def brecip(b, degree):
    """Pointwise reciprocal 1/f as a coefficient array.

    Uses the geometric series of 1/(c+h) in h = f - c composed by Horner;
    exact within the budget because h is nilpotent under truncation.
    """
    const = b[..., :1]
    if np.any(const == 0.0):
        raise JetError("division by a jet with zero constant term")
    h = b.copy()
    h[..., 0] = 0.0
    inv = 1.0 / const
    out = np.zeros(b.shape, dtype=float)
    out[..., :1] = (-1.0) ** degree * inv ** (degree + 1)
    for k in range(degree - 1, -1, -1):
        out = bmul(out, h, degree)
        out[..., :1] += (-1.0) ** k * inv ** (k + 1)
    return out


def bdiv(a, b, degree):
    return bmul(a, brecip(b, degree), degree)


class Jet4:
    """Degree-budgeted Taylor expansion of a scalar function at one point.

    Immutable by convention.  Arithmetic between jets requires an identical
    base point; the result degree is the minimum of the operand degrees, which
    is how the geometry pipeline's derivative budget is enforced.
    """

    __slots__ = ("base", "degree", "coeffs")

    def __init__(self, base, degree, coeffs):
        if not 0 <= degree <= MAX_DEGREE:
            raise DegreeBudgetError(f"degree {degree} outside 0..{MAX_DEGREE}")
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (SIZES[degree],):
            raise JetError(
                f"degree-{degree} jet needs {SIZES[degree]} coefficients, got {coeffs.shape}"
            )
        self.base = tuple(float(x) for x in base)
        if len(self.base) != NVARS:
            raise JetError("base point must have 4 components")
        self.degree = degree
        self.coeffs = coeffs

    @classmethod
    def constant(cls, value, base, degree):
        coeffs = np.zeros(SIZES[degree])
        coeffs[0] = value
        return cls(base, degree, coeffs)

    @property
    def value(self):
        """Constant term, i.e. f(base)."""
        return float(self.coeffs[0])

    def coeff(self, alpha):
        """Taylor coefficient for multi-index alpha (d^alpha f / alpha!)."""
        alpha = tuple(alpha)
        if sum(alpha) > self.degree:
            raise DegreeBudgetError(f"multi-index {alpha} beyond degree {self.degree}")
        return float(self.coeffs[INDEX_OF[alpha]])

    def derivative(self, alpha):
        """Plain partial derivative d^alpha f(base)."""
        alpha = tuple(alpha)
        scale = 1.0
        for a in alpha:
            scale *= math.factorial(a)
        return self.coeff(alpha) * scale

    def truncate(self, degree):
        if degree > self.degree:
            raise DegreeBudgetError(
                f"cannot extend degree {self.degree} jet to degree {degree}"
            )
        if degree == self.degree:
            return self
        return Jet4(self.base, degree, self.coeffs[: SIZES[degree]].copy())

    def partial(self, direction):
        return partial(self, direction)

    def _coerce(self, other):
        if isinstance(other, Jet4):
            if other.base != self.base:
                raise JetError("jet base points differ")
            return other
        if isinstance(other, (int, float)):
            return Jet4.constant(float(other), self.base, self.degree)
        return None

    def _pair(self, other):
        other = self._coerce(other)
        if other is None:
            return None, None, None
        d = min(self.degree, other.degree)
        return self.coeffs[: SIZES[d]], other.coeffs[: SIZES[d]], d

    def __add__(self, other):
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, a - b)

    def __rsub__(self, other):
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, b - a)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Jet4(self.base, self.degree, self.coeffs * float(other))
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, bmul(a, b, d))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return Jet4(self.base, self.degree, self.coeffs / float(other))
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, bdiv(a, b, d))

    def __rtruediv__(self, other):
        a, b, d = self._pair(other)
        if a is None:
            return NotImplemented
        return Jet4(self.base, d, bdiv(b, a, d))

    def __neg__(self):
        return Jet4(self.base, self.degree, -self.coeffs)

    def __pow__(self, exponent):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent == 0:
            return Jet4.constant(1.0, self.base, self.degree)
        out = ipow(self, abs(exponent))
        if exponent < 0:
            out = Jet4(self.base, out.degree, brecip(out.coeffs, out.degree))
        return out

    def __repr__(self):
        return f"Jet4(base={self.base}, degree={self.degree}, value={self.value:.6g})"


def seed_coordinate(i, base, degree):
    """Jet of the i-th coordinate function: constant base[i], unit slope e_i."""
    if not 0 <= i < NVARS:
        raise JetError(f"coordinate index {i} outside 0..3")
    if not 0 <= degree <= MAX_DEGREE:
        raise DegreeBudgetError(f"degree {degree} outside 0..{MAX_DEGREE}")
    coeffs = np.zeros(SIZES[degree])
    coeffs[0] = base[i]
    if degree >= 1:
        unit = [0, 0, 0, 0]
        unit[i] = 1
        coeffs[INDEX_OF[tuple(unit)]] = 1.0
    return Jet4(base, degree, coeffs)


def coordinate_seeds(point, degree=MAX_DEGREE):
    """The four coordinate jets at one point, the inputs to every evaluation."""
    return tuple(seed_coordinate(i, point, degree) for i in range(NVARS))


def arith(a, b, op):
    """Strict binary operation: equal base point and equal degree required."""
    if not isinstance(a, Jet4) or not isinstance(b, Jet4):
        raise JetError("arith expects two jets")
    if a.base != b.base:
        raise JetError("jet base points differ")
    if a.degree != b.degree:
        raise JetError(f"jet degrees differ ({a.degree} vs {b.degree})")
    try:
        return {"add": a.__add__, "sub": a.__sub__, "mul": a.__mul__, "div": a.__truediv__}[op](b)
    except KeyError:
        raise JetError(f"unknown operation {op!r}") from None


def partial(j, direction):
    """Jet of df/dx_direction; the degree budget drops by one."""
    if not 0 <= direction < NVARS:
        raise JetError(f"direction {direction} outside 0..3")
    return Jet4(j.base, j.degree - 1, bpartial(j.coeffs, j.degree, direction))


def ipow(j, n):
    """j**n for n >= 1 by binary exponentiation (exact, no log/exp detour)."""
    result = None
    square = j
    while n:
        if n & 1:
            result = square if result is None else result * square
        square = square * square
        n >>= 1
    return result


def compose_univariate(series, inner):
    """Compose a univariate Taylor series with a jet.

    ``series[k]`` is the coefficient of (x - inner.value)**k, i.e. the series
    is developed at the inner jet's constant term.  Composition is Horner in
    h = inner - inner.value, which has no constant term, so truncation at the
    budget is exact.
    """
    d = inner.degree
    if len(series) < d + 1:
        raise JetError(f"need {d + 1} series coefficients, got {len(series)}")
    h = inner - inner.value
    acc = Jet4.constant(float(series[d]), inner.base, d)
    for k in range(d - 1, -1, -1):
        acc = acc * h + float(series[k])
    return acc
