"""B-spline bases, tensor-product surfaces and the wall repulsion potential.

The potential surface is ``H(x, y) = sum_kl gamma_kl phi_k(x) psi_l(y) + R(x, y)``
and the motility surface ``M(x, y) = sum_qr alpha_qr phi_q(x) psi_r(y)``; both
share one pair of clamped B-spline bases.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .errors import DomainError, NumericError, ArgumentError

__all__ = [
    "SplineBasis",
    "TensorSurface",
    "WallField",
    "AnalyticField",
    "basis_eval_with_deriv",
    "surface_eval",
    "surface_grad",
    "wall_eval_grad",
    "potential_grad",
    "sum_to_zero",
    "write_surface_grid",
    "write_coefficients",
    "read_coefficients",
]

# Field kinds understood by the compiled kernels.
KIND_ZERO = 0
KIND_CONST = 1
KIND_SPLINE = 2
KIND_QUADRATIC = 3
KIND_QUADRANT = 4
KIND_DIAMOND = 5
KIND_RECTS = 6

_EMPTY = np.zeros(1)
_EMPTY2 = np.zeros((1, 1))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit
def _find_span(knots, order, u):
    n = knots.shape[0] - order
    if u >= knots[n]:
        # right end of the domain belongs to the last non-empty span
        span = n - 1
        while span > order - 1 and knots[span] == knots[span + 1]:
            span -= 1
        return span
    lo = order - 1
    hi = n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if u < knots[mid]:
            hi = mid
        else:
            lo = mid
    return lo


@njit
def _basis_funs(knots, order, u, w, dw):
    """Nonzero basis values/derivatives at ``u``; returns the first index."""
    p = order - 1
    span = _find_span(knots, order, u)
    left = np.empty(order)
    right = np.empty(order)
    low = np.zeros(order)
    w[0] = 1.0
    for j in range(1, order):
        left[j] = u - knots[span + 1 - j]
        right[j] = knots[span + j] - u
        saved = 0.0
        for r in range(j):
            temp = w[r] / (right[r + 1] + left[j - r])
            w[r] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        w[j] = saved
        if j == p - 1:
            for r in range(j + 1):
                low[r] = w[r]
    if p == 0:
        for r in range(order):
            dw[r] = 0.0
        return span
    if p == 1:
        low[0] = 1.0
    first = span - p
    for r in range(order):
        j = first + r
        d = 0.0
        if r >= 1:
            den = knots[j + p] - knots[j]
            if den > 0.0:
                d += low[r - 1] / den
        if r <= p - 1:
            den = knots[j + p + 1] - knots[j + 1]
            if den > 0.0:
                d -= low[r] / den
        dw[r] = p * d
    return first


@njit
def _tensor_point(kx, ky, order, coeffs, x, y):
    wx = np.empty(order)
    dwx = np.empty(order)
    wy = np.empty(order)
    dwy = np.empty(order)
    ix = _basis_funs(kx, order, x, wx, dwx)
    iy = _basis_funs(ky, order, y, wy, dwy)
    v = 0.0
    gx = 0.0
    gy = 0.0
    for a in range(order):
        for b in range(order):
            c = coeffs[ix + a, iy + b]
            v += c * wx[a] * wy[b]
            gx += c * dwx[a] * wy[b]
            gy += c * wx[a] * dwy[b]
    return v, gx, gy


@njit
def _clamp(u, lo, hi):
    if u < lo:
        return lo
    if u > hi:
        return hi
    return u


@njit
def _field_point(kind, params, kx, ky, order, coeffs, x, y):
    """Value and gradient of a packed field at (x, y)."""
    if kind == KIND_ZERO:
        return 0.0, 0.0, 0.0
    if kind == KIND_CONST:
        return params[0], 0.0, 0.0
    if kind == KIND_SPLINE:
        # clamped to the spline box; gradient of the clamped surface is kept
        xc = _clamp(x, kx[order - 1], kx[kx.shape[0] - order])
        yc = _clamp(y, ky[order - 1], ky[ky.shape[0] - order])
        return _tensor_point(kx, ky, order, coeffs, xc, yc)
    if kind == KIND_QUADRATIC:
        ax = params[0]
        ay = params[1]
        x0 = params[2]
        y0 = params[3]
        dx = x - x0
        dy = y - y0
        return ax * dx * dx + ay * dy * dy, 2.0 * ax * dx, 2.0 * ay * dy
    if kind == KIND_QUADRANT:
        if x > 0.0 and y > 0.0:
            return params[0], 0.0, 0.0
        return params[1], 0.0, 0.0
    if kind == KIND_DIAMOND:
        c0 = params[0]
        s = params[1]
        v = c0 - s * (abs(x) + abs(y))
        if v <= 0.0:
            return 0.0, 0.0, 0.0
        return v, -s * np.sign(x), -s * np.sign(y)
    if kind == KIND_RECTS:
        # params: base, then (x0, x1, y0, y1, value) per rectangle; first hit wins
        nrect = (params.shape[0] - 1) // 5
        for r in range(nrect):
            o = 1 + 5 * r
            if params[o] <= x < params[o + 1] and params[o + 2] <= y < params[o + 3]:
                return params[o + 4], 0.0, 0.0
        return params[0], 0.0, 0.0
    return np.nan, np.nan, np.nan


@njit
def _wall_point(on, bounds, r1, x, y):
    if not on:
        return 0.0, 0.0, 0.0
    a = np.exp(-r1 * (x - bounds[0]))
    b = np.exp(r1 * (x - bounds[1]))
    c = np.exp(-r1 * (y - bounds[2]))
    d = np.exp(r1 * (y - bounds[3]))
    return a + b + c + d, r1 * (b - a), r1 * (d - c)


@njit
def _field_many(kind, params, kx, ky, order, coeffs, xs, ys, out):
    for i in range(xs.shape[0]):
        v, gx, gy = _field_point(kind, params, kx, ky, order, coeffs, xs[i], ys[i])
        out[i, 0] = v
        out[i, 1] = gx
        out[i, 2] = gy


@njit
def _design_rows(kx, ky, order, xs, ys, idx, bv, bdx, bdy, nbx, nby):
    """Sparse tensor design: each row holds order**2 column indices and values."""
    wx = np.empty(order)
    dwx = np.empty(order)
    wy = np.empty(order)
    dwy = np.empty(order)
    lox = kx[order - 1]
    hix = kx[kx.shape[0] - order]
    loy = ky[order - 1]
    hiy = ky[ky.shape[0] - order]
    for i in range(xs.shape[0]):
        ix = _basis_funs(kx, order, _clamp(xs[i], lox, hix), wx, dwx)
        iy = _basis_funs(ky, order, _clamp(ys[i], loy, hiy), wy, dwy)
        m = 0
        for a in range(order):
            for b in range(order):
                idx[i, m] = (ix + a) * nby + (iy + b)
                bv[i, m] = wx[a] * wy[b]
                bdx[i, m] = dwx[a] * wy[b]
                bdy[i, m] = wx[a] * dwy[b]
                m += 1


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplineBasis:
    """Clamped B-spline basis of a given order (degree ``order - 1``)."""

    order: int
    knots: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        object.__setattr__(self, "knots", knots)
        knots.setflags(write=False)
        if self.order < 2:
            raise ArgumentError("spline order must be >= 2")
        if np.any(np.diff(knots) < 0):
            raise ArgumentError("knots must be nondecreasing")
        if knots.size - self.order < self.order:
            raise ArgumentError("need at least `order` basis functions")
        if not knots[self.order - 1] < knots[-self.order]:
            raise ArgumentError("empty basis domain")

    @classmethod
    def uniform(cls, lo: float, hi: float, count: int, order: int = 4) -> "SplineBasis":
        """Clamped basis with ``count`` functions and evenly spaced knots on [lo, hi]."""
        if not hi > lo:
            raise ArgumentError(f"invalid basis interval [{lo}, {hi}]")
        if count < order:
            raise ArgumentError(f"count={count} must be >= order={order}")
        inner = np.linspace(lo, hi, count - order + 2)
        knots = np.concatenate([np.full(order - 1, lo), inner, np.full(order - 1, hi)])
        return cls(order, knots)

    @property
    def count(self) -> int:
        return self.knots.size - self.order

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.order - 1]), float(self.knots[-self.order])

    def greville(self) -> np.ndarray:
        """Greville abscissae (knot averages), one per basis function."""
        p = self.order - 1
        return np.array([self.knots[i + 1:i + p + 1].mean() for i in range(self.count)])

    def check(self, u: float, name: str = "u") -> None:
        lo, hi = self.domain
        if not (lo <= u <= hi):
            raise DomainError(f"{name}={u!r} outside basis domain [{lo}, {hi}]")


def basis_eval_with_deriv(basis: SplineBasis, u: float) -> tuple[np.ndarray, np.ndarray]:
    """All ``basis.count`` B-spline values and first derivatives at ``u``."""
    basis.check(u)
    w = np.empty(basis.order)
    dw = np.empty(basis.order)
    first = _basis_funs(basis.knots, basis.order, float(u), w, dw)
    weights = np.zeros(basis.count)
    dweights = np.zeros(basis.count)
    weights[first:first + basis.order] = w
    dweights[first:first + basis.order] = dw
    return weights, dweights


@dataclass(frozen=True)
class TensorSurface:
    """Tensor-product spline ``sum_kl coeffs[k, l] phi_k(x) psi_l(y)``."""

    basis_x: SplineBasis
    basis_y: SplineBasis
    coeffs: np.ndarray
    constrained: bool = False

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        shape = (self.basis_x.count, self.basis_y.count)
        if c.size == shape[0] * shape[1] and c.ndim == 1:
            c = c.reshape(shape)
        if c.shape != shape:
            raise ArgumentError(f"coefficient shape {c.shape} does not match bases {shape}")
        if self.basis_x.order != self.basis_y.order:
            raise ArgumentError("both bases must share one order")
        if self.constrained and abs(c.sum()) > 1e-10:
            raise ArgumentError("constrained surface coefficients must sum to zero")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, basis_x, basis_y, value=0.0):
        return cls(basis_x, basis_y, np.full((basis_x.count, basis_y.count), float(value)))

    @classmethod
    def from_function(cls, basis_x, basis_y, fn):
        """Quasi-interpolant: coefficients are ``fn`` sampled at Greville points."""
        gx, gy = np.meshgrid(basis_x.greville(), basis_y.greville(), indexing="ij")
        return cls(basis_x, basis_y, np.vectorize(fn)(gx, gy).astype(float))

    @property
    def shape(self):
        return self.coeffs.shape

    def _check(self, x, y):
        self.basis_x.check(x, "x")
        self.basis_y.check(y, "y")

    def evaluate(self, x: float, y: float) -> float:
        self._check(x, y)
        return _tensor_point(self.basis_x.knots, self.basis_y.knots, self.basis_x.order,
                             self.coeffs, float(x), float(y))[0]

    def gradient(self, x: float, y: float) -> tuple[float, float]:
        self._check(x, y)
        _, gx, gy = _tensor_point(self.basis_x.knots, self.basis_y.knots,
                                  self.basis_x.order, self.coeffs, float(x), float(y))
        return gx, gy

    def evaluate_many(self, xs, ys, clamp: bool = False) -> np.ndarray:
        """Values and gradients at many points, shape (n, 3): value, gx, gy."""
        xs = np.ascontiguousarray(xs, dtype=float).ravel()
        ys = np.ascontiguousarray(ys, dtype=float).ravel()
        if not clamp:
            for name, u, b in (("x", xs, self.basis_x), ("y", ys, self.basis_y)):
                lo, hi = b.domain
                bad = (u < lo) | (u > hi)
                if bad.any():
                    raise DomainError(f"{name}={u[bad][0]!r} outside basis domain [{lo}, {hi}]")
        out = np.empty((xs.size, 3))
        _field_many(KIND_SPLINE, _EMPTY, self.basis_x.knots, self.basis_y.knots,
                    self.basis_x.order, self.coeffs, xs, ys, out)
        return out

    def packed(self):
        return (KIND_SPLINE, _EMPTY, self.basis_x.knots, self.basis_y.knots,
                self.basis_x.order, self.coeffs)

    def with_coeffs(self, coeffs, constrained=None) -> "TensorSurface":
        return TensorSurface(self.basis_x, self.basis_y, coeffs,
                             self.constrained if constrained is None else constrained)


@dataclass(frozen=True)
class AnalyticField:
    """Closed-form surface used to drive simulations.

    ``kind`` is one of ``zero``, ``constant``, ``quadratic``, ``quadrant``,
    ``diamond`` or ``rects``; see :meth:`from_spec` for the parameters.
    """

    kind: str
    params: tuple = ()
    _code: int = field(init=False, repr=False, compare=False, default=0)

    _CODES = {"zero": KIND_ZERO, "constant": KIND_CONST, "quadratic": KIND_QUADRATIC,
              "quadrant": KIND_QUADRANT, "diamond": KIND_DIAMOND, "rects": KIND_RECTS}

    def __post_init__(self):
        if self.kind not in self._CODES:
            raise ArgumentError(f"unknown field kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        object.__setattr__(self, "_code", self._CODES[self.kind])

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def constant(cls, value):
        return cls("constant", (value,))

    @classmethod
    def quadratic(cls, ax, ay, x0=0.0, y0=0.0):
        return cls("quadratic", (ax, ay, x0, y0))

    @classmethod
    def quadrant(cls, inside, outside):
        """``inside`` for x > 0 and y > 0, ``outside`` elsewhere."""
        return cls("quadrant", (inside, outside))

    @classmethod
    def diamond(cls, peak, slope):
        """``max(peak - slope * (|x| + |y|), 0)``."""
        return cls("diamond", (peak, slope))

    @classmethod
    def rects(cls, base, rects):
        """Piecewise constant: ``value`` on each ``(x0, x1, y0, y1, value)``, ``base`` elsewhere."""
        flat = [base]
        for r in rects:
            if len(r) != 5:
                raise ArgumentError("rectangle entries are (x0, x1, y0, y1, value)")
            flat.extend(r)
        return cls("rects", tuple(flat))

    @classmethod
    def from_spec(cls, spec: dict) -> "AnalyticField":
        kind = spec["kind"]
        if kind == "zero":
            return cls.zero()
        if kind == "constant":
            return cls.constant(spec["value"])
        if kind == "quadratic":
            return cls.quadratic(spec["ax"], spec["ay"], spec.get("x0", 0.0), spec.get("y0", 0.0))
        if kind == "quadrant":
            return cls.quadrant(spec["inside"], spec["outside"])
        if kind == "diamond":
            return cls.diamond(spec["peak"], spec["slope"])
        if kind == "rects":
            return cls.rects(spec["base"], spec["rects"])
        raise ArgumentError(f"unknown field kind {kind!r}")

    def to_spec(self) -> dict:
        p = self.params
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "constant":
            return {"kind": "constant", "value": p[0]}
        if self.kind == "quadratic":
            return {"kind": "quadratic", "ax": p[0], "ay": p[1], "x0": p[2], "y0": p[3]}
        if self.kind == "quadrant":
            return {"kind": "quadrant", "inside": p[0], "outside": p[1]}
        if self.kind == "diamond":
            return {"kind": "diamond", "peak": p[0], "slope": p[1]}
        rects = [list(p[1 + 5 * i:6 + 5 * i]) for i in range((len(p) - 1) // 5)]
        return {"kind": "rects", "base": p[0], "rects": rects}

    def packed(self):
        return (self._code, np.array(self.params if self.params else (0.0,)), _EMPTY, _EMPTY,
                2, _EMPTY2)

    def evaluate(self, x, y):
        return _field_point(*self.packed(), float(x), float(y))[0]

    def gradient(self, x, y):
        _, gx, gy = _field_point(*self.packed(), float(x), float(y))
        return gx, gy

    def evaluate_many(self, xs, ys, clamp=True):
        xs = np.ascontiguousarray(xs, dtype=float).ravel()
        ys = np.ascontiguousarray(ys, dtype=float).ravel()
        out = np.empty((xs.size, 3))
        _field_many(*self.packed(), xs, ys, out)
        return out


def surface_from_spec(spec: dict, basis_x: SplineBasis | None = None,
                      basis_y: SplineBasis | None = None):
    """Build a field from a JSON-style dict.

    ``{"kind": "spline", "nx": 8, "ny": 8, "domain": [x0, x1, y0, y1], "coeffs": [[...]]}``
    builds a :class:`TensorSurface`; ``"from": {...analytic spec...}`` instead of
    ``coeffs`` quasi-interpolates an analytic field. Other kinds map to
    :class:`AnalyticField`.
    """
    if spec.get("kind") != "spline":
        return AnalyticField.from_spec(spec)
    order = int(spec.get("order", 4))
    if basis_x is None or basis_y is None:
        x0, x1, y0, y1 = spec["domain"]
        basis_x = SplineBasis.uniform(x0, x1, int(spec["nx"]), order)
        basis_y = SplineBasis.uniform(y0, y1, int(spec["ny"]), order)
    if "coeffs" in spec:
        return TensorSurface(basis_x, basis_y, np.asarray(spec["coeffs"], dtype=float))
    if "value" in spec:
        return TensorSurface.constant(basis_x, basis_y, spec["value"])
    inner = AnalyticField.from_spec(spec["from"])
    return TensorSurface.from_function(basis_x, basis_y, inner.evaluate)


def field_to_spec(f) -> dict:
    if isinstance(f, AnalyticField):
        return f.to_spec()
    lo_x, hi_x = f.basis_x.domain
    lo_y, hi_y = f.basis_y.domain
    return {"kind": "spline", "order": f.basis_x.order, "nx": f.basis_x.count,
            "ny": f.basis_y.count, "domain": [lo_x, hi_x, lo_y, hi_y],
            "coeffs": f.coeffs.tolist()}


def surface_eval(s: TensorSurface, x: float, y: float) -> float:
    return s.evaluate(x, y)


def surface_grad(s: TensorSurface, x: float, y: float) -> tuple[float, float]:
    """Raw gradient ``(dS/dx, dS/dy)``; callers negate for drift."""
    return s.gradient(x, y)


@dataclass(frozen=True)
class WallField:
    """Four-term exponential wall repulsion on a rectangle.

    ``R = exp(-r1 (x - xl)) + exp(r1 (x - xu)) + exp(-r1 (y - yl)) + exp(r1 (y - yu))``
    """

    bounds: tuple
    decay: float

    def __post_init__(self):
        b = tuple(float(v) for v in self.bounds)
        if len(b) != 4:
            raise ArgumentError("wall bounds are (xl, xu, yl, yu)")
        object.__setattr__(self, "bounds", b)
        if not (b[0] < b[1] and b[2] < b[3]):
            raise ArgumentError(f"invalid wall bounds {b}")
        if not self.decay > 0:
            raise ArgumentError("wall decay r1 must be positive")

    def with_decay(self, decay: float) -> "WallField":
        return WallField(self.bounds, decay)

    def evaluate_many(self, xs, ys) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        xl, xu, yl, yu = self.bounds
        r1 = self.decay
        a = np.exp(-r1 * (xs - xl))
        b = np.exp(r1 * (xs - xu))
        c = np.exp(-r1 * (ys - yl))
        d = np.exp(r1 * (ys - yu))
        return np.stack([a + b + c + d, r1 * (b - a), r1 * (d - c)], axis=-1)


def wall_eval_grad(w: WallField, x: float, y: float) -> tuple[float, float, float]:
    return _wall_point(True, np.asarray(w.bounds), w.decay, float(x), float(y))


def potential_grad(h: TensorSurface, w: WallField | None, x: float, y: float) -> tuple[float, float]:
    """Gradient of the combined potential: spline surface plus wall repulsion."""
    gx, gy = h.gradient(x, y)
    if w is not None:
        _, wx, wy = wall_eval_grad(w, x, y)
        gx += wx
        gy += wy
    return gx, gy


def pack_wall(w: WallField | None):
    if w is None:
        return False, np.zeros(4), 1.0
    return True, np.asarray(w.bounds, dtype=float), float(w.decay)


# ---------------------------------------------------------------------------
# sum-to-zero constraint
# ---------------------------------------------------------------------------

def constrain_with(unconstrained: np.ndarray, cov_ones: np.ndarray) -> np.ndarray:
    """Project onto ``sum == 0`` given ``cov_ones = Sigma @ 1``."""
    denom = cov_ones.sum()
    if not denom > 0:
        raise NumericError(f"1' Sigma 1 = {denom!r} is not positive")
    out = unconstrained - cov_ones * (unconstrained.sum() / denom)
    # remove the rounding residue left by the projection
    return out - out.sum() / out.size


def sum_to_zero(unconstrained, covariance) -> np.ndarray:
    """``g - Sigma 1 (1' Sigma 1)^-1 (1' g)``: conditions a Gaussian draw on a zero sum."""
    g = np.asarray(unconstrained, dtype=float)
    cov = np.asarray(covariance, dtype=float)
    if cov.shape != (g.size, g.size):
        raise ArgumentError(f"covariance shape {cov.shape} does not match vector length {g.size}")
    return constrain_with(g, cov.sum(axis=1))


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_surface_grid(path, surface, xs, ys, wall: WallField | None = None,
                       with_grad: bool = True) -> None:
    """Write ``x,y,value[,gx,gy]`` on the grid ``xs`` x ``ys``."""
    gx, gy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    vals = surface.evaluate_many(gx.ravel(), gy.ravel())
    if wall is not None:
        vals = vals + wall.evaluate_many(gx.ravel(), gy.ravel())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "value", "gx", "gy"] if with_grad else ["x", "y", "value"])
        for px, py, row in zip(gx.ravel(), gy.ravel(), vals):
            w.writerow([repr(float(px)), repr(float(py))]
                       + [repr(float(v)) for v in (row if with_grad else row[:1])])


def write_coefficients(path, coeffs) -> None:
    """Row-major ``k,l,coeff`` listing of a coefficient matrix."""
    c = np.asarray(coeffs, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "l", "coeff"])
        for k in range(c.shape[0]):
            for l in range(c.shape[1]):
                w.writerow([k, l, repr(float(c[k, l]))])


def read_coefficients(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    k = np.array([int(r["k"]) for r in rows])
    l = np.array([int(r["l"]) for r in rows])
    out = np.zeros((k.max() + 1, l.max() + 1))
    out[k, l] = [float(r["coeff"]) for r in rows]
    return out
