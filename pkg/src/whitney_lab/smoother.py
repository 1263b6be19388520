"""Cardinal B-splines, B-spline averaging operators, and K-functional brackets.

The univariate averaging operator of order k at scale t adds to the function
an integral of its k-th differences against the cardinal B-spline:

    (A_t f)(x) = f(x) + (-1)^(k+1) * integral of diff_k(f, x; t h) M_k(h) dh,

with M_k supported on [0, k].  It reproduces polynomials of coordinate degree
below k, and its k-th derivative collapses to a finite combination of k-th
differences, which is how derivative norms of the smoothed function are
computed here without ever differentiating numerically.  The multivariate
operator composes the univariate one across axes; it is valid on the box
trimmed by a quarter of each axis length, on the side the differences step
towards.  Running the operator with negative steps trims the opposite side,
which realizes a valid smoother on each of the 2^d quarter-trimmed subboxes
used by the subdivision argument.

Everything reduces to separable offset/weight stencils applied to the base
function, so norms over tensor grids evaluate the base function once on an
expanded tensor grid and contract axis by axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .differences import modulus, whitney_constant_sum, ModulusRequest
from .functions import FunctionSpec
from .geometry import (
    MultiIndex,
    Parallelepiped,
    QuadratureSpec,
    SubsetMask,
    as_multi_index,
    as_step_vector,
    lp_norm,
    subsets,
    _chebyshev_lobatto,
    _gauss_legendre,
)
from .polyapprox import _project_l2, taylor_poly

__all__ = [
    "DomainValidityError",
    "BracketViolation",
    "BSpline",
    "bspline_eval",
    "SmoothedFunction",
    "smooth_univariate",
    "smooth_mixed",
    "smoothed_derivative",
    "KFuncConfig",
    "KBracket",
    "k_functional_bracket",
    "SubdivisionReport",
    "subdivision_check",
    "subdivision_boxes",
]

DEFAULT_PANEL_NODES = 16
_CHUNK_BUDGET = 1 << 22  # max elements evaluated per base-function call


class DomainValidityError(ValueError):
    """Requested scale or evaluation point violates the operator's validity box."""


class BracketViolation(RuntimeError):
    """The computed lower bracket exceeded the upper bracket (hard invariant)."""


def bspline_eval(k: int, x) -> np.ndarray | float:
    """Cardinal B-spline of order k with knots 0, ..., k via Cox-de Boor.

    Supported on [0, k], non-negative, unit integral (the uniform integer-knot
    normalization).
    """
    if k < 1:
        raise ValueError("B-spline order must be >= 1")
    scalar = np.isscalar(x)
    xv = np.atleast_1d(np.asarray(x, dtype=float))
    vals = [np.where((xv >= i) & (xv < i + 1), 1.0, 0.0) for i in range(k)]
    for m in range(2, k + 1):
        nxt = []
        for i in range(k - m + 1):
            left = (xv - i) / (m - 1) * vals[i]
            right = (i + m - xv) / (m - 1) * vals[i + 1]
            nxt.append(left + right)
        vals = nxt
    out = vals[0]
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class BSpline:
    """Order-k cardinal B-spline; thin callable wrapper over :func:`bspline_eval`."""

    order: int

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("B-spline order must be >= 1")

    @property
    def support(self) -> tuple[float, float]:
        return 0.0, float(self.order)

    def __call__(self, x):
        return bspline_eval(self.order, x)


@lru_cache(maxsize=None)
def _bspline_quadrature(k: int, panel_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes on each knot interval of M_k and weights premultiplied by M_k."""
    ref_x, ref_w = _gauss_legendre(panel_nodes)
    nodes, weights = [], []
    for j in range(k):
        nodes.append(0.5 * (ref_x + 1.0) + j)
        weights.append(0.5 * ref_w)
    h = np.concatenate(nodes)
    w = np.concatenate(weights) * bspline_eval(k, np.concatenate(nodes))
    h.setflags(write=False)
    w.setflags(write=False)
    return h, w


@dataclass(frozen=True)
class AxisOp:
    """Separable 1-D stencil: (L f)(x) = sum_n weights[n] * f(x + offsets[n])."""

    offsets: np.ndarray
    weights: np.ndarray


def _identity_op() -> AxisOp:
    return AxisOp(np.zeros(1), np.ones(1))


def _smoothing_op(k: int, t: float, panel_nodes: int) -> AxisOp:
    h, wM = _bspline_quadrature(k, panel_nodes)
    offsets = [np.zeros(1)]
    weights = [np.array([1.0 - wM.sum()])]  # f(x) term plus the j = 0 difference term
    for j in range(1, k + 1):
        sign = -1.0 if j % 2 == 0 else 1.0
        offsets.append(j * t * h)
        weights.append(sign * math.comb(k, j) * wM)
    return AxisOp(np.concatenate(offsets), np.concatenate(weights))


def _derivative_op(k: int, t: float) -> AxisOp:
    if t == 0.0:
        raise DomainValidityError("derivative stencil needs a nonzero scale")
    offs, wts = [], []
    for j in range(1, k + 1):
        outer = (t ** (-k)) * ((-1.0) ** (j + 1)) * (j ** (-k)) * math.comb(k, j)
        for l in range(k + 1):
            offs.append(l * j * t)
            wts.append(outer * ((-1.0) ** (k - l)) * math.comb(k, l))
    return AxisOp(np.asarray(offs), np.asarray(wts))


def _trimmed_interval(a: float, b: float, t: float) -> tuple[float, float]:
    quarter = 0.25 * (b - a)
    return (a, b - quarter) if t >= 0 else (a + quarter, b)


@dataclass(frozen=True)
class SmoothedFunction:
    """A separable stencil applied to a base function, valid on a trimmed box."""

    ops: tuple[AxisOp, ...]
    base: object = field(repr=False)
    domain: Parallelepiped
    dimension: int

    def __call__(self, x) -> np.ndarray:
        pts = np.asarray(x, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(1, -1) if pts.size == self.dimension else pts.reshape(-1, 1)
        if not (np.all(pts >= np.asarray(self.domain.lower) - 1e-10)
                and np.all(pts <= np.asarray(self.domain.upper) + 1e-10)):
            raise DomainValidityError("evaluation outside the operator validity box")
        return _apply_at_points(self.ops, self.base, pts)


def _apply_at_points(ops: tuple[AxisOp, ...], base, pts: np.ndarray) -> np.ndarray:
    # contract one axis at a time: the per-axis stencils are large and
    # strongly cancelling, so flattening the full tensor product of weights
    # first would square the cancellation scale and lose ~half the digits
    d = pts.shape[1]
    grid_off = np.meshgrid(*[op.offsets for op in ops], indexing="ij")
    offsets = np.stack([g.reshape(-1) for g in grid_off], axis=-1)
    sizes = tuple(op.offsets.size for op in ops)
    combos = offsets.shape[0]
    out = np.empty(pts.shape[0])
    block = max(1, _CHUNK_BUDGET // max(1, combos))
    for start in range(0, pts.shape[0], block):
        chunk = pts[start:start + block]
        shifted = chunk[:, None, :] + offsets[None, :, :]
        vals = np.asarray(base(shifted.reshape(-1, d)), dtype=float)
        arr = vals.reshape((chunk.shape[0],) + sizes)
        for op in reversed(ops):
            arr = arr @ op.weights
        out[start:start + block] = arr
    return out


def _apply_on_tensor_grid(ops: tuple[AxisOp, ...], base,
                          axis_points: list[np.ndarray]) -> np.ndarray:
    """Evaluate the stencil on a tensor grid, contracting one axis at a time."""
    d = len(axis_points)
    expanded = [axis_points[i][:, None] + ops[i].offsets[None, :] for i in range(d)]
    sizes = [e.shape for e in expanded]
    tail = int(np.prod([n * l for n, l in sizes[1:]])) if d > 1 else 1
    n0, l0 = sizes[0]
    block = max(1, _CHUNK_BUDGET // max(1, l0 * tail))
    chunks = []
    flat_rest = [e.reshape(-1) for e in expanded[1:]]
    for start in range(0, n0, block):
        rows = expanded[0][start:start + block]
        grids = np.meshgrid(rows.reshape(-1), *flat_rest, indexing="ij")
        pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
        vals = np.asarray(base(pts), dtype=float)
        shape = [rows.shape[0], l0]
        for n, l in sizes[1:]:
            shape.extend([n, l])
        arr = vals.reshape(shape)
        for i in range(d):
            arr = np.tensordot(arr, ops[i].weights, axes=(i + 1, 0))
        chunks.append(arr)
    return np.concatenate(chunks, axis=0)


def _smoothed_lp_norm(ops, base, p: float, domain: Parallelepiped,
                      quad: QuadratureSpec, subtract_base: bool = False) -> float:
    """L_p norm of the stencil output (or of base - output) over the box."""
    if p == math.inf:
        axes = []
        for i, n in enumerate(quad.sup_nodes_per_axis):
            a, b = domain.axis_interval(i)
            axes.append(0.5 * (b - a) * _chebyshev_lobatto(n) + 0.5 * (a + b))
        vals = _apply_on_tensor_grid(ops, base, axes)
        if subtract_base:
            vals = _plain_tensor_eval(base, axes) - vals
        return float(np.max(np.abs(vals)))
    axes, wts = [], []
    for i, n in enumerate(quad.nodes_per_axis):
        a, b = domain.axis_interval(i)
        x, w = _gauss_legendre(n)
        axes.append(0.5 * (b - a) * x + 0.5 * (a + b))
        wts.append(0.5 * (b - a) * w)
    vals = _apply_on_tensor_grid(ops, base, axes)
    if subtract_base:
        vals = _plain_tensor_eval(base, axes) - vals
    weight = wts[0]
    for w in wts[1:]:
        weight = np.multiply.outer(weight, w)
    return float(np.sum(weight * np.abs(vals) ** p)) ** (1.0 / p)


def _plain_tensor_eval(base, axes: list[np.ndarray]) -> np.ndarray:
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    return np.asarray(base(pts), dtype=float).reshape([a.size for a in axes])


def smooth_univariate(f, k: int, t: float, axis: int, box: Parallelepiped,
                      panel_nodes: int = DEFAULT_PANEL_NODES) -> SmoothedFunction:
    """Averaging operator of order k at scale t applied along one axis.

    Valid for ``|t| <= (b - a) / (4 k^2)`` on the chosen axis; the result is
    declared on the box with that axis trimmed by a quarter of its length on
    the stepping side (the trailing side for t >= 0, the leading side
    otherwise).
    """
    if k < 1:
        raise ValueError("order must be >= 1")
    d = box.dim
    if not 0 <= axis < d:
        raise ValueError(f"axis {axis} out of range")
    a, b = box.axis_interval(axis)
    tbar = (b - a) / (4.0 * k * k)
    if abs(t) > tbar * (1.0 + 1e-12):
        raise DomainValidityError(f"|t|={abs(t)} exceeds the validity bound {tbar}")
    ops = [_identity_op() for _ in range(d)]
    ops[axis] = _smoothing_op(k, t, panel_nodes)
    lo, hi = list(box.lower), list(box.upper)
    lo[axis], hi[axis] = _trimmed_interval(a, b, t)
    return SmoothedFunction(tuple(ops), f, Parallelepiped(lo, hi), d)


def _signed_ops_and_domain(f, r: MultiIndex, t, box: Parallelepiped,
                           panel_nodes: int,
                           derivative_axes: frozenset[int] = frozenset()):
    t = as_step_vector(t, r.dim)
    ops = []
    lo, hi = list(box.lower), list(box.upper)
    for i in range(r.dim):
        a, b = box.axis_interval(i)
        tbar = (b - a) / (4.0 * r[i] * r[i])
        if abs(t[i]) > tbar * (1.0 + 1e-12):
            raise DomainValidityError(
                f"|t_{i}|={abs(t[i])} exceeds the validity bound {tbar}")
        if i in derivative_axes:
            ops.append(_derivative_op(r[i], t[i]))
        else:
            ops.append(_smoothing_op(r[i], t[i], panel_nodes))
        lo[i], hi[i] = _trimmed_interval(a, b, t[i])
    return tuple(ops), Parallelepiped(lo, hi)


def smooth_mixed(f, r, t, box: Parallelepiped,
                 panel_nodes: int = DEFAULT_PANEL_NODES) -> SmoothedFunction:
    """Coordinate-wise composition of the univariate averaging operators.

    Valid on the box with every axis trimmed by a quarter of its length on
    the respective stepping side.
    """
    r = as_multi_index(r, box.dim)
    ops, domain = _signed_ops_and_domain(f, r, t, box, panel_nodes)
    return SmoothedFunction(ops, f, domain, r.dim)


def smoothed_derivative(f, r, t, e: SubsetMask, box: Parallelepiped,
                        panel_nodes: int = DEFAULT_PANEL_NODES) -> SmoothedFunction:
    """Mixed derivative of order r(e) of the smoothed function.

    On each axis in ``e`` the order-r_i derivative of the univariate operator
    is the exact finite combination
    ``t^(-k) * sum_j (-1)^(j+1) j^(-k) C(k, j) diff_k(., j t)`` of k-th
    differences (k = r_i); the remaining axes keep their smoothing factor.
    The combination carries the binomial coefficient; a finite-difference
    oracle in the tests confirms this form.
    """
    r = as_multi_index(r, box.dim)
    if not isinstance(e, SubsetMask):
        e = SubsetMask(box.dim, e)
    if e.is_empty:
        raise ValueError("smoothed_derivative needs a non-empty subset")
    t = as_step_vector(t, box.dim)
    if any(t[i] == 0.0 for i in e.sorted_axes()):
        raise DomainValidityError("derivative axes need a nonzero scale")
    ops, domain = _signed_ops_and_domain(f, r, t, box, panel_nodes,
                                         frozenset(e.sorted_axes()))
    return SmoothedFunction(ops, f, domain, r.dim)


# ---------------------------------------------------------------------------
# K-functional brackets
# ---------------------------------------------------------------------------

@dataclass
class KFuncConfig:
    """Options for bracket computations (norm resolutions and candidate family)."""

    quad: QuadratureSpec | None = None
    h_grid: int = 33
    panel_nodes: int = DEFAULT_PANEL_NODES
    include_smoother: bool = True
    include_projection: bool = True
    combine_subdivision: bool = True
    taylor_anchor: str = "lower"  # "lower" or "center"

    def quad_for(self, dim: int) -> QuadratureSpec:
        return self.quad if self.quad is not None else QuadratureSpec.for_dim(dim)


@dataclass
class KBracket:
    """Two-sided bracket for the mixed K-functional at weights t^r.

    ``witness`` names the candidate achieving the upper bound.  The lower
    bound is the exact modulus-based constant times the total modulus, so
    ``lower <= upper`` is a hard invariant, enforced at construction.
    """

    lower: float
    upper: float
    witness: str
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lower > self.upper * (1.0 + 1e-9) + 1e-12:
            raise BracketViolation(
                f"bracket inverted: lower={self.lower} > upper={self.upper}")


def _weighted_derivative_sum(f: FunctionSpec, r: MultiIndex, t, p, box, quad) -> float:
    t = as_step_vector(t, r.dim)
    total = 0.0
    for e in subsets(r.dim):
        weight = float(np.prod([t[i] ** r[i] for i in e.sorted_axes()]))
        total += weight * lp_norm(f.derivative_fn(e.project(r)), box, p, quad)
    return total


def _poly_candidates(f: FunctionSpec, r: MultiIndex, p, box, cfg: KFuncConfig):
    """Polynomial members of the candidate family (zero derivative terms)."""
    quad = cfg.quad_for(r.dim)
    out = []
    if cfg.include_projection:
        proj, _ = _project_l2(f, r, box, quad)
        out.append(("projection",
                    lp_norm(lambda q: np.asarray(f(q)) - proj(q), box, p, quad)))
    if f.is_sobolev and r.leq(f.r_max):
        anchor = np.asarray(box.lower) if cfg.taylor_anchor == "lower" else box.center()
        tp = taylor_poly(f, r, anchor, box)
        out.append(("taylor",
                    lp_norm(lambda q: np.asarray(f(q)) - tp(q), box, p, quad)))
    return out


def _box_candidates(f: FunctionSpec, r: MultiIndex, t, p, box, cfg: KFuncConfig):
    """Candidates valid on the whole given box (no smoother)."""
    quad = cfg.quad_for(r.dim)
    cands = [("zero", lp_norm(f, box, p, quad))]
    if f.is_sobolev and r.leq(f.r_max):
        cands.append(("identity", _weighted_derivative_sum(f, r, t, p, box, quad)))
    cands.extend(_poly_candidates(f, r, p, box, cfg))
    return cands


def _directional_upper(f: FunctionSpec, r: MultiIndex, t, sigma: tuple[int, ...],
                       p, box, cfg: KFuncConfig):
    """Functional value of the signed smoother, measured on its validity box."""
    quad = cfg.quad_for(r.dim)
    t = as_step_vector(t, r.dim)
    signed = [s * ti for s, ti in zip(sigma, t)]
    g = smooth_mixed(f, r, signed, box, cfg.panel_nodes)
    value = _smoothed_lp_norm(g.ops, f, p, g.domain, quad, subtract_base=True)
    f_minus_g = value
    deriv_terms = {}
    for e in subsets(r.dim):
        gd = smoothed_derivative(f, r, signed, e, box, cfg.panel_nodes)
        weight = float(np.prod([t[i] ** r[i] for i in e.sorted_axes()]))
        term = weight * _smoothed_lp_norm(gd.ops, f, p, gd.domain, quad)
        deriv_terms[e.sorted_axes()] = term
        value += term
    return value, g.domain, f_minus_g, deriv_terms


def subdivision_boxes(box: Parallelepiped) -> dict[tuple[int, ...], Parallelepiped]:
    """The 2^d overlapping quarter-trimmed subboxes, keyed by axis subset.

    Axes in the subset keep their left end and lose the last quarter; the
    other axes lose the first quarter.
    """
    out = {}
    for e in subsets(box.dim, include_empty=True):
        lo, hi = list(box.lower), list(box.upper)
        for i in range(box.dim):
            a, b = box.axis_interval(i)
            quarter = 0.25 * (b - a)
            if i in e.axes:
                hi[i] = b - quarter
            else:
                lo[i] = a + quarter
        out[e.sorted_axes()] = Parallelepiped(lo, hi)
    return out


def _smoother_allowed(r: MultiIndex, t, box: Parallelepiped) -> bool:
    t = as_step_vector(t, r.dim)
    size = box.size()
    return all(abs(t[i]) <= size[i] / (4.0 * r[i] * r[i]) * (1.0 + 1e-12)
               for i in range(r.dim))


def k_functional_bracket(f: FunctionSpec, r, t, p: float, box: Parallelepiped,
                         cfg: KFuncConfig | None = None) -> KBracket:
    """Computable bracket for the mixed K-functional at weights t^r.

    The functional of a candidate g is ``||f - g||_p`` plus the sum over
    non-empty subsets e of ``prod_{i in e} t_i^{r_i} * ||g^(r(e))||_p``.  The
    upper bound minimizes over the family: g = 0, g = f (when derivatives
    exist), polynomial candidates (projection and Taylor), and -- for t inside
    the smoother validity range -- the signed smoothers combined across the
    2^d quarter-trimmed subboxes.  The lower bound is the total modulus
    divided by the exact difference-operator constant.  Candidates violating
    their preconditions are skipped silently.
    """
    cfg = cfg or KFuncConfig()
    r = as_multi_index(r, f.dimension)
    t = as_step_vector(t, f.dimension)
    if any(ti <= 0 for ti in t):
        raise ValueError("bracket needs t > 0 componentwise")
    quad = cfg.quad_for(r.dim)
    omega_terms = {}
    for e in subsets(r.dim):
        omega_terms[e.sorted_axes()] = modulus(
            ModulusRequest(f, r, e, t, p, box, cfg.h_grid, quad))
    omega_total = float(sum(omega_terms.values()))
    lower = omega_total / whitney_constant_sum(r)

    candidates = list(_box_candidates(f, r, t, p, box, cfg))
    details: dict = {"omega_total": omega_total, "omega_terms": omega_terms}
    if cfg.include_smoother and _smoother_allowed(r, t, box):
        boxes = subdivision_boxes(box)
        sub_uppers = {}
        for key, sub_box in boxes.items():
            sigma = tuple(1 if i in key else -1 for i in range(r.dim))
            value, dom, f_minus_g, deriv_terms = _directional_upper(
                f, r, t, sigma, p, box, cfg)
            direct = min(v for _, v in _box_candidates(f, r, t, p, sub_box, cfg))
            sub_uppers[key] = min(value, direct)
            if key == tuple(range(r.dim)):  # forward smoother: proof-chain diagnostics
                details["f_minus_g"] = f_minus_g
                details["deriv_terms"] = deriv_terms
        details["subdomain_uppers"] = sub_uppers
        if cfg.combine_subdivision:
            candidates.append(("smoother_subdivision", float(sum(sub_uppers.values()))))
    details["candidates"] = dict(candidates)
    witness, upper = min(candidates, key=lambda kv: kv[1])
    return KBracket(lower=lower, upper=float(upper), witness=witness, details=details)


@dataclass
class SubdivisionReport:
    """Empirical constant for combining subdomain brackets into the box bracket."""

    subdomain_uppers: dict[tuple[int, ...], float]
    combined: float
    box_upper: float
    ratio: float
    applicable: bool


def subdivision_check(f: FunctionSpec, r, t, p: float, box: Parallelepiped,
                      cfg: KFuncConfig | None = None) -> SubdivisionReport:
    """Upper brackets on all quarter-trimmed subboxes versus the box upper bracket.

    Reports ``box_upper / sum(subdomain uppers)`` as the empirical combination
    constant.  Requires ``t_i <= (b_i - a_i) / 2`` (the subbox overlap width).
    Cases where both sides vanish (e.g. polynomial inputs) are reported as
    not applicable with a NaN ratio.
    """
    cfg = cfg or KFuncConfig()
    r = as_multi_index(r, f.dimension)
    t = as_step_vector(t, f.dimension)
    size = box.size()
    if any(t[i] > size[i] / 2.0 * (1.0 + 1e-12) for i in range(r.dim)):
        raise ValueError("subdivision check needs t_i <= half the axis length")
    bracket = k_functional_bracket(f, r, t, p, box, cfg)
    sub_uppers = bracket.details.get("subdomain_uppers")
    if sub_uppers is None:
        sub_uppers = {}
        for key, sub_box in subdivision_boxes(box).items():
            cands = _box_candidates(f, r, t, p, sub_box, cfg)
            if _smoother_allowed(r, t, box):
                sigma = tuple(1 if i in key else -1 for i in range(r.dim))
                value, _, _, _ = _directional_upper(f, r, t, sigma, p, box, cfg)
                cands.append(("smoother", value))
            sub_uppers[key] = min(v for _, v in cands)
    combined = float(sum(sub_uppers.values()))
    scale = 1e-12 * (1.0 + lp_norm(f, box, p, cfg.quad_for(r.dim)))
    applicable = combined > scale and bracket.upper > scale
    ratio = bracket.upper / combined if applicable else math.nan
    return SubdivisionReport(sub_uppers, combined, bracket.upper, ratio, applicable)
