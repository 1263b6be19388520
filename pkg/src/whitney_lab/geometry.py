"""Axis-aligned box geometry, index bookkeeping, and tensor quadrature.

Every integral norm in the package flows through :func:`lp_norm`, so
quadrature behaviour and its tolerances are centralized here.  Finite-p norms
use tensor Gauss-Legendre rules (spectrally accurate on the smooth corpus);
sup norms use a Chebyshev-Lobatto tensor grid that includes the boundary,
where extrema of the functions under study frequently sit.

All values are immutable after construction and safe to share between
threads.  Reductions use a fixed summation order, so repeated runs with the
same configuration are bitwise reproducible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "GeometryError",
    "MultiIndex",
    "SubsetMask",
    "StepVector",
    "Parallelepiped",
    "QuadratureSpec",
    "subsets",
    "shifted_domain",
    "lp_norm",
    "lp_power_integral",
    "tensor_quadrature",
    "sup_grid",
]


class GeometryError(ValueError):
    """Raised for invalid domains, indices, or quadrature requests."""


def _as_float_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class MultiIndex:
    """Vector of non-negative integers with the componentwise partial order.

    Houses smoothness orders, Taylor orders, and step-count vectors.  ``a <= b``
    means ``a[i] <= b[i]`` for every axis; two indices may be incomparable.
    """

    entries: tuple[int, ...]

    def __init__(self, entries: Iterable[int]):
        ent = tuple(int(v) for v in entries)
        if len(ent) == 0:
            raise GeometryError("MultiIndex needs at least one entry")
        if any(v < 0 for v in ent):
            raise GeometryError(f"MultiIndex entries must be >= 0, got {ent}")
        object.__setattr__(self, "entries", ent)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> int:
        return self.entries[i]

    def __len__(self) -> int:
        return len(self.entries)

    def leq(self, other: "MultiIndex | Sequence[int]") -> bool:
        other = as_multi_index(other, self.dim)
        return all(a <= b for a, b in zip(self.entries, other.entries))

    def __le__(self, other) -> bool:
        return self.leq(other)

    def __ge__(self, other) -> bool:
        return as_multi_index(other, self.dim).leq(self)

    def is_positive(self) -> bool:
        """True when every entry is >= 1 (theorem-grade smoothness order)."""
        return all(v >= 1 for v in self.entries)

    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=int)


def as_multi_index(value, dim: int | None = None) -> MultiIndex:
    idx = value if isinstance(value, MultiIndex) else MultiIndex(value)
    if dim is not None and idx.dim != dim:
        raise GeometryError(f"expected a {dim}-dimensional index, got {idx.dim}")
    return idx


@dataclass(frozen=True)
class SubsetMask:
    """A subset of the coordinate axes ``{0, ..., dim-1}``.

    Axes are 0-based in code.  The empty set is representable; ``project``
    masks an order vector to the subset (zeros elsewhere) and ``indicator``
    is the characteristic function of the subset.
    """

    dim: int
    axes: frozenset[int]

    def __init__(self, dim: int, axes: Iterable[int] = ()):
        dim = int(dim)
        ax = frozenset(int(a) for a in axes)
        if dim < 1:
            raise GeometryError("dimension must be >= 1")
        if any(a < 0 or a >= dim for a in ax):
            raise GeometryError(f"axes {sorted(ax)} out of range for dim {dim}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "axes", ax)

    @classmethod
    def full(cls, dim: int) -> "SubsetMask":
        return cls(dim, range(dim))

    @classmethod
    def empty(cls, dim: int) -> "SubsetMask":
        return cls(dim, ())

    @property
    def is_empty(self) -> bool:
        return not self.axes

    def sorted_axes(self) -> tuple[int, ...]:
        return tuple(sorted(self.axes))

    def indicator(self, axis: int) -> int:
        return 1 if axis in self.axes else 0

    def complement(self) -> "SubsetMask":
        return SubsetMask(self.dim, set(range(self.dim)) - self.axes)

    def project(self, r) -> MultiIndex:
        """Mask the order vector to this subset: r_i on member axes, else 0."""
        r = as_multi_index(r, self.dim)
        return MultiIndex(r[i] if i in self.axes else 0 for i in range(self.dim))


def subsets(dim: int, include_empty: bool = False) -> list[SubsetMask]:
    """All axis subsets in a fixed deterministic order (by size, then lexicographic)."""
    out = []
    for size in range(0 if include_empty else 1, dim + 1):
        for combo in itertools.combinations(range(dim), size):
            out.append(SubsetMask(dim, combo))
    return out


@dataclass(frozen=True)
class StepVector:
    """Vector of real steps (difference steps, K-functional weights, box sizes)."""

    entries: tuple[float, ...]

    def __init__(self, entries: Iterable[float]):
        ent = _as_float_tuple(entries)
        if len(ent) == 0:
            raise GeometryError("StepVector needs at least one entry")
        object.__setattr__(self, "entries", ent)

    @property
    def dim(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i: int) -> float:
        return self.entries[i]

    def __len__(self) -> int:
        return len(self.entries)

    def pow(self, r) -> "StepVector":
        """Componentwise power t^r = (t_1^{r_1}, ..., t_d^{r_d})."""
        r = as_multi_index(r, self.dim)
        return StepVector(t ** p for t, p in zip(self.entries, r.entries))

    def array(self) -> np.ndarray:
        return np.asarray(self.entries, dtype=float)


def as_step_vector(value, dim: int | None = None) -> StepVector:
    step = value if isinstance(value, StepVector) else StepVector(np.atleast_1d(value))
    if dim is not None and step.dim != dim:
        raise GeometryError(f"expected a {dim}-dimensional step, got {step.dim}")
    return step


@dataclass(frozen=True)
class Parallelepiped:
    """Coordinate box ``[a_1,b_1] x ... x [a_d,b_d]``.

    Inverted boxes (some a_i > b_i) are rejected.  Zero-width axes are allowed
    so that shifted domains at extreme steps stay representable: they carry
    zero measure (finite-p integrals vanish) while sup norms still see the
    single remaining point.  Boxes used as primary experiment domains are
    validated for strictly positive size at configuration time.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __init__(self, lower: Iterable[float], upper: Iterable[float]):
        lo = _as_float_tuple(lower)
        hi = _as_float_tuple(upper)
        if len(lo) != len(hi):
            raise GeometryError("lower and upper must have the same length")
        if len(lo) == 0:
            raise GeometryError("dimension must be >= 1")
        if any(a > b for a, b in zip(lo, hi)):
            raise GeometryError(f"inverted box: lower={lo}, upper={hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int) -> "Parallelepiped":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def size(self) -> np.ndarray:
        """Side-length vector (componentwise >= 0)."""
        return np.asarray(self.upper) - np.asarray(self.lower)

    def volume(self) -> float:
        return float(np.prod(self.size()))

    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.upper) + np.asarray(self.lower))

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.size() == 0.0))

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        return bool(
            np.all(p >= np.asarray(self.lower) - tol)
            and np.all(p <= np.asarray(self.upper) + tol)
        )

    def axis_interval(self, i: int) -> tuple[float, float]:
        return self.lower[i], self.upper[i]

    def require_positive_size(self) -> "Parallelepiped":
        if self.is_degenerate:
            raise GeometryError(f"box must satisfy a_i < b_i on every axis: {self}")
        return self


@dataclass(frozen=True)
class QuadratureSpec:
    """Deterministic tensor quadrature controlling every norm evaluation.

    ``nodes_per_axis`` drives the Gauss-Legendre rule used for finite p;
    ``sup_nodes_per_axis`` drives the Chebyshev-Lobatto grid (endpoints
    included) used for p = infinity.
    """

    nodes_per_axis: tuple[int, ...]
    sup_nodes_per_axis: tuple[int, ...]
    rule: str = "gauss_legendre"

    def __init__(self, nodes_per_axis, sup_nodes_per_axis=None, rule="gauss_legendre"):
        nodes = tuple(int(n) for n in np.atleast_1d(nodes_per_axis))
        if sup_nodes_per_axis is None:
            sup = tuple(65 for _ in nodes)
        else:
            sup = tuple(int(n) for n in np.atleast_1d(sup_nodes_per_axis))
            if len(sup) == 1 and len(nodes) > 1:
                sup = sup * len(nodes)
        if len(nodes) == 1 and len(sup) > 1:
            nodes = nodes * len(sup)
        if len(nodes) != len(sup):
            raise GeometryError("nodes_per_axis and sup_nodes_per_axis disagree on dimension")
        if any(n < 1 for n in nodes) or any(n < 2 for n in sup):
            raise GeometryError("need >= 1 Gauss node and >= 2 sup-grid nodes per axis")
        if rule != "gauss_legendre":
            raise GeometryError(f"unsupported 1-D rule: {rule!r}")
        object.__setattr__(self, "nodes_per_axis", nodes)
        object.__setattr__(self, "sup_nodes_per_axis", sup)
        object.__setattr__(self, "rule", rule)

    @classmethod
    def for_dim(cls, dim: int, nodes: int = 32, sup_nodes: int = 65) -> "QuadratureSpec":
        return cls((nodes,) * dim, (sup_nodes,) * dim)

    @property
    def dim(self) -> int:
        return len(self.nodes_per_axis)


@lru_cache(maxsize=None)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def _chebyshev_lobatto(n: int) -> np.ndarray:
    # ascending points on [-1, 1], endpoints included, numerically symmetric
    theta = np.pi * np.arange(n) / (n - 1)
    x = -np.cos(theta)
    x = 0.5 * (x - x[::-1])
    x.setflags(write=False)
    return x


def _axis_gauss(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = _gauss_legendre(n)
    half = 0.5 * (b - a)
    return half * x + 0.5 * (a + b), half * w


def tensor_quadrature(domain: Parallelepiped, quad: QuadratureSpec) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre nodes ``(N, d)`` and weights ``(N,)`` on the box."""
    if quad.dim != domain.dim:
        raise GeometryError("quadrature and domain dimension mismatch")
    axes = [_axis_gauss(a, b, n) for (a, b), n in
            zip(zip(domain.lower, domain.upper), quad.nodes_per_axis)]
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wts = axes[0][1]
    for _, w in axes[1:]:
        wts = np.multiply.outer(wts, w)
    return pts, wts.reshape(-1)


def sup_grid(domain: Parallelepiped, quad: QuadratureSpec) -> np.ndarray:
    """Dense deterministic tensor grid (endpoints included) for sup norms."""
    if quad.dim != domain.dim:
        raise GeometryError("quadrature and domain dimension mismatch")
    axes = []
    for (a, b), n in zip(zip(domain.lower, domain.upper), quad.sup_nodes_per_axis):
        ref = _chebyshev_lobatto(n)
        axes.append(0.5 * (b - a) * ref + 0.5 * (a + b))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


def shifted_domain(domain: Parallelepiped, step) -> Parallelepiped | None:
    """Points of the box that stay inside it after the shift ``x -> x + step``.

    Per axis the result is ``[a, b - y]`` for a step y >= 0 and ``[a - y, b]``
    for y < 0.  Returns ``None`` when some axis interval inverts (no point
    satisfies both constraints); a zero-width axis is kept as a valid
    degenerate interval.
    """
    y = as_step_vector(step, domain.dim).array()
    lo = np.asarray(domain.lower, dtype=float).copy()
    hi = np.asarray(domain.upper, dtype=float).copy()
    lo[y < 0] = lo[y < 0] - y[y < 0]
    hi[y >= 0] = hi[y >= 0] - y[y >= 0]
    if np.any(lo > hi):
        return None
    return Parallelepiped(lo, hi)


def _eval(f: Callable, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(f(pts), dtype=float)
    if vals.shape != (pts.shape[0],):
        vals = vals.reshape(pts.shape[0])
    return vals


def lp_power_integral(f: Callable, domain: Parallelepiped | None, p: float,
                      quad: QuadratureSpec) -> float:
    """``integral over the box of |f|^p`` for finite p; 0 on an empty domain."""
    if domain is None:
        return 0.0
    if not (1.0 <= p < math.inf):
        raise GeometryError(f"finite p in [1, inf) required, got {p}")
    pts, wts = tensor_quadrature(domain, quad)
    vals = np.abs(_eval(f, pts))
    return float(np.dot(wts, vals ** p))


def lp_norm(f: Callable, domain: Parallelepiped | None, p: float,
            quad: QuadratureSpec) -> float:
    """The L_p norm of ``f`` over the box, 1 <= p <= inf.

    ``f`` must accept an ``(N, d)`` array of points and return ``(N,)``
    values.  For finite p the norm is a tensor Gauss-Legendre estimate of
    ``(integral |f|^p)^(1/p)``; for p = inf it is the max of ``|f|`` on the
    Chebyshev-Lobatto tensor grid.  An empty domain (``None``) contributes 0
    by convention, mirroring the role of empty shifted domains in the moduli.
    """
    if domain is None:
        return 0.0
    if p == math.inf:
        pts = sup_grid(domain, quad)
        return float(np.max(np.abs(_eval(f, pts))))
    return lp_power_integral(f, domain, p, quad) ** (1.0 / p)
