"""Test-function corpus with analytic mixed partial derivatives.

Each entry is a :class:`FunctionSpec`: a closed-form function together with a
closed-form evaluator for every mixed derivative up to a declared order.
Derivatives are supplied analytically per entry, never by automatic or
numeric differentiation, because the K-functional and Taylor machinery need
trustworthy high-order mixed derivatives; numeric differentiation appears
only in test oracles.

Entries tagged ``lp_only`` (the |x - c|^alpha factors) participate in the
moduli / best-approximation / K-functional experiments but refuse any
operation with a mixed-Sobolev precondition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .geometry import (
    Parallelepiped,
    QuadratureSpec,
    as_multi_index,
    lp_norm,
    subsets,
)

__all__ = [
    "CapabilityError",
    "FunctionSpec",
    "sobolev_norm",
    "corpus",
    "get_function",
    "tensor_polynomial_spec",
]

SOBOLEV = "sobolev"
LP_ONLY = "lp_only"


class CapabilityError(ValueError):
    """Raised when an operation needs derivatives an entry does not expose."""


def _pts(x, dim: int) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1) if arr.size == dim else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"points must have shape (N, {dim}), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class FunctionSpec:
    """A corpus function: vectorized evaluation plus analytic mixed derivatives.

    ``evaluator`` maps an ``(N, d)`` point array to ``(N,)`` values;
    ``derivative_evaluator`` additionally takes a multi-index order.  Entries
    are immutable and freely shareable across threads.
    """

    id: str
    dimension: int
    smoothness_class: str
    r_max: tuple[int, ...]
    evaluator: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    derivative_evaluator: Callable | None = field(repr=False, default=None)
    poly_degrees: tuple[int, ...] | None = None

    @property
    def is_sobolev(self) -> bool:
        return self.smoothness_class == SOBOLEV

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.evaluator(_pts(x, self.dimension)), dtype=float)

    def derivative(self, k, x) -> np.ndarray:
        """Mixed partial derivative of order ``k`` (``k = 0`` is the function)."""
        k = as_multi_index(k, self.dimension)
        if all(v == 0 for v in k):
            return self(x)
        if not self.is_sobolev or self.derivative_evaluator is None:
            raise CapabilityError(f"{self.id} does not expose analytic derivatives")
        if not k.leq(self.r_max):
            raise CapabilityError(
                f"{self.id} declares derivatives up to {self.r_max}, requested {k.entries}"
            )
        return np.asarray(
            self.derivative_evaluator(k.entries, _pts(x, self.dimension)), dtype=float
        )

    def derivative_fn(self, k) -> Callable[[np.ndarray], np.ndarray]:
        k = as_multi_index(k, self.dimension)
        return lambda pts: self.derivative(k, pts)

    def in_poly_class(self, r) -> bool:
        """True when the entry is a tensor polynomial of coordinate degree < r_i."""
        if self.poly_degrees is None:
            return False
        r = as_multi_index(r, self.dimension)
        return all(deg <= ri - 1 for deg, ri in zip(self.poly_degrees, r.entries))


def sobolev_norm(f: FunctionSpec, r, p: float, domain: Parallelepiped,
                 quad: QuadratureSpec) -> float:
    """Mixed Sobolev norm: sum of ||f^(r(e))||_p over ALL subsets e (incl. empty)."""
    r = as_multi_index(r, f.dimension)
    if not f.is_sobolev:
        raise CapabilityError(f"{f.id} is not Sobolev-tagged")
    if not r.leq(f.r_max):
        raise CapabilityError(f"{f.id}: order {r.entries} exceeds declared {f.r_max}")
    total = 0.0
    for e in subsets(f.dimension, include_empty=True):
        total += lp_norm(f.derivative_fn(e.project(r)), domain, p, quad)
    return total


# ---------------------------------------------------------------------------
# corpus builders
# ---------------------------------------------------------------------------

def _tensor_product(factors: list[Callable[[np.ndarray], np.ndarray]],
                    pts: np.ndarray) -> np.ndarray:
    out = np.ones(pts.shape[0])
    for i, fac in enumerate(factors):
        out = out * fac(pts[:, i])
    return out


def tensor_polynomial_spec(spec_id: str, axis_coeffs: list[list[float]]) -> FunctionSpec:
    """Tensor-product polynomial ``prod_i p_i(x_i)`` from 1-D coefficient lists.

    Coefficients are in ascending power order per axis.  The entry records its
    coordinate degrees so the harness can recognize membership in a polynomial
    class.
    """
    coeffs = [np.asarray(c, dtype=float) for c in axis_coeffs]
    dim = len(coeffs)
    degrees = tuple(len(c) - 1 for c in coeffs)

    def evaluator(pts):
        return _tensor_product([lambda xi, c=c: npoly.polyval(xi, c) for c in coeffs], pts)

    def derivative_evaluator(k, pts):
        facs = []
        for ki, c in zip(k, coeffs):
            dc = npoly.polyder(c, ki) if ki > 0 else c
            if len(np.atleast_1d(dc)) == 0:
                dc = np.zeros(1)
            facs.append(lambda xi, dc=dc: npoly.polyval(xi, dc))
        return _tensor_product(facs, pts)

    return FunctionSpec(
        id=spec_id,
        dimension=dim,
        smoothness_class=SOBOLEV,
        r_max=(12,) * dim,
        evaluator=evaluator,
        derivative_evaluator=derivative_evaluator,
        poly_degrees=degrees,
    )


def _exp_spec(spec_id: str, a: tuple[float, ...]) -> FunctionSpec:
    a_arr = np.asarray(a, dtype=float)
    dim = len(a)

    def evaluator(pts):
        return np.exp(pts @ a_arr)

    def derivative_evaluator(k, pts):
        scale = float(np.prod(a_arr ** np.asarray(k, dtype=float)))
        return scale * np.exp(pts @ a_arr)

    return FunctionSpec(spec_id, dim, SOBOLEV, (12,) * dim, evaluator, derivative_evaluator)


def _sin_product_spec(spec_id: str, omega: tuple[float, ...],
                      phase: tuple[float, ...]) -> FunctionSpec:
    dim = len(omega)

    def evaluator(pts):
        return _tensor_product(
            [lambda xi, w=w, ph=ph: np.sin(w * xi + ph) for w, ph in zip(omega, phase)],
            pts,
        )

    def derivative_evaluator(k, pts):
        facs = []
        for ki, w, ph in zip(k, omega, phase):
            facs.append(
                lambda xi, ki=ki, w=w, ph=ph: (w ** ki) * np.sin(w * xi + ph + ki * np.pi / 2)
            )
        return _tensor_product(facs, pts)

    return FunctionSpec(spec_id, dim, SOBOLEV, (12,) * dim, evaluator, derivative_evaluator)


def _reciprocal_quadratic_derivs(c: float, x: np.ndarray, order: int) -> np.ndarray:
    """n-th derivative of g(x) = 1/(1 + c x^2) via the exact recurrence.

    Differentiating (1 + c x^2) g = 1 n times (Leibniz) gives
    (1 + c x^2) g^(n) + 2 c n x g^(n-1) + c n (n-1) g^(n-2) = 0.
    """
    den = 1.0 + c * x * x
    g_prev2 = np.zeros_like(x)
    g_prev1 = 1.0 / den
    if order == 0:
        return g_prev1
    for n in range(1, order + 1):
        g_n = -(2.0 * c * n * x * g_prev1 + c * n * (n - 1) * g_prev2) / den
        g_prev2, g_prev1 = g_prev1, g_n
    return g_prev1


def _runge_spec(spec_id: str, dim: int, c: float = 25.0) -> FunctionSpec:
    def evaluator(pts):
        return _tensor_product(
            [lambda xi: 1.0 / (1.0 + c * xi * xi)] * dim, pts
        )

    def derivative_evaluator(k, pts):
        out = np.ones(pts.shape[0])
        for i, ki in enumerate(k):
            out = out * _reciprocal_quadratic_derivs(c, pts[:, i], ki)
        return out

    return FunctionSpec(spec_id, dim, SOBOLEV, (12,) * dim, evaluator, derivative_evaluator)


def _abspow_spec(spec_id: str, centers: tuple[float, ...], alpha: float) -> FunctionSpec:
    dim = len(centers)

    def evaluator(pts):
        return _tensor_product(
            [lambda xi, ci=ci: np.abs(xi - ci) ** alpha for ci in centers], pts
        )

    return FunctionSpec(spec_id, dim, LP_ONLY, (0,) * dim, evaluator, None)


def corpus() -> list[FunctionSpec]:
    """The built-in corpus, in a fixed deterministic order."""
    return [
        # tensor polynomials with configurable coordinate degrees
        tensor_polynomial_spec("poly_d1_deg0", [[1.0]]),
        tensor_polynomial_spec("poly_d1_deg1", [[0.0, 1.0]]),
        tensor_polynomial_spec("poly_d1_deg3", [[1.0, 0.25, -0.5, 1.0]]),
        tensor_polynomial_spec("poly_d2_deg11", [[0.0, 1.0], [0.0, 1.0]]),
        tensor_polynomial_spec("poly_d2_deg32", [[1.0, 1.0, 0.0, 1.0], [1.0, -1.0, 1.0]]),
        # exponentials exp(a . x)
        _exp_spec("exp_d1", (1.0,)),
        _exp_spec("exp_d2", (1.0, 1.0)),
        # products of sines
        _sin_product_spec("sin_d1", (1.5,), (0.3,)),
        _sin_product_spec("sinprod_d2", (1.5, 2.0), (0.3, 0.7)),
        # Runge-type products 1 / (1 + 25 x_i^2)
        _runge_spec("runge_d1", 1),
        _runge_spec("runge_d2", 2),
        # |x_i - c_i|^alpha tensor factors, no analytic derivatives exposed
        _abspow_spec("abspow_d1", (0.3,), 0.5),
        _abspow_spec("abspow_d2", (0.3, 0.6), 0.5),
    ]


_BY_ID: dict[str, FunctionSpec] | None = None


def get_function(spec_id: str) -> FunctionSpec:
    """Look a corpus entry up by its string id."""
    global _BY_ID
    if _BY_ID is None:
        _BY_ID = {f.id: f for f in corpus()}
    try:
        return _BY_ID[spec_id]
    except KeyError:
        raise KeyError(f"unknown corpus function id: {spec_id!r}") from None
