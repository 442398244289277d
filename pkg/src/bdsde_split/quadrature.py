"""Gauss-Hermite rules and the two Gaussian conditional-expectation kernels.

Every conditional expectation in the scheme is an integral against the law of
the forward increment ``dW ~ N(0, dt)``.  With the substitution
``x' = x + sqrt(2 dt) u`` it becomes an integral against ``exp(-u**2)``::

    E[h(x + dW)]      ~ pi**-0.5 * sum_j w_j h(x + sqrt(2 dt) a_j)
    E[h(x + dW) dW]   ~ pi**-0.5 * sum_j w_j sqrt(2 dt) a_j h(x + sqrt(2 dt) a_j)

The node placement is fixed so that, given the same ``h``, both kernels are
reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

MAX_ORDER = 64
_NEWTON_TOL = 1e-14
_NEWTON_MAXIT = 100


class NumericalDomainError(ArithmeticError):
    """A coefficient or integrand produced a non-finite value."""


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Hermite rule for the weight ``exp(-u**2)``."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    def probes(self, x, dt: float) -> np.ndarray:
        """Points ``x + sqrt(2 dt) a_j``; a trailing axis of length ``order`` is added."""
        return np.asarray(x, dtype=float)[..., None] + np.sqrt(2.0 * dt) * self.nodes

    @property
    def reach(self) -> float:
        """Largest |a_j|; probes land within ``sqrt(2 dt) * reach`` of the launch point."""
        return float(self.nodes[-1])


def _hermite_orthonormal(n: int, x: np.ndarray):
    """Orthonormal Hermite functions ``p_n(x), p_{n-1}(x)`` w.r.t. ``exp(-x**2)``.

    The three-term recurrence is run on the normalised polynomials, so values
    stay O(1) for large ``n`` and no factorials are formed.
    """
    p_prev = np.zeros_like(x)
    p = np.full_like(x, np.pi ** -0.25)
    for j in range(1, n + 1):
        p_prev, p = p, np.sqrt(2.0 / j) * x * p - np.sqrt((j - 1.0) / j) * p_prev
    return p, p_prev


def hermite_rule(q: int) -> QuadratureRule:
    """Build the ``q``-point Gauss-Hermite rule.

    Initial roots come from the eigenvalues of the symmetric Jacobi matrix
    (Golub-Welsch); each root is then polished by Newton iteration on the
    orthonormal recurrence.  Weights follow from Christoffel-Darboux,
    ``w_j = 1 / (q * p_{q-1}(a_j)**2)``.
    """
    if isinstance(q, bool) or not isinstance(q, (int, np.integer)):
        raise ValueError(f"quadrature order must be an integer, got {q!r}")
    q = int(q)
    if not 1 <= q <= MAX_ORDER:
        raise ValueError(f"quadrature order must lie in [1, {MAX_ORDER}], got {q}")

    off = np.sqrt(np.arange(1, q) / 2.0)
    jacobi = np.diag(off, 1) + np.diag(off, -1)
    x = np.sort(np.linalg.eigvalsh(jacobi))

    for _ in range(_NEWTON_MAXIT):
        p, p_prev = _hermite_orthonormal(q, x)
        # p_n'(x) = sqrt(2 n) p_{n-1}(x) for the orthonormal family
        dp = np.sqrt(2.0 * q) * p_prev
        step = p / dp
        x = x - step
        if np.max(np.abs(step)) < _NEWTON_TOL:
            break
    else:
        raise ArithmeticError(f"Hermite root iteration did not converge for q={q}")

    _, p_prev = _hermite_orthonormal(q, x)
    weights = 1.0 / (q * p_prev ** 2)

    # exact symmetry: average mirrored pairs, pin the middle node of odd rules
    x = 0.5 * (x - x[::-1])
    weights = 0.5 * (weights + weights[::-1])
    if q % 2:
        x[q // 2] = 0.0
    return QuadratureRule(order=q, nodes=x, weights=weights)


def _evaluate(h: Callable, points: np.ndarray) -> np.ndarray:
    try:
        values = np.asarray(h(points), dtype=float)
        if values.shape != points.shape:
            values = np.broadcast_to(values, points.shape)
    except (TypeError, ValueError):
        values = np.array([float(h(p)) for p in points.ravel()]).reshape(points.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        where = points[bad].ravel()[0]
        raise NumericalDomainError(f"integrand is not finite at probe point x'={where!r}")
    return values


def conditional_mean(h: Callable, x: float, dt: float, rule: QuadratureRule) -> float:
    """Quadrature estimate of ``E[h(x + dW)]`` with ``dW ~ N(0, dt)``.

    ``h`` should accept a numpy array of probe points; scalar-only callables
    are evaluated point by point.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    points = rule.probes(float(x), dt)
    return float(expect(_evaluate(h, points), rule))


def conditional_mean_times_dw(h: Callable, x: float, dt: float, rule: QuadratureRule) -> float:
    """Quadrature estimate of ``E[h(x + dW) dW]``; divide by ``dt`` for a Z estimate."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    points = rule.probes(float(x), dt)
    return float(expect_times_dw(_evaluate(h, points), rule, dt))


def expect(values: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    """Contract the trailing probe axis of pre-evaluated ``values`` with the weights."""
    return (values * rule.weights).sum(axis=-1) / np.sqrt(np.pi)


def expect_times_dw(values: np.ndarray, rule: QuadratureRule, dt: float) -> np.ndarray:
    """Array form of :func:`conditional_mean_times_dw` over the trailing probe axis."""
    return (values * (rule.weights * np.sqrt(2.0 * dt) * rule.nodes)).sum(axis=-1) / np.sqrt(np.pi)
