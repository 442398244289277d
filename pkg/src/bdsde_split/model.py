"""BDSDE coefficient bundles and the three benchmark problems.

A :class:`Problem` describes

    Y_t = xi + int_t^T f(s, X_s, Y_s, Z_s) ds - int_t^T Z_s dW_s + int_t^T g(s, X_s, Y_s) d<-B_s

with ``X = X_0 + W``.  Coefficients receive the current and terminal values of
``B`` as extra arguments because the benchmark drivers depend on them
explicitly.  All callables must broadcast over numpy arrays.

Signatures::

    f(t, x, y, z, b_t, b_T)      g(t, x, y, b_t, b_T)
    g_y_g(t, x, y, b_t, b_T)     g_b(t, x, y, b_t, b_T)
    terminal(x, b_T)             exact_y(t, x, b_t, b_T), exact_z(t, x, b_t, b_T)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

_FD_STEP = 1e-6


@dataclass(frozen=True)
class Problem:
    f: Callable
    g: Callable
    terminal: Callable
    g_y_g: Optional[Callable] = None
    g_b: Optional[Callable] = None
    exact_y: Optional[Callable] = None
    exact_z: Optional[Callable] = None
    horizon: float = 1.0
    x0: float = 0.0
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def has_exact(self) -> bool:
        return self.exact_y is not None and self.exact_z is not None

    def gyg(self, t, x, y, b_t, b_T):
        """``g_y * g``; falls back to a central difference in ``y`` when not supplied."""
        if self.g_y_g is not None:
            return self.g_y_g(t, x, y, b_t, b_T)
        h = _FD_STEP
        g_y = (self.g(t, x, y + h, b_t, b_T) - self.g(t, x, y - h, b_t, b_T)) / (2 * h)
        return g_y * self.g(t, x, y, b_t, b_T)

    def milstein(self, t, x, y, b_t, b_T):
        """Coefficient of ``(dB**2 - dt) / 2`` in the corrector.

        This is ``g_y g`` when ``g`` does not see ``B`` directly.  When it does,
        ``g`` moves with ``B`` inside the step as well as through ``y``, and the
        coefficient becomes ``g_y g - dg/db_t``.  Problems leave ``g_b`` unset
        to get the plain ``g_y g`` form.
        """
        c = self.gyg(t, x, y, b_t, b_T)
        if self.g_b is not None:
            c = c - self.g_b(t, x, y, b_t, b_T)
        return c


def zero_problem(terminal: Callable, horizon: float = 1.0, x0: float = 0.0, **exact) -> Problem:
    """``f = g = 0``: a pure martingale problem, used for exactness checks."""
    zero4 = lambda t, x, y, b_t, b_T: np.zeros(np.broadcast(t, x, y, b_t, b_T).shape)
    return Problem(
        f=lambda t, x, y, z, b_t, b_T: np.zeros(np.broadcast(t, x, y, z, b_t, b_T).shape),
        g=zero4,
        g_y_g=zero4,
        terminal=terminal,
        horizon=horizon,
        x0=x0,
        name="zero",
        **exact,
    )


# Example 1: Y = sin(t + W) - B_t/4 + B_T/4, Z = cos(t + W)

def _f1(t, x, y, z, b_t, b_T):
    return y / 2 - z + (b_t - b_T) / 8


def _g1(t, x, y, b_t, b_T):
    return 0.25 * (np.cos(t + x) ** 2 + (y + (b_t - b_T) / 4) ** 2)


def _g1_y_g(t, x, y, b_t, b_T):
    return 0.5 * (y + (b_t - b_T) / 4) * _g1(t, x, y, b_t, b_T)


def _g1_b(t, x, y, b_t, b_T):
    return 0.125 * (y + (b_t - b_T) / 4)


def _g1_printed(t, x, y, b_t, b_T):
    return 0.25 * (np.cos(t + x) ** 2 + y - ((b_t - b_T) / 8) ** 2)


def _g1_printed_y_g(t, x, y, b_t, b_T):
    return 0.25 * _g1_printed(t, x, y, b_t, b_T)


def example_1(printed: bool = False, horizon: float = 1.0, x0: float = 0.0) -> Problem:
    """Linear driver in (y, z); the B-noise enters additively.

    ``g`` equals 1/4 along the exact solution.  The default form is
    ``g = (cos(t+x)**2 + (y + (b_t - b_T)/4)**2) / 4``, which satisfies that.
    ``printed=True`` gives the literal form ``(cos(t+x)**2 + y - ((b_t-b_T)/8)**2)/4``,
    which does not, and keeps the bare ``g_y g`` corrector.
    """
    T = horizon
    if printed:
        g, gyg, gb = _g1_printed, _g1_printed_y_g, None
    else:
        g, gyg, gb = _g1, _g1_y_g, _g1_b
    return Problem(
        f=_f1,
        g=g,
        g_y_g=gyg,
        g_b=gb,
        terminal=lambda x, b_T: np.sin(T + x),
        exact_y=lambda t, x, b_t, b_T: np.sin(t + x) - b_t / 4 + b_T / 4,
        exact_z=lambda t, x, b_t, b_T: np.cos(t + x) + 0 * b_t,
        horizon=T,
        x0=x0,
        name="example1-printed" if printed else "example1",
    )


# Example 2: Y = sin(W) + t + B_t, Z = cos(W)

def _g2_printed(t, x, y, b_t, b_T):
    return (y - t - b_t) ** 2 + np.cos(x) ** 2


def _f2_printed(t, x, y, z, b_t, b_T):
    return _g2_printed(t, x, y, b_t, b_T) - np.sin(x) / 2


def example_2(printed: bool = False, horizon: float = 1.0, x0: float = 0.0) -> Problem:
    """Drivers quadratic in ``y``.

    Along ``Y = sin(W) + t + B_t`` the ``ds``-driver must equal ``sin(x)/2 - 1``
    and ``g`` must equal ``-1``.  The literal forms (``printed=True``) carry the
    opposite sign on both.  The default negates ``f`` and ``g``, which leaves
    ``g_y g`` unchanged.
    """
    T = horizon
    sign = 1.0 if printed else -1.0

    def f(t, x, y, z, b_t, b_T):
        return sign * _f2_printed(t, x, y, z, b_t, b_T)

    def g(t, x, y, b_t, b_T):
        return sign * _g2_printed(t, x, y, b_t, b_T)

    def g_y_g(t, x, y, b_t, b_T):
        return 2 * (y - t - b_t) * _g2_printed(t, x, y, b_t, b_T)

    def g_b(t, x, y, b_t, b_T):
        return 2 * (y - t - b_t)

    return Problem(
        f=f,
        g=g,
        g_y_g=g_y_g,
        g_b=None if printed else g_b,
        terminal=lambda x, b_T: np.sin(x) + T + b_T,
        exact_y=lambda t, x, b_t, b_T: np.sin(x) + t + b_t + 0 * b_T,
        exact_z=lambda t, x, b_t, b_T: np.cos(x) + 0 * b_t,
        horizon=T,
        x0=x0,
        name="example2-printed" if printed else "example2",
    )


# Example 3: Y = t + W + B_t/2, Z = 1

def _g3(t, x, y, b_t, b_T):
    return -0.5 * np.sin(y) ** 2 - 0.5 * np.cos(t + x + b_t / 2) ** 2


def _f3(t, x, y, z, b_t, b_T):
    return _g3(t, x, y, b_t, b_T) - 0.5 * z ** 2


def _g3_y_g(t, x, y, b_t, b_T):
    return -np.sin(y) * np.cos(y) * _g3(t, x, y, b_t, b_T)


def _g3_b(t, x, y, b_t, b_T):
    a = t + x + b_t / 2
    return 0.5 * np.sin(a) * np.cos(a)


def example_3(printed: bool = False, horizon: float = 1.0, x0: float = 0.0) -> Problem:
    """Trigonometric nonlinearity in ``y`` and a quadratic term in ``z``.

    The coefficients are consistent with the exact solution as printed.
    ``printed=True`` only drops the ``dg/db_t`` part of the corrector.
    """
    T = horizon
    return Problem(
        f=_f3,
        g=_g3,
        g_y_g=_g3_y_g,
        g_b=None if printed else _g3_b,
        terminal=lambda x, b_T: T + x + b_T / 2,
        exact_y=lambda t, x, b_t, b_T: t + x + b_t / 2 + 0 * b_T,
        exact_z=lambda t, x, b_t, b_T: np.ones(np.broadcast(t, x, b_t, b_T).shape),
        horizon=T,
        x0=x0,
        name="example3-printed" if printed else "example3",
    )


BUILTINS = {
    "example1": example_1,
    "example2": example_2,
    "example3": example_3,
}


def get_problem(name: str, **kwargs) -> Problem:
    """Look up a built-in by name; a ``-printed`` suffix selects the literal coefficients."""
    printed = name.endswith("-printed")
    base = name[: -len("-printed")] if printed else name
    try:
        factory = BUILTINS[base]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(printed=printed, **kwargs)
