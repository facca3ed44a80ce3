"""Oscillator wavefunctions and homodyne pattern functions.

Both the regular solutions ``psi_n`` and the irregular solutions ``phi_n`` obey

    y_{n+1} = sqrt(2/(n+1)) q y_n - sqrt(n/(n+1)) y_{n-1}.

Internally we carry ``h_n = psi_n exp(q^2/2)`` and ``g_n = phi_n exp(-q^2/2)``,
which satisfy the same recurrence and keep products ``psi_n phi_m = h_n g_m``
free of overflow.  The irregular seeds come from the Dawson integral ``D``:

    g_0 = c D(q),    g_1 = c (2 q D(q) - 1) / sqrt(2),

i.e. ``phi_1`` is the raising operator applied to ``phi_0``.  The scale ``c``
is fixed by requiring ``int f_00 psi_0^2 dq = 1``; it evaluates to
``2 pi^(1/4)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import dawsn

from .errors import TruncationTooLarge

MAX_REGULAR_MODE = 64
# Upward recurrence for phi_n loses accuracy at large |q| as n grows; at 12
# modes the biorthogonality residual on the default grid is still < 1e-6.
MAX_STABLE_MODES = 12

_PI_M14 = math.pi**-0.25


def _recur(y, q, n_rows):
    for n in range(1, n_rows - 1):
        y[n + 1] = math.sqrt(2.0 / (n + 1)) * q * y[n] - math.sqrt(n / (n + 1)) * y[n - 1]
    return y


def _hermite_rows(n_rows, q):
    h = np.empty((max(n_rows, 2),) + q.shape)
    h[0] = _PI_M14
    h[1] = math.sqrt(2.0) * q * _PI_M14
    return _recur(h, q, n_rows)[:n_rows]


def _irregular_rows(n_rows, q, scale):
    d = dawsn(q)
    g = np.empty((max(n_rows, 2),) + q.shape)
    g[0] = scale * d
    g[1] = scale * (2.0 * q * d - 1.0) / math.sqrt(2.0)
    return _recur(g, q, n_rows)[:n_rows]


def regular_wavefunctions(n_modes, q):
    """``psi_n(q)`` for ``n < n_modes``, shape ``(n_modes,) + q.shape``."""
    if n_modes > MAX_REGULAR_MODE + 1:
        raise TruncationTooLarge(f"regular wavefunctions are supported up to n = {MAX_REGULAR_MODE}")
    q = np.asarray(q, dtype=float)
    return _hermite_rows(n_modes, q) * np.exp(-0.5 * q * q)


def regular_wavefunction(n, q):
    """Normalized oscillator eigenfunction ``H_n(q) exp(-q^2/2) / sqrt(2^n n! sqrt(pi))``."""
    if n < 0:
        raise ValueError(f"mode index must be >= 0, got {n}")
    return regular_wavefunctions(n + 1, q)[n]


def irregular_wavefunctions(n_modes, q):
    """Non-normalizable oscillator solutions ``phi_n(q)`` for ``n < n_modes``."""
    q = np.asarray(q, dtype=float)
    return _irregular_rows(n_modes, q, irregular_scale()) * np.exp(0.5 * q * q)


def irregular_wavefunction(n, q):
    if n < 0:
        raise ValueError(f"mode index must be >= 0, got {n}")
    return irregular_wavefunctions(n + 1, q)[n]


def _pattern_from_rows(h, g, n_modes, q):
    f = np.empty((n_modes, n_modes) + q.shape)
    for n in range(n_modes):
        for m in range(n, n_modes):
            # d/dq (psi_n phi_m) via y' = q y - sqrt(2(k+1)) y_{k+1} for both factors
            f[n, m] = (
                2.0 * q * h[n] * g[m]
                - math.sqrt(2.0 * (n + 1)) * h[n + 1] * g[m]
                - math.sqrt(2.0 * (m + 1)) * h[n] * g[m + 1]
            )
            f[m, n] = f[n, m]
    return f


@lru_cache(maxsize=None)
def irregular_scale():
    """Scale of ``phi_0`` that makes ``int f_00 psi_0^2 dq = 1``."""
    def integrand(x):
        q = np.array([x])
        h = _hermite_rows(2, q)
        g = _irregular_rows(2, q, 1.0)
        f00 = _pattern_from_rows(h, g, 1, q)[0, 0, 0]
        return f00 * _PI_M14**2 * math.exp(-x * x)

    value, _ = quad(integrand, -np.inf, np.inf, epsabs=1e-14, epsrel=1e-13)
    return 1.0 / value


def pattern_functions(n_modes, q):
    """All pattern functions ``f_nm(q)``, ``n, m < n_modes``; real and symmetric in (n, m)."""
    if n_modes < 1:
        raise ValueError(f"need at least one mode, got {n_modes}")
    if n_modes > MAX_STABLE_MODES:
        raise TruncationTooLarge(
            f"pattern functions are numerically stable up to {MAX_STABLE_MODES} modes, "
            f"requested {n_modes}"
        )
    q = np.asarray(q, dtype=float)
    h = _hermite_rows(n_modes + 1, q)
    g = _irregular_rows(n_modes + 1, q, irregular_scale())
    return _pattern_from_rows(h, g, n_modes, q)


def pattern_function(n, m, q):
    return pattern_functions(max(n, m) + 1, q)[n, m]


@dataclass(frozen=True, eq=False)
class PatternTable:
    """Pattern functions tabulated on a fixed quadrature grid."""

    n_max: int
    q_grid: np.ndarray
    values: np.ndarray

    @classmethod
    def build(cls, n_max, q_grid):
        q = np.asarray(q_grid, dtype=float)
        return cls(n_max, q, pattern_functions(n_max, q))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "m", "q", "f"])
            for n in range(self.n_max):
                for m in range(self.n_max):
                    for q, v in zip(self.q_grid, self.values[n, m]):
                        w.writerow([n, m, format(q, ".17g"), format(v, ".17g")])
