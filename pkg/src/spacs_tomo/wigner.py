"""Wigner functions of truncated Fock-basis density matrices.

Phase-space convention: the complex coordinate ``alpha`` lives on the same
scale as the classical signal amplitude, so the vacuum is
``W(alpha) = (2/pi) exp(-2|alpha|^2)`` and the homodyne quadrature at phase
theta is ``q = sqrt(2) Re[alpha exp(-i theta)]``.  In particular

    p_0(q) = (1/sqrt(2)) int W(q/sqrt(2) + i y) dy.

With ``rho = sum rho_nm |n><m|`` the basis function multiplying ``rho_nm`` for
``n >= m`` is

    W_nm(alpha) = (2/pi) (-1)^m 2^(n-m) sqrt(m!/n!) conj(alpha)^(n-m)
                  exp(-2|alpha|^2) L_m^(n-m)(4|alpha|^2),

and ``W_mn = conj(W_nm)``, which keeps ``W`` real for Hermitian ``rho``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tomography import DensityMatrix

DEFAULT_EXTENT = 4.0
DEFAULT_POINTS = 161


def laguerre(m, a, x):
    """Associated Laguerre polynomial ``L_m^a(x)`` by upward recurrence in degree."""
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if m == 0:
        return prev
    cur = 1.0 + a - x
    for k in range(1, m):
        prev, cur = cur, ((2 * k + 1 + a - x) * cur - (k + a) * prev) / (k + 1)
    return cur


def wigner_basis(n, m, alpha):
    """Wigner function of the operator ``|n><m|`` at complex ``alpha``."""
    if n < 0 or m < 0:
        raise ValueError("mode indices must be non-negative")
    if n < m:
        return np.conj(wigner_basis(m, n, alpha))
    alpha = np.asarray(alpha, dtype=complex)
    r2 = alpha.real**2 + alpha.imag**2
    d = n - m
    coef = (2.0 / math.pi) * (-1) ** m * 2.0**d * math.sqrt(math.factorial(m) / math.factorial(n))
    return coef * np.conj(alpha) ** d * np.exp(-2.0 * r2) * laguerre(m, d, 4.0 * r2)


@dataclass(eq=False)
class WignerGrid:
    """``values[i, j] = W(re_axis[i] + 1j * im_axis[j])``."""

    re_axis: np.ndarray
    im_axis: np.ndarray
    values: np.ndarray
    imag_residue: float

    @property
    def cell_area(self):
        return (self.re_axis[1] - self.re_axis[0]) * (self.im_axis[1] - self.im_axis[0])

    @property
    def integral(self):
        return float(self.values.sum() * self.cell_area)

    def _at(self, flat_index):
        i, j = np.unravel_index(flat_index, self.values.shape)
        return float(self.values[i, j]), complex(self.re_axis[i], self.im_axis[j]), (i, j)

    @property
    def min_value(self):
        return self._at(np.argmin(self.values))[0]

    @property
    def min_location(self):
        return self._at(np.argmin(self.values))[1]

    @property
    def max_value(self):
        return self._at(np.argmax(self.values))[0]

    @property
    def max_location(self):
        return self._at(np.argmax(self.values))[1]

    def refined_min(self):
        """Grid minimum refined by a parabola through its neighbours along each axis."""
        value, loc, (i, j) = self._at(np.argmin(self.values))
        w = self.values
        shift = [0.0, 0.0]
        for axis, (k, grid) in enumerate(((i, self.re_axis), (j, self.im_axis))):
            if k == 0 or k == grid.size - 1:
                continue
            lo, hi = (w[k - 1, j], w[k + 1, j]) if axis == 0 else (w[i, k - 1], w[i, k + 1])
            curv = lo - 2.0 * w[i, j] + hi
            if curv <= 0:
                continue
            step = grid[1] - grid[0]
            off = 0.5 * (lo - hi) / curv
            shift[axis] = off * step
            value -= (hi - lo) ** 2 / (8.0 * curv)
        return value, loc + complex(shift[0], shift[1])

    def marginal(self):
        """Quadrature density at theta = 0 implied by the grid: ``(q, p(q))``."""
        dy = self.im_axis[1] - self.im_axis[0]
        m = np.trapezoid(self.values, dx=dy, axis=1)
        return math.sqrt(2.0) * self.re_axis, m / math.sqrt(2.0)

    def summary(self):
        rmin, rloc = self.refined_min()
        return {
            "min": self.min_value,
            "argmin": [self.min_location.real, self.min_location.imag],
            "refined_min": rmin,
            "refined_argmin": [rloc.real, rloc.imag],
            "max": self.max_value,
            "argmax": [self.max_location.real, self.max_location.imag],
            "integral": self.integral,
            "imag_residue": self.imag_residue,
            "shape": list(self.values.shape),
        }

    def save(self, csv_path, json_path):
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["x", "y", "W"])
            for i, x in enumerate(self.re_axis):
                for j, y in enumerate(self.im_axis):
                    wr.writerow([format(x, ".17g"), format(y, ".17g"), format(self.values[i, j], ".17g")])
        Path(json_path).write_text(json.dumps(self.summary(), indent=1, sort_keys=True) + "\n")


def default_axis(extent=DEFAULT_EXTENT, points=DEFAULT_POINTS):
    if points < 2:
        raise ValueError("a grid axis needs at least two points")
    return np.linspace(-extent, extent, int(points))


def _as_matrix(rho):
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def evaluate_grid(rho, re_axis=None, im_axis=None):
    """Wigner function of ``rho`` on a rectangular grid.

    Each off-diagonal pair enters as ``2 Re[rho_nm W_nm]`` so the result is
    real by construction; ``imag_residue`` records the largest imaginary
    part the full complex double sum would have had.
    """
    matrix = _as_matrix(rho)
    x = default_axis() if re_axis is None else np.asarray(re_axis, dtype=float)
    y = x if im_axis is None else np.asarray(im_axis, dtype=float)
    if x.size < 2 or y.size < 2:
        raise ValueError("grid needs at least two points per axis")
    alpha = x[:, None] + 1j * y[None, :]
    values = np.zeros(alpha.shape)
    imag = np.zeros(alpha.shape)
    for n in range(matrix.shape[0]):
        for m in range(n + 1):
            basis = wigner_basis(n, m, alpha)
            if n == m:
                values += matrix[n, n].real * basis.real
                imag += matrix[n, n].imag * basis.real
            else:
                values += 2.0 * (matrix[n, m] * basis).real
                imag += (matrix[n, m] * basis + matrix[m, n] * np.conj(basis)).imag
    return WignerGrid(x, y, values, float(np.abs(imag).max()))


def coherent_amplitudes(alpha, n_max):
    """Fock amplitudes ``exp(-|alpha|^2/2) alpha^n / sqrt(n!)`` for ``n < n_max``."""
    n = np.arange(n_max)
    log_fact = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact)
    return mag * complex(alpha) ** n


def spacs_amplitudes(alpha, n_max, normalize=True):
    """Fock amplitudes of the photon-added coherent state ``a^dag |alpha>``.

    Without ``normalize`` the untruncated state has unit norm, so the sum of
    squares measures how much of it the truncation keeps.
    """
    if n_max < 2:
        raise ValueError("photon-added states need n_max >= 2")
    alpha = complex(alpha)
    psi = np.zeros(n_max, dtype=complex)
    base = coherent_amplitudes(alpha, n_max - 1)
    psi[1:] = np.sqrt(np.arange(1, n_max)) * base
    if normalize:
        return psi / np.linalg.norm(psi)
    return psi / math.sqrt(1.0 + abs(alpha) ** 2)


def ideal_spacs(alpha, n_max):
    return DensityMatrix.pure(spacs_amplitudes(alpha, n_max), state="spacs", alpha=[complex(alpha).real, complex(alpha).imag])


def fidelity(rho, psi):
    """Overlap ``<psi| rho |psi>`` with a pure reference state.

    Not clipped: a reconstructed ``rho`` need not be positive, and the raw
    number is reported as is.
    """
    matrix = _as_matrix(rho)
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (matrix.shape[0],):
        raise ValueError(f"reference has {psi.size} amplitudes, rho has dimension {matrix.shape[0]}")
    psi = psi / np.linalg.norm(psi)
    return float(np.real(np.conj(psi) @ matrix @ psi))
