"""Fock-basis density matrices from phase-swept quadrature densities.

The reconstruction evaluates

    rho_nm = (1/pi) int_0^pi dtheta exp(i (n-m) theta) int dq p_theta(q) f_nm(q)

with composite trapezoid rules in both variables.  The 1/pi phase average is
what makes the pattern functions of :mod:`spacs_tomo.patterns` return
``rho`` exactly on noiseless data; ``raw_trace`` keeps the pre-normalization
trace so nothing about the scale is hidden.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .empirics import QuadratureDataset, bin_centers
from .errors import GridMismatch, IllConditioned, SweepIncomplete
from .patterns import MAX_REGULAR_MODE, PatternTable, pattern_functions, regular_wavefunctions

NEGATIVE_DIAGONAL_FLAG = -0.02
MAX_CONDITION = 1e8
_SWEEP_TOL = 1e-9


@dataclass(eq=False)
class DensityMatrix:
    matrix: np.ndarray
    raw_trace: float = 1.0
    metadata: dict = field(default_factory=dict)

    @property
    def n_max(self):
        return self.matrix.shape[0]

    @property
    def diagonal(self):
        return self.matrix.diagonal().real.copy()

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.matrix)

    @property
    def negative_diagonal(self):
        """Whether any population is below the statistical-noise floor of -0.02."""
        return bool(np.any(self.diagonal < NEGATIVE_DIAGONAL_FLAG))

    @classmethod
    def pure(cls, amplitudes, **metadata):
        psi = np.asarray(amplitudes, dtype=complex)
        return cls(np.outer(psi, psi.conj()), 1.0, dict(metadata))

    def to_dict(self):
        return {
            "n_max": self.n_max,
            "real": self.matrix.real.tolist(),
            "imag": self.matrix.imag.tolist(),
            "raw_trace": float(self.raw_trace),
            "eigenvalues": self.eigenvalues.tolist(),
            "metadata": self.metadata,
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text())
        m = np.array(d["real"]) + 1j * np.array(d["imag"])
        return cls(m, d["raw_trace"], d.get("metadata", {}))


def finalize(raw, **metadata):
    """Hermitian-symmetrize and scale to unit trace, keeping the raw trace."""
    herm = 0.5 * (raw + raw.conj().T)
    trace = float(np.trace(herm).real)
    if trace == 0.0:
        raise ValueError("reconstructed matrix has zero trace")
    return DensityMatrix(herm / trace, trace, metadata)


def _check_sweep(sweep):
    theta = sweep.theta_values
    if theta[-1] < math.pi - _SWEEP_TOL:
        raise SweepIncomplete(
            f"phases cover [0, {math.degrees(theta[-1]):.6g} deg], need the full [0, 180] deg"
        )
    if theta[-1] > math.pi + _SWEEP_TOL:
        raise SweepIncomplete("phases must end exactly at pi")
    return theta


def theta_weights(theta):
    """Trapezoid weights for the phase average ``(1/pi) int_0^pi dtheta``."""
    w = np.zeros_like(theta)
    d = np.diff(theta)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w / math.pi


def q_weights(q):
    w = np.zeros_like(q)
    d = np.diff(q)
    w[:-1] += 0.5 * d
    w[1:] += 0.5 * d
    return w


def _phase_factors(theta, n_max):
    k = np.arange(n_max)
    return np.exp(1j * (k[:, None] - k[None, :])[None] * theta[:, None, None])


def reconstruct(dataset, patterns):
    """Pattern-function estimate of ``rho`` from the histogram densities."""
    q = dataset.q_centers
    if patterns.q_grid.shape != q.shape or not np.allclose(patterns.q_grid, q, rtol=0, atol=1e-12):
        raise GridMismatch("pattern table and dataset use different quadrature grids")
    theta = _check_sweep(dataset.sweep)
    per_theta = np.einsum("tq,nmq->tnm", dataset.density * q_weights(q), patterns.values)
    raw = np.einsum("t,tnm->nm", theta_weights(theta), per_theta * _phase_factors(theta, patterns.n_max))
    return finalize(raw, estimator="histogram", n_theta=theta.size, n_bins=q.size)


def sample_mean_estimate(dataset, n_max):
    """Direct estimator: phase-weighted sample average of ``f_nm(q) e^{i(n-m) theta}``.

    Uses the raw samples, so it sees neither binning nor the grid cut-off.
    """
    if dataset.samples is None:
        raise ValueError("dataset carries no raw samples")
    theta = _check_sweep(dataset.sweep)
    weights = theta_weights(theta)
    phases = _phase_factors(theta, n_max)
    raw = np.zeros((n_max, n_max), dtype=complex)
    for k in range(theta.size):
        f_mean = pattern_functions(n_max, dataset.samples[k]).mean(axis=-1)
        raw += weights[k] * phases[k] * f_mean
    return finalize(raw, estimator="sample_mean", n_theta=theta.size)


def _forward_columns(psi, theta, modes):
    """Design matrix columns in the real parametrization of a Hermitian matrix.

    Order: diagonal ``rho_jj`` for all j, then ``Re rho_jk`` and ``Im rho_jk``
    for each ``j < k``.
    """
    cols = [np.broadcast_to(psi[j] ** 2, (theta.size, psi.shape[1])) for j in range(modes)]
    labels = [("d", j, j) for j in range(modes)]
    for j in range(modes):
        for k in range(j + 1, modes):
            prod = 2.0 * psi[j] * psi[k]
            ang = (j - k) * theta[:, None]
            cols.append(prod * np.cos(ang))
            cols.append(prod * np.sin(ang))
            labels += [("re", j, k), ("im", j, k)]
    return np.stack([c.ravel() for c in cols], axis=1), labels


DEFAULT_FIT_MODES = 24


def forward_map_oracle(dataset, n_max, fit_modes=None, max_condition=MAX_CONDITION):
    """Least-squares inversion of ``p_theta(q) = sum rho_jk psi_j psi_k e^{-i(j-k) theta}``.

    The fit uses ``fit_modes >= n_max`` Fock states (default
    ``max(n_max, DEFAULT_FIT_MODES)``) under a unit-trace
    constraint and returns the leading ``n_max`` block, finalized like
    :func:`reconstruct`.  Fitting more modes than are reported keeps
    population above the truncation from leaking into the reported block.
    """
    modes = max(n_max, DEFAULT_FIT_MODES) if fit_modes is None else int(fit_modes)
    if modes < n_max:
        raise ValueError("fit_modes must be at least n_max")
    if modes > MAX_REGULAR_MODE + 1:
        raise ValueError(f"fit_modes limited to {MAX_REGULAR_MODE + 1}")
    theta = _check_sweep(dataset.sweep)
    q = dataset.q_centers
    psi = regular_wavefunctions(modes, q)
    design, labels = _forward_columns(psi, theta, modes)
    target = dataset.density.ravel()
    # Normal equations: the design is well conditioned on any full sweep
    # (cond ~ 10 at 24 modes), so squaring it costs nothing in accuracy.
    gram = design.T @ design
    eig = np.linalg.eigvalsh(gram)
    cond = math.sqrt(eig[-1] / eig[0]) if eig[0] > 0 else math.inf
    if not cond <= max_condition:
        raise IllConditioned(f"forward map condition number {cond:.3g} exceeds {max_condition:.3g}")
    # Unit trace: eliminate rho_00 = 1 - sum_{j>0} rho_jj, i.e. x = x0 + T y.
    n_par = design.shape[1]
    t_map = np.zeros((n_par, n_par - 1))
    t_map[1:, :] = np.eye(n_par - 1)
    t_map[0, : modes - 1] = -1.0
    x0 = np.zeros(n_par)
    x0[0] = 1.0
    rhs = t_map.T @ (design.T @ target - gram @ x0)
    sol = np.linalg.solve(t_map.T @ gram @ t_map, rhs)
    params = np.concatenate([[1.0 - sol[: modes - 1].sum()], sol])
    full = np.zeros((modes, modes), dtype=complex)
    for value, (kind, j, k) in zip(params, labels):
        if kind == "d":
            full[j, j] = value
        elif kind == "re":
            full[j, k] += value
            full[k, j] += value
        else:
            full[j, k] += 1j * value
            full[k, j] -= 1j * value
    dm = finalize(full[:n_max, :n_max], estimator="forward_map", fit_modes=modes)
    dm.metadata["condition_number"] = float(cond)
    return dm


def exact_quadrature_densities(rho, theta, q):
    """Noiseless ``p_theta(q) = <q_theta| rho |q_theta>`` on a (theta, q) grid."""
    rho = np.asarray(rho, dtype=complex)
    n = rho.shape[0]
    psi = regular_wavefunctions(n, q)
    phases = np.conj(_phase_factors(np.asarray(theta), n))
    p = np.einsum("jk,tjk,jq,kq->tq", rho, phases, psi, psi)
    return p.real


def synthetic_dataset(rho, sweep, edges):
    """Dataset whose densities are the exact quadrature distributions of ``rho``."""
    edges = np.asarray(edges, dtype=float)
    q = bin_centers(edges)
    density = exact_quadrature_densities(rho, sweep.theta_values, q)
    n_theta = len(sweep)
    return QuadratureDataset(
        sweep=sweep,
        edges=edges,
        counts=np.zeros(density.shape, dtype=np.int64),
        density=density,
        out_of_range=np.zeros(n_theta, dtype=np.int64),
        n_samples=0,
        metadata={"synthetic": True},
    )


def build_patterns(dataset, n_max):
    return PatternTable.build(n_max, dataset.q_centers)
