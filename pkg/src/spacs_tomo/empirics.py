"""Phase-swept quadrature samples and their histogram density estimates."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridTooNarrow
from .model import quadrature

DEFAULT_Q_RANGE = (-8.0, 8.0)
DEFAULT_BINS = 201
WARN_FRACTION = 1e-3
MAX_OUT_OF_RANGE = 0.05


@dataclass(frozen=True, eq=False)
class ThetaSweep:
    """Local-oscillator phases in radians, starting at 0 and ending at or before pi."""

    theta_values: np.ndarray
    step: float

    def __post_init__(self):
        th = np.asarray(self.theta_values, dtype=float)
        if th.ndim != 1 or th.size < 2:
            raise ValueError("a sweep needs at least two phases")
        if th[0] != 0.0:
            raise ValueError(f"sweep must start at 0, got {th[0]}")
        if np.any(np.diff(th) <= 0):
            raise ValueError("sweep phases must be strictly increasing")
        if th[-1] >= math.pi + self.step / 2:
            raise ValueError("sweep phases must stay below pi + step/2")
        object.__setattr__(self, "theta_values", th)

    @classmethod
    def from_degrees(cls, start=0.0, stop=180.0, step=1.0):
        """Inclusive sweep ``start, start+step, ..., stop`` given in degrees."""
        if step <= 0:
            raise ValueError(f"step must be positive, got {step}")
        n = int(round((stop - start) / step)) + 1
        degrees = start + step * np.arange(n)
        return cls(np.deg2rad(degrees), math.radians(step))

    @property
    def degrees(self):
        return np.rad2deg(self.theta_values)

    def __len__(self):
        return self.theta_values.size


def uniform_edges(q_min=DEFAULT_Q_RANGE[0], q_max=DEFAULT_Q_RANGE[1], bins=DEFAULT_BINS):
    if not q_max > q_min:
        raise ValueError(f"empty quadrature range [{q_min}, {q_max}]")
    if bins < 1:
        raise ValueError(f"need at least one bin, got {bins}")
    return np.linspace(q_min, q_max, int(bins) + 1)


def bin_centers(edges):
    return 0.5 * (edges[1:] + edges[:-1])


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    counts: np.ndarray
    density: np.ndarray
    n_samples: int
    out_of_range: int
    flagged: bool


def estimate_density(samples, edges, warn_fraction=WARN_FRACTION, max_fraction=MAX_OUT_OF_RANGE):
    """Histogram density ``count / (N dq)`` on a uniform grid.

    Samples outside the grid are counted, not binned.  Losing more than
    ``warn_fraction`` of them sets ``flagged``; more than ``max_fraction``
    raises :class:`GridTooNarrow`.  An empty sample gives an all-zero,
    flagged estimate.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.size < 2:
        raise ValueError("need at least two bin edges")
    widths = np.diff(edges)
    dq = (edges[-1] - edges[0]) / (edges.size - 1)
    if not np.allclose(widths, dq, rtol=1e-9, atol=0):
        raise ValueError("bin edges must be uniform")
    samples = np.asarray(samples, dtype=float).ravel()
    n = samples.size
    if n == 0:
        zeros = np.zeros(edges.size - 1)
        return DensityEstimate(zeros.astype(np.int64), zeros, 0, 0, True)
    counts, _ = np.histogram(samples, bins=edges.size - 1, range=(edges[0], edges[-1]))
    lost = n - int(counts.sum())
    frac = lost / n
    if frac > max_fraction:
        raise GridTooNarrow(
            f"{frac:.2%} of quadrature samples lie outside [{edges[0]}, {edges[-1]}]"
        )
    return DensityEstimate(counts, counts / (n * dq), n, lost, frac > warn_fraction)


@dataclass(eq=False)
class QuadratureDataset:
    """Per-phase quadrature samples and histogram densities on a shared grid.

    ``samples`` has shape ``(n_theta, N)`` and may be ``None`` for datasets
    loaded from disk, which keep only the histograms.
    """

    sweep: ThetaSweep
    edges: np.ndarray
    counts: np.ndarray
    density: np.ndarray
    out_of_range: np.ndarray
    n_samples: int
    samples: np.ndarray | None = None
    flagged: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def q_centers(self):
        return bin_centers(self.edges)

    @property
    def dq(self):
        return (self.edges[-1] - self.edges[0]) / (self.edges.size - 1)

    def to_csv(self, path):
        write_density_csv(path, self.sweep.degrees, self.q_centers, self.density)

    def sidecar(self):
        return {
            "theta_rad": self.sweep.theta_values.tolist(),
            "theta_step_rad": self.sweep.step,
            "edges": self.edges.tolist(),
            "n_samples": int(self.n_samples),
            "out_of_range": self.out_of_range.tolist(),
            "counts": self.counts.tolist(),
            "metadata": self.metadata,
        }

    def save(self, csv_path, json_path):
        self.to_csv(csv_path)
        Path(json_path).write_text(json.dumps(self.sidecar(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path, json_path):
        side = json.loads(Path(json_path).read_text())
        sweep = ThetaSweep(np.array(side["theta_rad"]), side["theta_step_rad"])
        edges = np.array(side["edges"])
        n_theta, n_bins = len(sweep), edges.size - 1
        density = read_density_csv(csv_path, n_theta, n_bins)
        counts = np.array(side["counts"], dtype=np.int64)
        return cls(
            sweep=sweep,
            edges=edges,
            counts=counts,
            density=density,
            out_of_range=np.array(side["out_of_range"], dtype=np.int64),
            n_samples=int(side["n_samples"]),
            metadata=side.get("metadata", {}),
        )


def _fmt(x):
    return format(float(x), ".17g")


def write_density_csv(path, theta_deg, q_centers, density):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta_deg", "q_bin_center", "density"])
        for th, row in zip(theta_deg, density):
            for q, p in zip(q_centers, row):
                w.writerow([_fmt(th), _fmt(q), _fmt(p)])


def read_density_csv(path, n_theta, n_bins):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["theta_deg", "q_bin_center", "density"]:
        raise ValueError(f"unexpected header in {path}: {rows[0]}")
    values = np.array([float(r[2]) for r in rows[1:]])
    if values.size != n_theta * n_bins:
        raise ValueError(f"{path} has {values.size} rows, expected {n_theta * n_bins}")
    return values.reshape(n_theta, n_bins)


def sweep_quadratures(
    ensemble, sweep, edges=None, keep_samples=True, warn_fraction=WARN_FRACTION
):
    """Homodyne readout of one heralded ensemble at every phase of the sweep.

    The same conditioned amplitudes are reused for all phases, since the
    herald does not depend on the local-oscillator phase.
    """
    c = np.asarray(ensemble.c_s)
    if c.size == 0:
        raise ValueError("ensemble is empty")
    if edges is None:
        edges = uniform_edges()
    edges = np.asarray(edges, dtype=float)
    n_theta, n_bins = len(sweep), edges.size - 1
    counts = np.zeros((n_theta, n_bins), dtype=np.int64)
    density = np.zeros((n_theta, n_bins))
    lost = np.zeros(n_theta, dtype=np.int64)
    flagged = np.zeros(n_theta, dtype=bool)
    samples = np.empty((n_theta, c.size)) if keep_samples else None
    for k, theta in enumerate(sweep.theta_values):
        q = quadrature(c, theta)
        est = estimate_density(q, edges, warn_fraction=warn_fraction)
        counts[k], density[k], lost[k], flagged[k] = (
            est.counts, est.density, est.out_of_range, est.flagged
        )
        if keep_samples:
            samples[k] = q
    if flagged.any():
        warnings.warn(
            f"{int(flagged.sum())} phases lost more than {warn_fraction:.1%} of samples "
            "outside the quadrature grid",
            stacklevel=2,
        )
    return QuadratureDataset(
        sweep=sweep,
        edges=edges,
        counts=counts,
        density=density,
        out_of_range=lost,
        n_samples=int(c.size),
        samples=samples,
        flagged=flagged,
    )
