"""Experiment orchestration: config files, the full pipeline, reports and campaigns.

A run directory holds::

    config.cfg            flat key=value snapshot of the run's configuration
    dataset.csv/.json     per-phase quadrature densities and their sidecar
    density_matrix.json   reconstructed rho (real/imag parts) with metadata
    wigner.csv/.json      W on the phase-space grid and its extrema summary
    report.json           headline numbers, stage timings, seed and version
    FAILED                only present if a stage raised
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from . import __version__
from .empirics import QuadratureDataset, ThetaSweep, sweep_quadratures, uniform_edges
from .errors import SpacsError, StageError
from .model import ModelParams, generate_ensemble
from .patterns import MAX_STABLE_MODES, PatternTable
from .tomography import reconstruct
from .wigner import default_axis, evaluate_grid, fidelity, spacs_amplitudes

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams = field(default_factory=ModelParams)
    theta_start_deg: float = 0.0
    theta_stop_deg: float = 180.0
    theta_step_deg: float = 1.0
    q_min: float = -8.0
    q_max: float = 8.0
    bins: int = 201
    n_max: int = 4
    grid_points: int = 161
    grid_extent: float = 4.0
    out_dir: str = "spacs_run"
    report_format: str = "text"

    def __post_init__(self):
        if not self.theta_step_deg > 0:
            raise ValueError(f"theta_step_deg must be > 0, got {self.theta_step_deg}")
        if not self.q_max > self.q_min:
            raise ValueError(f"q_range must be increasing, got [{self.q_min}, {self.q_max}]")
        if self.bins < 1:
            raise ValueError(f"bins must be >= 1, got {self.bins}")
        if not 1 <= self.n_max <= MAX_STABLE_MODES:
            raise ValueError(f"nmax must be in [1, {MAX_STABLE_MODES}], got {self.n_max}")
        if self.grid_points < 2:
            raise ValueError(f"grid must have >= 2 points, got {self.grid_points}")
        if not self.grid_extent > 0:
            raise ValueError(f"grid_extent must be > 0, got {self.grid_extent}")
        if self.report_format not in ("text", "json"):
            raise ValueError(f"format must be 'text' or 'json', got {self.report_format!r}")

    def sweep(self):
        return ThetaSweep.from_degrees(self.theta_start_deg, self.theta_stop_deg, self.theta_step_deg)

    def edges(self):
        return uniform_edges(self.q_min, self.q_max, self.bins)

    def to_flat(self):
        p = self.params
        return {
            "alpha_re": repr(p.alpha.real),
            "alpha_im": repr(p.alpha.imag),
            "sigma": repr(p.sigma),
            "r": repr(p.r),
            "gamma": repr(p.gamma),
            "seed": str(p.seed),
            "samples": str(p.target_conditioned),
            "max_trials": str(p.max_trials),
            "theta_start_deg": repr(self.theta_start_deg),
            "theta_stop_deg": repr(self.theta_stop_deg),
            "theta_step_deg": repr(self.theta_step_deg),
            "q_min": repr(self.q_min),
            "q_max": repr(self.q_max),
            "bins": str(self.bins),
            "nmax": str(self.n_max),
            "grid": str(self.grid_points),
            "grid_extent": repr(self.grid_extent),
            "out": self.out_dir,
            "format": self.report_format,
        }

    @classmethod
    def from_flat(cls, values, base=None):
        """Build a config from string ``key -> value`` pairs layered over ``base``."""
        flat = (base or cls()).to_flat()
        unknown = set(values) - set(flat)
        if unknown:
            raise KeyError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        flat.update({k: str(v) for k, v in values.items()})

        def num(key, kind=float):
            try:
                return kind(flat[key])
            except ValueError:
                raise ValueError(f"{key} must be {'an integer' if kind is int else 'a number'}, got {flat[key]!r}") from None

        params = ModelParams(
            alpha=complex(num("alpha_re"), num("alpha_im")),
            sigma=num("sigma"),
            r=num("r"),
            gamma=num("gamma"),
            seed=num("seed", int),
            target_conditioned=num("samples", int),
            max_trials=num("max_trials", int),
        )
        return cls(
            params=params,
            theta_start_deg=num("theta_start_deg"),
            theta_stop_deg=num("theta_stop_deg"),
            theta_step_deg=num("theta_step_deg"),
            q_min=num("q_min"),
            q_max=num("q_max"),
            bins=num("bins", int),
            n_max=num("nmax", int),
            grid_points=num("grid", int),
            grid_extent=num("grid_extent"),
            out_dir=flat["out"],
            report_format=flat["format"],
        )

    def with_seed(self, seed):
        return replace(self, params=replace(self.params, seed=seed))


CONFIG_KEYS = tuple(ExperimentConfig().to_flat())


def write_config(config, path):
    lines = [f"{k} = {v}" for k, v in config.to_flat().items()]
    Path(path).write_text("\n".join(lines) + "\n")


def parse_config_text(text):
    """Flat ``key = value`` pairs; blank lines and ``#`` comments are ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key] = value
    return values


def read_config(path, base=None):
    return ExperimentConfig.from_flat(parse_config_text(Path(path).read_text()), base=base)


@dataclass
class RunReport:
    efficiency: float
    total_trials: int
    accepted: int
    raw_trace: float
    rho_diagonal: list
    eigenvalues: list
    negative_diagonal: bool
    wigner_min: float
    wigner_argmin: complex
    wigner_refined_min: float
    wigner_max: float
    wigner_integral: float
    fidelity: float
    seed: int
    version: str
    timings: dict
    out_dir: str

    def to_dict(self):
        d = asdict(self)
        d["wigner_argmin"] = [self.wigner_argmin.real, self.wigner_argmin.imag]
        return d

    def format_text(self):
        diag = ", ".join(f"{x:.4f}" for x in self.rho_diagonal)
        stages = ", ".join(f"{k} {v:.2f}s" for k, v in self.timings.items())
        return "\n".join(
            [
                f"heralding efficiency  {self.efficiency:.4e}  ({self.accepted} of {self.total_trials} trials)",
                f"raw trace             {self.raw_trace:.4f}",
                f"rho diagonal          [{diag}]",
                f"Wigner min            {self.wigner_min:.4f} at {self.wigner_argmin.real:+.3f}{self.wigner_argmin.imag:+.3f}i",
                f"Wigner max            {self.wigner_max:.4f}",
                f"fidelity (ideal)      {self.fidelity:.4f}",
                f"seed                  {self.seed}",
                f"timings               {stages}",
                f"artifacts             {self.out_dir}",
            ]
        )


def _params_metadata(params):
    return {
        "alpha": [params.alpha.real, params.alpha.imag],
        "sigma": params.sigma,
        "r": params.r,
        "gamma": params.gamma,
        "seed": params.seed,
        "target_conditioned": params.target_conditioned,
    }


class _Stages:
    def __init__(self, out):
        self.out = out
        self.timings = {}

    def run(self, name, fn, *args, **kwargs):
        log.info("stage %s", name)
        t0 = time.perf_counter()
        try:
            result = fn(*args, **kwargs)
        except Exception as exc:
            (self.out / "FAILED").write_text(f"stage: {name}\nerror: {type(exc).__name__}: {exc}\n")
            raise StageError(name, exc) from exc
        self.timings[name] = time.perf_counter() - t0
        return result


def analyze_dataset(dataset, config):
    """Tomography and Wigner stages on an existing dataset."""
    rho = reconstruct(dataset, PatternTable.build(config.n_max, dataset.q_centers))
    axis = default_axis(config.grid_extent, config.grid_points)
    grid = evaluate_grid(rho, axis, axis)
    fid = fidelity(rho, spacs_amplitudes(config.params.alpha, config.n_max))
    return rho, grid, fid


def run_experiment(config):
    """Full pipeline, deterministic in the seed; artifacts go to ``config.out_dir``."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "FAILED").unlink(missing_ok=True)
    write_config(config, out / "config.cfg")
    st = _Stages(out)

    ensemble = st.run("ensemble", generate_ensemble, config.params)
    dataset = st.run("sweep", sweep_quadratures, ensemble, config.sweep(), config.edges(), keep_samples=False)
    dataset.metadata = {
        "params": _params_metadata(config.params),
        "total_trials": ensemble.total_trials,
        "accepted": ensemble.accepted,
        "efficiency": ensemble.efficiency,
    }
    st.run("save_dataset", dataset.save, out / "dataset.csv", out / "dataset.json")
    rho, grid, fid = st.run("analysis", analyze_dataset, dataset, config)
    rho.metadata.update(
        params=_params_metadata(config.params),
        n_samples=dataset.n_samples,
        theta_step_deg=config.theta_step_deg,
        q_range=[config.q_min, config.q_max],
        bins=config.bins,
    )
    st.run("save_results", _save_results, rho, grid, out)

    report = RunReport(
        efficiency=ensemble.efficiency,
        total_trials=ensemble.total_trials,
        accepted=ensemble.accepted,
        raw_trace=rho.raw_trace,
        rho_diagonal=rho.diagonal.tolist(),
        eigenvalues=rho.eigenvalues.tolist(),
        negative_diagonal=rho.negative_diagonal,
        wigner_min=grid.min_value,
        wigner_argmin=grid.min_location,
        wigner_refined_min=grid.refined_min()[0],
        wigner_max=grid.max_value,
        wigner_integral=grid.integral,
        fidelity=fid,
        seed=config.params.seed,
        version=__version__,
        timings=st.timings,
        out_dir=str(out),
    )
    (out / "report.json").write_text(json.dumps(report.to_dict(), indent=1) + "\n")
    return report


def _save_results(rho, grid, out):
    rho.save(out / "density_matrix.json")
    grid.save(out / "wigner.csv", out / "wigner.json")


def recompute_from_artifacts(run_dir):
    """Re-derive rho, the Wigner grid and the fidelity from a run's saved dataset."""
    run_dir = Path(run_dir)
    config = read_config(run_dir / "config.cfg")
    dataset = QuadratureDataset.load(run_dir / "dataset.csv", run_dir / "dataset.json")
    return analyze_dataset(dataset, config)


def derive_seed(base_seed, index):
    """Per-run campaign seed: splitmix64 finalizer of ``base_seed XOR index``."""
    z = (int(base_seed) ^ int(index)) & _MASK64
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass
class CampaignEntry:
    index: int
    overrides: dict
    seed: int
    report: RunReport | None = None
    error: str | None = None


def sweep_campaign(base, ranges, out_root=None):
    """Run every combination of the given config-key ranges.

    ``ranges`` maps config keys (as in ``config.cfg``) to value sequences.
    Failed runs are recorded and skipped.  An aggregate ``campaign.csv``
    is written to ``out_root`` (default: ``base.out_dir``).
    """
    if not ranges:
        raise ValueError("campaign needs at least one parameter range")
    for key, values in ranges.items():
        if key not in CONFIG_KEYS:
            raise KeyError(f"unknown config key {key!r}")
        if len(values) == 0:
            raise ValueError(f"empty range for {key!r}")
    root = Path(out_root or base.out_dir)
    root.mkdir(parents=True, exist_ok=True)
    keys = list(ranges)
    entries = []
    for index, combo in enumerate(itertools.product(*(ranges[k] for k in keys))):
        overrides = dict(zip(keys, combo))
        seed = derive_seed(base.params.seed, index)
        run_dir = root / f"run_{index:03d}"
        entry = CampaignEntry(index, overrides, seed)
        try:
            flat = {k: str(v) for k, v in overrides.items()}
            flat.update(seed=str(seed), out=str(run_dir))
            entry.report = run_experiment(ExperimentConfig.from_flat(flat, base=base))
        except (SpacsError, ValueError, KeyError) as exc:
            log.warning("campaign run %d failed: %s", index, exc)
            entry.error = f"{type(exc).__name__}: {exc}"
        entries.append(entry)
    _write_campaign_csv(root / "campaign.csv", keys, entries)
    return entries


def _write_campaign_csv(path, keys, entries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "seed", *keys, "status", "efficiency", "wigner_min", "fidelity", "raw_trace", "error"])
        for e in entries:
            rep = e.report
            nums = (
                [repr(rep.efficiency), repr(rep.wigner_min), repr(rep.fidelity), repr(rep.raw_trace)]
                if rep
                else ["", "", "", ""]
            )
            w.writerow(
                [e.index, e.seed, *(e.overrides[k] for k in keys), "ok" if rep else "failed", *nums, e.error or ""]
            )


def parse_range(text):
    """``key=v1,v2,...`` to ``(key, [v1, v2, ...])`` with values kept as strings."""
    if "=" not in text:
        raise ValueError(f"expected key=v1,v2,..., got {text!r}")
    key, values = text.split("=", 1)
    items = [v.strip() for v in values.split(",") if v.strip()]
    return key.strip().replace("-", "_"), items
