"""Execute a :class:`RunConfig`: compute, write CSV files and the manifest.

All CSV content depends only on the configuration minus ``workers``, so runs
with different thread counts produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, reports
from .closed_form import spectrum_closed_form
from .config import ConfigError, RunConfig, dump_config
from .ensemble import SpectrumGrid, spectrum_resolvent
from .model import SystemParams
from .sde import ensemble_average, max_step
from .trajectories import (DEFAULT_N_TRAJ, check_jump_step, cos_correlation, phase_statistics,
                           run_trajectories, spectrum_from_trajectories)
from .validation import _density_comparison, validate_suite

MANIFEST_NAME = "manifest.txt"
SDE_CHECKPOINT_FRACTIONS = (0.05, 0.1, 0.2, 0.5, 1.0)
SDE_DEFAULT_PATHS = 10_000
PHASE_DEFAULT_TRAJ = 20
PHASE_DEFAULT_T_END = 1000.0
PHASE_SUM_DEFAULT_TRAJ = 3
PHASE_SUM_DEFAULT_T_END = 200.0
VALIDATE_DEFAULT_SIZE = 1000

# Fixed parameter sets behind each preset, as (label, Gamma, L) at gamma = 0.05, Delta = 0.
PRESET_GAMMA = 0.05
PRESET_SETTINGS = {
    "fig1": [(f"L{L:g}", 5.0, L) for L in (0.0, 0.2, 1.0, 2.0)],
    "fig2": [("decay_only", 0.0, 0.0)],
    "fig3": [("collisional", 5.0, 0.0)],
    "fig4": [("phase", 0.0, 5.0), ("collisional_and_phase", 5.0, 0.5)],
    "fig5": [("collisional", 5.0, 0.0), ("phase", 0.0, 5.0), ("both", 5.0, 5.0)],
    "fig6": [("no_phase_noise", 5.0, 0.0)],
    "fig7": [("small_phase_noise", 5.0, 0.05)],
}


@dataclass
class RunResult:
    out_dir: Path
    files: list[str] = field(default_factory=list)
    resolved: dict = field(default_factory=dict)
    passed: bool = True
    report: dict | None = None


def _omegas(cfg: RunConfig) -> np.ndarray:
    return np.linspace(cfg.omega_min, cfg.omega_max, cfg.omega_points)


def _step(params: SystemParams, cfg: RunConfig) -> float:
    return max_step(params) if cfg.dt is None else float(cfg.dt)


def _snap(t: float, dt: float) -> float:
    """Nearest positive multiple of ``dt``."""
    return max(1, int(round(t / dt))) * dt


def _sample_every(cfg: RunConfig, dt: float) -> int:
    k = cfg.sample_dt / dt
    if abs(k - round(k)) > 1e-6 * k or round(k) < 1:
        raise ConfigError(f"sample-dt = {cfg.sample_dt} must be a positive multiple of dt = {dt}")
    return int(round(k))


class _Writer:
    def __init__(self, cfg: RunConfig) -> None:
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.result = RunResult(self.out)

    def add(self, name: str, header, rows) -> None:
        reports.write_csv(self.out / name, header, rows)
        self.result.files.append(name)

    def text(self, name: str, text: str) -> None:
        with open(self.out / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.result.files.append(name)


# ------------------------------------------------------------------ spectra


def _spectrum_csv(w: _Writer, name: str, spec: SpectrumGrid) -> None:
    w.add(name, reports.SPECTRUM_HEADER, reports.spectrum_rows(spec))


def _run_spectrum(cfg: RunConfig, w: _Writer, method: str) -> None:
    p = cfg.params
    om = _omegas(cfg)
    if method == "analytic":
        spec = spectrum_closed_form(p, om)
    elif method == "resolvent":
        spec = spectrum_resolvent(p, om)
    else:
        n = cfg.n_traj or DEFAULT_N_TRAJ
        dt = _step(p, cfg)
        spec = spectrum_from_trajectories(p, n, om, t_end=cfg.t_end, master_seed=cfg.seed,
                                          dt=dt, workers=cfg.workers)
        w.result.resolved.update({"n_traj": n, "dt": dt})
    w.result.resolved["omega_step"] = float(om[1] - om[0])
    w.result.resolved["elastic_weight"] = float(spec.elastic_weight)
    _spectrum_csv(w, "spectrum.csv", spec)


# -------------------------------------------------------------- SDE oracle


def _run_sde_validate(cfg: RunConfig, w: _Writer) -> None:
    p = cfg.params
    dt = _step(p, cfg)
    t_end = cfg.t_end if cfg.t_end is not None else min(10.0 / p.gamma if p.gamma > 0
                                                        else math.inf, 200.0)
    times = np.array([_snap(t_end * f, dt) for f in SDE_CHECKPOINT_FRACTIONS])
    n = cfg.n_traj or SDE_DEFAULT_PATHS
    series = ensemble_average(p, n, times, master_seed=cfg.seed, dt=dt, workers=cfg.workers)
    rows, ok, worst = _density_comparison(p, times, series, "")
    w.add("sde_vs_ode.csv", reports.COMPARISON_HEADER, rows)
    w.result.resolved.update({"n_paths": n, "dt": dt, "t_end": float(times[-1]),
                              "checkpoints": ",".join(repr(float(t)) for t in times)})
    w.result.passed = ok
    w.result.report = {"agreement": ok, "max_z": worst}


# ------------------------------------------------------------- trajectories


def _trajectory_records(p: SystemParams, cfg: RunConfig, n_default: int, t_default: float,
                        resolved: dict, prefix: str = ""):
    dt = _step(p, cfg)
    check_jump_step(p, dt)
    every = _sample_every(cfg, dt)
    t_end = _snap(cfg.t_end if cfg.t_end is not None else t_default, dt)
    n = cfg.n_traj or n_default
    recs = run_trajectories(p, n, t_end, master_seed=cfg.seed, dt=dt, sample_every=every,
                            workers=cfg.workers)
    resolved.update({f"{prefix}n_traj": n, f"{prefix}dt": dt, f"{prefix}t_end": t_end,
                     f"{prefix}sample_every": every})
    return recs


def _write_phases(w: _Writer, recs, tag: str, keep: int) -> None:
    for k, rec in enumerate(recs[:keep]):
        w.add(f"phases_{tag}traj{k}.csv", reports.PHASES_HEADER,
              zip(rec.times, rec.dphi, rec.sphi, rec.valid))
        w.add(f"jumps_{tag}traj{k}.csv", reports.JUMPS_HEADER, rec.jumps)


def _write_histogram(w: _Writer, recs, tag: str) -> None:
    st = phase_statistics(recs, bins=64)
    total = max(int(st.counts.sum()), 1)
    w.add(f"histogram_{tag}.csv".replace("_.", "."), reports.HISTOGRAM_HEADER,
          zip(st.centers, st.counts, st.counts / (total * st.bin_width)))
    modes = ",".join(repr(float(m)) for m in st.modes())
    w.result.resolved[f"{tag}.modes" if tag else "modes"] = modes or "none"


def _tau_grid(cfg: RunConfig) -> np.ndarray:
    n = int(math.floor(cfg.tau_max / cfg.sample_dt + 1e-9))
    return np.round(np.arange(n + 1) * cfg.sample_dt, 12)


def _write_correlation(w: _Writer, recs, cfg: RunConfig, tag: str) -> None:
    taus = _tau_grid(cfg)
    corr = cos_correlation(recs, taus)
    sur = cos_correlation(recs, taus, shuffle_seed=cfg.seed + 1)
    name = f"correlation_{tag}.csv" if tag else "correlation.csv"
    w.add(name, reports.CORRELATION_HEADER + ("C_cos_shuffled",),
          zip(taus, corr.values, sur.values))
    key = f"{tag}." if tag else ""
    w.result.resolved[f"{key}n_pairs"] = corr.n_samples
    w.result.resolved[f"{key}surrogate_bound"] = 3.0 / math.sqrt(corr.n_samples)


def _run_phases(cfg: RunConfig, w: _Writer) -> None:
    recs = _trajectory_records(cfg.params, cfg, PHASE_DEFAULT_TRAJ, PHASE_DEFAULT_T_END,
                               w.result.resolved)
    _write_phases(w, recs, "", len(recs))
    _write_histogram(w, recs, "")


def _run_correlation(cfg: RunConfig, w: _Writer) -> None:
    recs = _trajectory_records(cfg.params, cfg, PHASE_DEFAULT_TRAJ, PHASE_DEFAULT_T_END,
                               w.result.resolved)
    _write_correlation(w, recs, cfg, "")


# ----------------------------------------------------------------- presets


def _run_preset(cfg: RunConfig, w: _Writer) -> None:
    name = cfg.preset
    res = w.result.resolved
    for label, G, L in PRESET_SETTINGS[name]:
        p = SystemParams.from_ratios(PRESET_GAMMA, G, L)
        res[f"{label}.gamma"] = PRESET_GAMMA
        res[f"{label}.Gamma"] = G
        res[f"{label}.L"] = L
        res[f"{label}.Delta"] = 0.0
        if name == "fig1":
            om = _omegas(cfg)
            _spectrum_csv(w, f"spectrum_{label}_resolvent.csv", spectrum_resolvent(p, om))
            _spectrum_csv(w, f"spectrum_{label}_analytic.csv", spectrum_closed_form(p, om))
            continue
        if name in ("fig2", "fig3", "fig4"):
            recs = _trajectory_records(p, cfg, PHASE_DEFAULT_TRAJ, PHASE_DEFAULT_T_END, res,
                                       f"{label}.")
            _write_phases(w, recs, f"{label}_", 1)
            _write_histogram(w, recs, f"{label}")
        elif name == "fig5":
            recs = _trajectory_records(p, cfg, PHASE_DEFAULT_TRAJ, PHASE_DEFAULT_T_END, res,
                                       f"{label}.")
            _write_correlation(w, recs, cfg, label)
        else:
            recs = _trajectory_records(p, cfg, PHASE_SUM_DEFAULT_TRAJ, PHASE_SUM_DEFAULT_T_END,
                                       res, f"{label}.")
            _write_phases(w, recs, f"{label}_", len(recs))
    if name == "fig1":
        om = _omegas(cfg)
        res["omega_step"] = float(om[1] - om[0])


# ---------------------------------------------------------------- validate


def _run_validate(cfg: RunConfig, w: _Writer) -> None:
    n = cfg.n_traj or VALIDATE_DEFAULT_SIZE
    suite = validate_suite(n_paths=n, n_traj=n, seed=cfg.seed, workers=cfg.workers)
    w.text("report.json", suite.to_json() + "\n")
    for check in suite.checks:
        for fname, text in check.artifacts.items():
            w.text(fname, text)
    w.result.resolved.update({"n_paths": n, "n_traj": n})
    w.result.passed = suite.passed
    w.result.report = json.loads(suite.to_json())


_DISPATCH = {
    "spectrum-analytic": lambda c, w: _run_spectrum(c, w, "analytic"),
    "spectrum-resolvent": lambda c, w: _run_spectrum(c, w, "resolvent"),
    "spectrum-trajectory": lambda c, w: _run_spectrum(c, w, "trajectory"),
    "sde-validate": _run_sde_validate,
    "trajectory-phases": _run_phases,
    "cos-correlation": _run_correlation,
    "figure-preset": _run_preset,
    "validate": _run_validate,
}


def run(cfg: RunConfig) -> RunResult:
    """Run ``cfg`` and write its outputs plus ``manifest.txt`` into ``cfg.out``."""
    w = _Writer(cfg)
    _DISPATCH[cfg.mode](cfg, w)
    res = w.result
    extra = {"resolved.version": __version__, "resolved.rabi": 1.0}
    extra.update({f"resolved.{k}": v for k, v in res.resolved.items()})
    extra["resolved.passed"] = res.passed
    extra["resolved.outputs"] = ",".join(res.files)
    with open(w.out / MANIFEST_NAME, "w", encoding="utf-8", newline="") as fh:
        fh.write(dump_config(cfg, extra))
    return res
