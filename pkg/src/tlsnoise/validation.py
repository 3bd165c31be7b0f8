"""Cross-checks between the independent routes, and the suite that runs them.

Every check returns a :class:`CheckResult` carrying the measured metric, the
tolerance it was held to and any tabular artifacts (CSV text) it produced.
Sizes (paths, trajectories) are parameters so the same checks serve quick
smoke runs and full-size acceptance runs; statistical tolerances are always
expressed in standard errors of the run at hand.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import reports
from .closed_form import (classify_spectrum, gamma1_column_form, has_dip, local_maxima,
                          spectrum_closed_form)
from .ensemble import (ChiBlock, build_generators, contract_noise, default_omegas,
                       evolve_series, generator_from_contraction, injected_fault,
                       noiseless_generator, spectrum_resolvent, tabulated_noise_tensor)
from .model import DensityMatrix, SystemParams
from .sde import ensemble_average
from .trajectories import (cos_correlation, ensemble_density, interjump_phase_sum_drift,
                           phase_statistics, run_trajectories)

GAMMA_FIG = 0.05
COLL_FIG = 5.0
FIG1_L = (0.0, 0.2, 1.0, 2.0)
CHECKPOINTS_GAMMA_T = (0.5, 1.0, 2.0, 5.0, 10.0)
# Absolute slack for comparisons whose standard error vanishes identically
# (e.g. a coherence component that is exactly zero on every path).
EXACT_FLOOR = 1e-12


@dataclass
class CheckResult:
    name: str
    passed: bool
    metric: float
    tolerance: float
    detail: dict = field(default_factory=dict)
    artifacts: dict[str, str] = field(default_factory=dict, repr=False)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: metric={self.metric:.6g} tolerance={self.tolerance:.6g}"

    def record(self) -> dict:
        d = asdict(self)
        d.pop("artifacts")
        return d


def fig1_params(L: float) -> SystemParams:
    return SystemParams.from_ratios(GAMMA_FIG, COLL_FIG, L)


def random_params(n: int, seed: int = 2024) -> list[SystemParams]:
    """Parameter sets spread over the physically interesting range."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        out.append(SystemParams.from_ratios(
            gamma=float(rng.uniform(0.02, 0.5)), Gamma=float(rng.uniform(0.0, 5.0)),
            L=float(rng.uniform(0.0, 3.0)), Delta=float(rng.uniform(-2.0, 2.0))))
    return out


def _label(p: SystemParams) -> str:
    r = p.ratios()
    return f"gamma={r['gamma']:.4g},Gamma={r['Gamma']:.4g},L={r['L']:.4g},Delta={r['Delta']:.4g}"


# ------------------------------------------------------------------ exact math


def check_generator_identity(n_random: int = 5, seed: int = 7) -> CheckResult:
    """Generators from ``M + sum_k Q_ikkj`` against the tabulated ones."""
    sets = [fig1_params(L) for L in FIG1_L] + random_params(n_random, seed)
    worst = 0.0
    per = {}
    for p in sets:
        gens = build_generators(p)
        err = 0.0
        for kind in ("plain", "primed", "double"):
            err = max(err, float(np.max(np.abs(generator_from_contraction(p, kind)
                                               - getattr(gens, kind)))))
        tab = noiseless_generator(p) + contract_noise(tabulated_noise_tensor(p))
        err = max(err, float(np.max(np.abs(tab - gens.plain))))
        per[_label(p)] = err
        worst = max(worst, err)
    return CheckResult("generator identity", worst <= 1e-14, worst, 1e-14, per)


def _max_rel(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(a - b) / np.abs(b)))


def check_route_equivalence(n_random: int = 5, seed: int = 11, points: int = 2001) -> CheckResult:
    """Closed form against the resolvent spectrum over ``[-10, 10] Omega``."""
    sets = [fig1_params(L) for L in FIG1_L] + random_params(n_random, seed)
    worst = 0.0
    per = {}
    for p in sets:
        w = default_omegas(-10.0, 10.0, points, rabi=p.rabi)
        err = _max_rel(spectrum_closed_form(p, w).values, spectrum_resolvent(p, w).values)
        per[_label(p)] = err
        worst = max(worst, err)
    return CheckResult("closed form vs resolvent spectrum", worst < 1e-8, worst, 1e-8, per)


def check_closed_form_transcription(n_random: int = 5, seed: int = 11,
                                    points: int = 401) -> CheckResult:
    """Closed form against ``R22 chi'_4 + R24 chi'_1`` built from ``N''``.

    This identity holds for the closed form as written, so it detects any
    change in the double-primed generator.
    """
    sets = [fig1_params(L) for L in FIG1_L] + random_params(n_random, seed)
    worst = 0.0
    per = {}
    for p in sets:
        w = default_omegas(-10.0, 10.0, points, rabi=p.rabi)
        w = w[w != 0.0]
        err = _max_rel(spectrum_closed_form(p, w).values, gamma1_column_form(p, w).real)
        per[_label(p)] = err
        worst = max(worst, err)
    return CheckResult("closed form vs N'' column combination", worst < 1e-8, worst, 1e-8, per)


def check_dip(method: str = "resolvent", Ls=(0.0, 0.2, 1.0, 3.0),
              expected=(True, True, True, False)) -> CheckResult:
    """Dip predicate at ``Gamma = 5, gamma = 0.05`` for several phase-noise levels."""
    found = {}
    for L in Ls:
        p = fig1_params(L)
        w = default_omegas(-10.0, 10.0, 2001, rabi=p.rabi)
        spec = spectrum_resolvent(p, w) if method == "resolvent" else spectrum_closed_form(p, w)
        found[f"L={L}"] = has_dip(spec)
    mismatches = sum(int(found[f"L={L}"] != e) for L, e in zip(Ls, expected))
    detail = {"method": method, "dip": found,
              "expected": {f"L={L}": e for L, e in zip(Ls, expected)}}
    return CheckResult(f"dip predicate ({method})", mismatches == 0, float(mismatches), 0.0,
                       detail)


def check_mollow(method: str = "resolvent") -> CheckResult:
    """Three maxima at ``0, +-Omega`` within one grid step (0.01 Omega)."""
    p = SystemParams.from_ratios(GAMMA_FIG, 0.0, 0.0)
    w = default_omegas(-10.0, 10.0, 2001, rabi=p.rabi)
    spec = spectrum_resolvent(p, w) if method == "resolvent" else spectrum_closed_form(p, w)
    maxima = w[local_maxima(spec.values)]
    targets = np.array([-1.0, 0.0, 1.0])
    if len(maxima) != 3:
        dev = math.inf
    else:
        dev = float(np.max(np.abs(np.sort(maxima) - targets)))
    step = 0.01
    return CheckResult(f"Mollow triplet maxima ({method})", dev <= step * (1 + 1e-9), dev, step,
                       {"maxima": [float(m) for m in maxima],
                        "shape": classify_spectrum(spec).kind})


# ------------------------------------------------------------- statistical


def _compare_rows(times, name, mean, err, ref):
    rows = []
    ok = True
    worst = 0.0
    for t, m, e, r in zip(times, mean, err, ref):
        diff = abs(m - r)
        within = diff <= 3.0 * e + EXACT_FLOOR
        z = diff / e if e > 0 else (0.0 if diff <= EXACT_FLOOR else math.inf)
        worst = max(worst, z)
        ok &= bool(within)
        rows.append((t, name, m, e, r, z, within))
    return rows, ok, worst


def _ode_reference(p: SystemParams, times) -> np.ndarray:
    return evolve_series(ChiBlock.from_density(p, DensityMatrix.ground()), times)


def _density_comparison(p, times, series, label):
    ode = _ode_reference(p, times)
    rows, ok, worst = [], True, 0.0
    for name, mean, err, ref in (
        ("rho_ee", series.rho_ee, series.rho_ee_err, ode[:, 3].real),
        ("re_chi1", series.chi1.real, series.chi1_err_re, ode[:, 0].real),
        ("im_chi1", series.chi1.imag, series.chi1_err_im, ode[:, 0].imag),
    ):
        r, o, w = _compare_rows(times * p.rabi, f"{label}{name}", mean, err, ref)
        rows += r
        ok &= o
        worst = max(worst, w)
    return rows, ok, worst


def check_sde_vs_ode(n_paths: int = 10_000, seed: int = 0, workers: int = 1,
                     L: float = 0.2) -> CheckResult:
    """Brute-force stochastic Bloch ensemble against the averaged equations."""
    p = fig1_params(L)
    times = np.array(CHECKPOINTS_GAMMA_T) / p.gamma
    series = ensemble_average(p, n_paths, times, master_seed=seed, workers=workers)
    rows, ok, worst = _density_comparison(p, times, series, "")
    csv = reports.csv_text(reports.COMPARISON_HEADER, rows)
    return CheckResult("stochastic Bloch ensemble vs averaged equations", ok, worst, 3.0,
                       {"n_paths": n_paths, "L": L}, {"sde_vs_ode.csv": csv})


def check_trajectories_vs_ode(n_traj: int = 50_000, seed: int = 0, workers: int = 1,
                              settings=((5.0, 0.0), (0.0, 5.0), (5.0, 0.5))) -> CheckResult:
    """Trajectory-averaged density matrix against the averaged equations."""
    all_rows, ok, worst = [], True, 0.0
    for G, L in settings:
        p = SystemParams.from_ratios(GAMMA_FIG, G, L)
        times = np.array(CHECKPOINTS_GAMMA_T) / p.gamma
        dens = ensemble_density(p, n_traj, times, master_seed=seed, workers=workers)
        rows, o, w = _density_comparison(p, times, dens, f"Gamma={G},L={L}:")
        all_rows += rows
        ok &= o
        worst = max(worst, w)
    csv = reports.csv_text(reports.COMPARISON_HEADER, all_rows)
    return CheckResult("trajectory ensemble vs averaged equations", ok, worst, 3.0,
                       {"n_traj": n_traj, "settings": [list(s) for s in settings]},
                       {"trajectories_vs_ode.csv": csv})


def _records_csv(records) -> str:
    rows = []
    for k, rec in enumerate(records):
        for t, d, s, v in zip(rec.times, rec.dphi, rec.sphi, rec.valid):
            rows.append((k, t, d, s, v))
    return reports.csv_text(("trajectory",) + reports.PHASES_HEADER, rows)


def check_phase_sum(n_traj: int = 100, seed: int = 0, workers: int = 1, t_end: float = 200.0,
                    sample_every: int = 10) -> CheckResult:
    """Phase sum constant between emissions without phase noise; drifting with it."""
    tol = 1e-6
    out = {}
    artifacts = {}
    for L in (0.0, 0.05):
        p = fig1_params(L)
        recs = run_trajectories(p, n_traj, t_end, master_seed=seed, sample_every=sample_every,
                                workers=workers)
        drifts = np.concatenate([interjump_phase_sum_drift(r) for r in recs])
        n_em = int(sum(len(r.emission_times()) for r in recs))
        out[f"L={L}"] = {"max_drift": float(drifts.max()), "intervals": int(len(drifts)),
                         "emissions": n_em}
        artifacts[f"phase_sum_L{L}.csv"] = _records_csv(recs[:3])
    quiet = out["L=0.0"]["max_drift"]
    noisy = out["L=0.05"]["max_drift"]
    passed = quiet <= tol and noisy > 10 * tol
    return CheckResult("phase sum constant between emissions", passed, quiet, tol, out, artifacts)


HISTOGRAM_SETTINGS = {
    "collisional": (5.0, 0.0, GAMMA_FIG),
    "phase": (0.0, 5.0, GAMMA_FIG),
    "decay-only": (0.0, 0.0, GAMMA_FIG),
}


def check_phase_histograms(n_traj: int = 40, seed: int = 0, workers: int = 1,
                           t_end: float = 2200.0, sample_dt: float = 0.05) -> CheckResult:
    """Stationary 64-bin histograms of the dressed phase difference."""
    found = {}
    artifacts = {}
    results = {}
    for name, (G, L, g) in HISTOGRAM_SETTINGS.items():
        p = SystemParams.from_ratios(g, G, L)
        every = max(1, int(round(sample_dt / (0.01 / p.max_rate()))))
        recs = run_trajectories(p, n_traj, t_end, master_seed=seed, sample_every=every,
                                workers=workers)
        st = phase_statistics(recs, bins=64)
        found[name] = {"modes": [float(m) for m in st.modes()],
                       "max_min_ratio": st.max_min_ratio()}
        results[name] = st
        artifacts[f"histogram_{name}.csv"] = reports.csv_text(
            reports.HISTOGRAM_HEADER,
            zip(st.centers, st.counts, st.counts / (max(st.n_samples, 1) * st.bin_width)))
    verdicts = {
        "collisional bimodal at 0 and pi": results["collisional"].is_bimodal_zero_pi(),
        "phase unimodal at pi": results["phase"].is_unimodal_pi(),
        "decay-only max/min < 2": results["decay-only"].max_min_ratio() < 2.0,
    }
    found["verdicts"] = verdicts
    failed = sum(not v for v in verdicts.values())
    return CheckResult("phase-difference histograms", failed == 0, float(failed), 0.0, found,
                       artifacts)


CORRELATION_SETTINGS = {"collisional": (5.0, 0.0), "phase": (0.0, 5.0), "both": (5.0, 5.0)}
SURROGATE_LAGS = (0.25, 0.5, 0.75, 1.0)


def check_cos_correlation(n_traj: int = 20, seed: int = 0, workers: int = 1,
                          t_end: float = 1000.0, sample_dt: float = 0.05,
                          tau_max: float = 1.0) -> CheckResult:
    """``C_cos`` positive and above 0.2 up to ``tau = 1/Omega``; shuffled control near zero."""
    taus = np.round(np.arange(0, int(round(tau_max / sample_dt)) + 1) * sample_dt, 12)
    detail = {}
    artifacts = {}
    ok = True
    worst = math.inf
    for name, (G, L) in CORRELATION_SETTINGS.items():
        p = SystemParams.from_ratios(GAMMA_FIG, G, L)
        every = int(round(sample_dt / (0.01 / p.max_rate())))
        recs = run_trajectories(p, n_traj, t_end, master_seed=seed, sample_every=every,
                                workers=workers)
        corr = cos_correlation(recs, taus)
        sur = cos_correlation(recs, taus, shuffle_seed=seed + 1)
        bound = 3.0 / math.sqrt(sur.n_samples)
        lag_idx = [int(np.argmin(np.abs(taus - s))) for s in SURROGATE_LAGS]
        sur_max = float(np.max(np.abs(sur.values[lag_idx])))
        c0_ok = abs(corr.values[0] - 1.0) < 1e-12
        min_c = float(np.min(corr.values))
        this_ok = c0_ok and min_c > 0.2 and sur_max < bound
        ok &= this_ok
        worst = min(worst, min_c)
        detail[name] = {"C0": float(corr.values[0]), "min_C_up_to_tau_max": min_c,
                        "surrogate_max": sur_max, "surrogate_bound": bound, "passed": this_ok}
        artifacts[f"correlation_{name}.csv"] = reports.csv_text(
            reports.CORRELATION_HEADER + ("C_cos_shuffled",), zip(taus, corr.values, sur.values))
    return CheckResult("C_cos correlation", ok, worst, 0.2, detail, artifacts)


# ----------------------------------------------------------------- the suite


@dataclass
class SuiteReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({"passed": self.passed, "checks": [c.record() for c in self.checks]},
                          indent=2, sort_keys=True, default=float)


def validate_suite(n_paths: int = 1000, n_traj: int = 1000, seed: int = 0,
                   workers: int = 1, fault: bool = False) -> SuiteReport:
    """Run the cross-check battery at the given Monte Carlo sizes.

    ``fault`` perturbs one entry of the double-primed generator for the
    duration of the run, which the exact-math checks must catch.
    """
    if fault:
        with injected_fault():
            return validate_suite(n_paths, n_traj, seed, workers)
    checks = [
        check_generator_identity(),
        check_closed_form_transcription(),
        check_route_equivalence(),
        check_dip("resolvent"),
        check_dip("analytic"),
        check_mollow("resolvent"),
        check_mollow("analytic"),
        check_sde_vs_ode(n_paths=n_paths, seed=seed, workers=workers),
        check_trajectories_vs_ode(n_traj=n_traj, seed=seed, workers=workers),
        check_phase_sum(seed=seed, workers=workers),
    ]
    return SuiteReport(checks)
