"""Run-directory orchestration behind the CLI verbs.

Layout of one run (``<out>/<hash>/``, hash over the spectrum-defining fields)::

    manifest.json        parameters and output files of every step
    spectra/             K<k>_lam<i>.npz per coupling, convergence.csv
    stats/               hist_lam<i>.csv, levelstats_summary.csv, fig1.svg
    ofs/                 ofs_sweep.csv, partial_sums.csv, summary.json, fig*.svg
    oracle/              oracle_report.csv
"""

from __future__ import annotations

import logging
import math
import os
import platform
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__, io, plots
from .config import RunConfig
from .levelstats import histogram, ks_distance, reference_poisson, reference_wigner, sample_wigner, unfold
from .model import build_family
from .ofs import WeightMode, chi1_shape, chi2_trend, sweep
from .oracle import oracle_suite
from .spectral import ConvergedWindow, Spectrum, convergence_filter, diagonalize, lambda_grid

log = logging.getLogger(__name__)


class MissingSpectrumError(LookupError):
    pass


@dataclass
class StepResult:
    run_dir: Path
    files: list[Path] = field(default_factory=list)
    failures: list[tuple[float, str]] = field(default_factory=list)
    info: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def spectrum_key(cfg: RunConfig) -> dict:
    return {
        "K": cfg.K,
        "K_prime": cfg.K_prime,
        "grid": [float(x) for x in coupling_grid(cfg)],
        "tol": "inf" if math.isinf(cfg.tol) else cfg.tol,
        "dc_policy": cfg.dc_policy,
    }


def coupling_grid(cfg: RunConfig) -> np.ndarray:
    if cfg.lambda_values:
        return np.unique(np.asarray(cfg.lambda_values, dtype=float))
    anchors = tuple(cfg.levelstats_lambdas) + tuple(cfg.partial_lambdas)
    return lambda_grid(cfg.lambda_min, cfg.lambda_max, cfg.lambda_count, cfg.spacing, anchors)


def run_dir(cfg: RunConfig) -> Path:
    return Path(cfg.output_dir) / io.config_hash(spectrum_key(cfg))


def _manifest_path(rd: Path) -> Path:
    return rd / "manifest.json"


def load_manifest(rd: Path) -> dict:
    p = _manifest_path(rd)
    return io.read_json(p) if p.exists() else {}


def _update_manifest(rd: Path, section: str, payload: dict, cfg: RunConfig) -> None:
    man = load_manifest(rd)
    man.update(
        {
            "schema_version": 1,
            "tool_version": __version__,
            "run_hash": rd.name,
            "spectrum_key": spectrum_key(cfg),
            "platform": {"python": platform.python_version(), "numpy": np.__version__},
        }
    )
    man[section] = payload
    man["config"] = cfg.as_dict()
    io.write_json(_manifest_path(rd), man)


def _files_entry(rd: Path, files: Sequence[Path]) -> dict:
    return {str(Path(f).relative_to(rd)): io.file_sha256(f) for f in files}


def _jobs(cfg: RunConfig) -> int:
    return cfg.jobs if cfg.jobs > 0 else (os.cpu_count() or 1)


def _valid_spectrum(path: Path, lam: float, K: int) -> np.ndarray | None:
    if not path.exists():
        return None
    try:
        d = io.load_spectrum(path)
    except Exception:  # corrupt or partial file: recompute
        return None
    if d["K"] != K or d["lam"] != lam:
        return None
    return d["eigenvalues"]


# spectrum


def run_spectrum(cfg: RunConfig) -> StepResult:
    rd = run_dir(cfg)
    sdir = rd / "spectra"
    grid = coupling_grid(cfg)
    fam, fam_p = build_family(cfg.K), build_family(cfg.K_prime)
    res = StepResult(rd)
    reused = 0

    def job(item):
        i, lam = item
        out = {}
        for f, store in ((fam, cfg.store_vectors), (fam_p, False)):
            path = sdir / io.spectrum_filename(f.K, i)
            vals = _valid_spectrum(path, float(lam), f.K)
            if vals is None:
                spec = diagonalize(f, float(lam), vectors=store)
                io.save_spectrum(path, lam, f.K, spec.eigenvalues, spec.eigenvectors)
                vals, fresh = spec.eigenvalues, True
            else:
                fresh = False
            out[f.K] = (vals, path, fresh)
        return i, lam, out

    items = list(enumerate(grid))
    jobs = _jobs(cfg)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_guard(job), items))
    else:
        outcomes = [_guard(job)(it) for it in items]

    spectra, spectra_p = [], []
    for (i, lam), outcome in zip(items, outcomes):
        if isinstance(outcome, Exception):
            res.failures.append((float(lam), str(outcome)))
            continue
        _, _, out = outcome
        vals, path, fresh = out[cfg.K]
        vals_p, path_p, fresh_p = out[cfg.K_prime]
        reused += (not fresh) + (not fresh_p)
        spectra.append(Spectrum(float(lam), cfg.K, vals))
        spectra_p.append(Spectrum(float(lam), cfg.K_prime, vals_p))
        res.files.extend([path, path_p])
    if not spectra:
        raise RuntimeError("every coupling failed; see log")

    window = convergence_filter(spectra, spectra_p, cfg.tol)
    D_c = window.D_c if cfg.dc_policy == "auto" else min(int(cfg.dc_policy), spectra[0].dim)
    conv = io.write_csv(
        sdir / "convergence.csv",
        ("index", "lambda", "n_converged", "dim_K"),
        [(i, s.lam, n, s.dim) for i, (s, n) in enumerate(zip(spectra, window.per_lambda))],
    )
    res.files.append(conv)
    res.info = {
        "K": cfg.K,
        "K_prime": cfg.K_prime,
        "dim_K": spectra[0].dim,
        "dim_K_prime": spectra_p[0].dim,
        "grid": [float(x) for x in grid],
        "tol": "inf" if math.isinf(cfg.tol) else cfg.tol,
        "dc_policy": cfg.dc_policy,
        "D_c_auto": window.D_c,
        "D_c": D_c,
        "store_vectors": cfg.store_vectors,
        "reused_files": reused,
        "failures": [[lam, msg] for lam, msg in res.failures],
        "warning": window.warning,
    }
    _update_manifest(rd, "spectrum", {**res.info, "files": _files_entry(rd, res.files)}, cfg)
    return res


def _guard(fn):
    def wrapped(item):
        try:
            return fn(item)
        except Exception as exc:  # isolate per-lambda failures
            log.error("coupling %r failed: %s", item[1], exc)
            return exc

    return wrapped


def _spectrum_section(rd: Path) -> dict:
    sec = load_manifest(rd).get("spectrum")
    if not sec:
        raise MissingSpectrumError(f"no spectra in {rd}; run the 'spectrum' step first")
    return sec


def _grid_index(grid: Sequence[float], lam: float) -> int:
    for i, g in enumerate(grid):
        if math.isclose(g, lam, rel_tol=1e-9, abs_tol=0.0):
            return i
    raise MissingSpectrumError(f"no spectrum for lambda={lam!r} on the run grid")


def load_eigenvalues(rd: Path, lam: float) -> np.ndarray:
    sec = _spectrum_section(rd)
    i = _grid_index(sec["grid"], lam)
    path = rd / "spectra" / io.spectrum_filename(sec["K"], i)
    vals = _valid_spectrum(path, float(sec["grid"][i]), sec["K"])
    if vals is None:
        raise MissingSpectrumError(f"spectrum file for lambda={lam!r} missing or invalid: {path}")
    return vals


# level statistics


def run_levelstats(cfg: RunConfig, lambdas: Sequence[float] | None = None) -> StepResult:
    rd = run_dir(cfg)
    sec = _spectrum_section(rd)
    D_c = sec["D_c"]
    lambdas = list(lambdas if lambdas is not None else cfg.levelstats_lambdas)
    sdir = rd / "stats"
    res = StepResult(rd)
    summary, hists = [], {}
    for lam in lambdas:
        i = _grid_index(sec["grid"], lam)
        vals = load_eigenvalues(rd, lam)[:D_c]
        sample = unfold(vals, cfg.unfold_window, source=(lam, D_c, sec["K"]))
        h = histogram(sample, cfg.bins, cfg.s_max)
        mid = h.midpoints
        path = io.write_csv(
            sdir / f"hist_lam{i:04d}.csv",
            io.HISTOGRAM_COLUMNS,
            zip(h.bin_edges[:-1], h.bin_edges[1:], h.densities, reference_poisson(mid), reference_wigner(mid)),
        )
        res.files.append(path)
        hists[float(sec["grid"][i])] = {"edges": h.bin_edges, "densities": h.densities}
        summary.append((float(sec["grid"][i]), ks_distance(sample, "poisson"), ks_distance(sample, "wigner"), vals.size))
    res.files.append(io.write_csv(sdir / "levelstats_summary.csv", io.LEVELSTATS_SUMMARY_COLUMNS, summary))
    fig = plots.plot_spacing_histograms(hists, sdir / "fig1.svg")
    if fig:
        res.files.append(fig)

    # finite-sample KS scale for reference: seeded draws of the same size
    rng = np.random.default_rng(cfg.seed)
    n = max(D_c - 1, 1)
    calib = {
        "poisson_sample_vs_poisson": ks_distance(rng.exponential(size=n), "poisson"),
        "wigner_sample_vs_wigner": ks_distance(sample_wigner(rng, n), "wigner"),
    }
    res.info = {
        "lambdas": [row[0] for row in summary],
        "D_c": D_c,
        "unfold_window": cfg.unfold_window,
        "bins": cfg.bins,
        "s_max": cfg.s_max,
        "seed": cfg.seed,
        "trimming": "none",
        "ks_calibration": calib,
        "summary": [dict(zip(io.LEVELSTATS_SUMMARY_COLUMNS, row)) for row in summary],
    }
    _update_manifest(rd, "levelstats", {**res.info, "files": _files_entry(rd, res.files)}, cfg)
    return res


# OFS sweep


def _modes(temps: Sequence[float]) -> list[WeightMode]:
    return [WeightMode.from_temperature(T) for T in temps]


def run_ofs(cfg: RunConfig) -> StepResult:
    rd = run_dir(cfg)
    sec = _spectrum_section(rd)
    grid = [float(x) for x in sec["grid"]]
    D_c = sec["D_c"]
    if D_c < 1:
        raise ValueError("converged window is empty; loosen tol or raise K")
    window = ConvergedWindow(
        D_c=D_c,
        tol=float(sec["tol"]),
        K_pair=(sec["K"], sec["K_prime"]),
        lambda_grid=tuple(grid),
    )
    modes = _modes(cfg.temperature_list)
    fam = build_family(cfg.K)
    partial = [g for g in grid if any(math.isclose(g, p, rel_tol=1e-9) for p in cfg.partial_lambdas)]
    # partial sums at a single temperature, so the mode column is unambiguous
    partial_mode = WeightMode.from_temperature(cfg.partial_temperature)
    result = sweep(
        fam, None, grid, window.tol, cfg.t_list, modes, "auto", partial, _jobs(cfg),
        window=window, partial_modes=[partial_mode],
    )
    odir = rd / "ofs"
    res = StepResult(rd, failures=list(result.failures))
    sweep_rows = [
        (p.lam, p.t, p.mode.kind, p.mode.beta, p.chi1, p.chi2, p.D_c, p.K) for p in result.points
    ]
    res.files.append(io.write_csv(odir / "ofs_sweep.csv", io.OFS_SWEEP_COLUMNS, sweep_rows))
    partial_rows = [
        (c.lam, c.t, c.mode.kind, int(D), float(v))
        for c in sorted(result.curves, key=lambda c: (c.lam, c.t))
        for D, v in enumerate(c.values, start=1)
    ]
    res.files.append(io.write_csv(odir / "partial_sums.csv", io.PARTIAL_SUM_COLUMNS, partial_rows))

    summary = {}
    for t in cfg.t_list:
        for m in modes:
            pts = result.select(t, m)
            if len(pts) < 3:
                continue
            lams = np.array([p.lam for p in pts])
            summary[f"t={t:g},{m.label}"] = {
                "chi1": chi1_shape(lams, np.array([p.chi1 for p in pts])),
                "chi2": chi2_trend(lams, np.array([p.chi2 for p in pts]), np.array([p.chi1 for p in pts])),
            }
    res.files.append(io.write_json(odir / "summary.json", summary))

    str_sweep = io.read_csv(odir / "ofs_sweep.csv", io.OFS_SWEEP_COLUMNS)
    str_partial = [
        r for r in io.read_csv(odir / "partial_sums.csv", io.PARTIAL_SUM_COLUMNS) if float(r["t"]) == min(cfg.t_list)
    ]
    res.files.extend(plots.ofs_figures(str_sweep, str_partial, odir, cfg.K, D_c))

    res.info = {
        "K": cfg.K,
        "D_c": D_c,
        "t_list": list(cfg.t_list),
        "temperatures": ["inf" if math.isinf(T) else T for T in cfg.temperature_list],
        "partial_lambdas": partial,
        "partial_sums": {"temperature": partial_mode.label, "figure_t": min(cfg.t_list)},
        "failures": [[lam, msg] for lam, msg in res.failures],
        "summation": "math.fsum over the full double sum",
    }
    _update_manifest(rd, "ofs", {**res.info, "files": _files_entry(rd, res.files)}, cfg)
    return res


# oracle


def run_oracle(cfg: RunConfig) -> StepResult:
    rd = run_dir(cfg)
    rows = oracle_suite(
        cfg.oracle_K, cfg.oracle_lambdas, cfg.oracle_t, _modes(cfg.oracle_temperatures), cfg.oracle_delta_lambda
    )
    res = StepResult(rd)
    res.files.append(write_oracle_report(rd / "oracle" / "oracle_report.csv", rows))
    worst = max((r.mismatch for r in rows if r.delta_lambda == 0.0), default=0.0)
    if worst > cfg.oracle_threshold:
        res.failures.append((float("nan"), f"extrapolated mismatch {worst:.3g} > {cfg.oracle_threshold}"))
    res.info = {
        "K": list(cfg.oracle_K),
        "lambdas": list(cfg.oracle_lambdas),
        "t": list(cfg.oracle_t),
        "temperatures": ["inf" if math.isinf(T) else T for T in cfg.oracle_temperatures],
        "delta_lambda": cfg.oracle_delta_lambda,
        "extrapolation": "Richardson, first order, step ratio 2",
        "threshold": cfg.oracle_threshold,
        "worst_extrapolated_mismatch": worst,
    }
    _update_manifest(rd, "oracle", {**res.info, "files": _files_entry(rd, res.files)}, cfg)
    return res


def write_oracle_report(path: Path, rows) -> Path:
    return io.write_csv(
        path,
        io.ORACLE_COLUMNS,
        [
            (r.K, r.lam, r.delta_lambda, r.t, r.mode.kind if r.mode.kind == "infinite" else f"gibbs(T={r.mode.temperature:g})",
             r.F, r.fd_chi, r.chi1, r.chi2, r.mismatch)
            for r in rows
        ],
    )
