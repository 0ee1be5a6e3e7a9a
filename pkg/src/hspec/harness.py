"""Monte Carlo experiment runner and theory tables.

Config files are flat ``key = value`` text (``#`` starts a comment)::

    n = 2000
    d = 1000
    xi = identity
    sigma = circulant:0.0078:300
    lambda_grid = 1.2, 1.5, 2.0
    lambda_relative = true      # grid values are multiples of lambda*
    trials = 20
    estimators = OptimalSpectral, Vanilla, Whiten

Covariance specs: ``identity``, ``toeplitz:RHO``, ``circulant:C:ELL``.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import io
import logging
import math
import os
import statistics
import struct
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import amp, estimators, spectra, theory
from .errors import BelowThreshold, ConfigError, NotPositiveDefinite
from .model import PRIORS, sample_instance

log = logging.getLogger(__name__)

CSV_COLUMNS = ("kind", "lambda", "trial", "estimator", "overlap_u", "overlap_v",
               "mse_uu", "mse_vv", "mse_uv", "sigma1", "sigma2", "seed")
THEORY_COLUMNS = ("lambda", "lambda_star", "above_threshold", "q_u", "q_v", "mu", "nu", "b", "c",
                  "eta_u", "eta_v", "sigma2", "mmse_matrix", "mmse_u", "mmse_v",
                  "trivial_matrix", "trivial_u", "trivial_v")
_METRICS = ("overlap_u", "overlap_v", "mse_uu", "mse_vv", "mse_uv", "sigma1", "sigma2")


@dataclass
class ExperimentConfig:
    n: int
    d: int
    xi_spec: str = "identity"
    sigma_spec: str = "identity"
    prior: str = "gaussian"
    lambda_grid: tuple = (1.0,)
    lambda_relative: bool = False
    trials: int = 1
    base_seed: int = 0
    estimators: tuple = (estimators.OPTIMAL, estimators.VANILLA, estimators.WHITEN)
    amp_steps: int = 10
    measure_resolution: int = spectra.DEFAULT_RESOLUTION
    output_path: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n < 1 or self.d < 1:
            raise ConfigError("n and d must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        grid = list(self.lambda_grid)
        if not grid:
            raise ConfigError("lambda_grid is empty")
        if any(not math.isfinite(x) or x < 0 for x in grid):
            raise ConfigError("lambda_grid entries must be finite and non-negative")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("lambda_grid must be strictly increasing")
        if self.prior not in PRIORS:
            raise ConfigError(f"prior must be one of {PRIORS}")
        bad = [e for e in self.estimators if e not in estimators.ESTIMATORS]
        if bad:
            raise ConfigError(f"unknown estimators {bad}; choose from {estimators.ESTIMATORS}")
        if self.amp_steps < 1:
            raise ConfigError("amp_steps must be >= 1")
        if self.measure_resolution < 1:
            raise ConfigError("measure_resolution must be >= 1")
        parse_covariance(self.xi_spec, self.n, build=False)
        parse_covariance(self.sigma_spec, self.d, build=False)

    @property
    def delta(self):
        return self.n / self.d


def _floats(text):
    return tuple(float(x) for x in text.replace(";", ",").split(",") if x.strip())


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_PARSERS = {
    "n": ("n", int),
    "d": ("d", int),
    "xi": ("xi_spec", str),
    "sigma": ("sigma_spec", str),
    "prior": ("prior", str),
    "lambda_grid": ("lambda_grid", _floats),
    "lambda_relative": ("lambda_relative", _bool),
    "trials": ("trials", int),
    "base_seed": ("base_seed", int),
    "estimators": ("estimators", lambda s: tuple(x.strip() for x in s.split(",") if x.strip())),
    "amp_steps": ("amp_steps", int),
    "measure_resolution": ("measure_resolution", int),
    "output_path": ("output_path", str),
}


def parse_config_text(text: str, **overrides) -> ExperimentConfig:
    """Build a config from ``key = value`` lines; keyword overrides win."""
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        name, conv = _PARSERS[key]
        try:
            kwargs[name] = conv(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    for req in ("n", "d"):
        if req not in kwargs:
            raise ConfigError(f"missing required key {req!r}")
    return ExperimentConfig(**kwargs)


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read(), **overrides)


def parse_covariance(spec: str, dim: int, build: bool = True):
    """``identity`` | ``toeplitz:RHO`` | ``circulant:C:ELL`` -> CovarianceModel."""
    parts = [p.strip() for p in spec.split(":")]
    kind = parts[0].lower()
    try:
        if kind == "identity" and len(parts) == 1:
            return spectra.make_identity(dim) if build else None
        if kind == "toeplitz" and len(parts) == 2:
            rho = float(parts[1])
            if not 0 <= rho < 1 or dim < 2:
                raise ConfigError(f"toeplitz needs 0 <= rho < 1 and dim >= 2, got {spec!r}")
            return spectra.make_toeplitz(dim, rho) if build else None
        if kind == "circulant" and len(parts) == 3:
            c, ell = float(parts[1]), int(parts[2])
            if ell < 1 or 2 * ell + 1 > dim:
                raise ConfigError(f"circulant needs 1 <= ell and 2*ell+1 <= dim, got {spec!r}")
            return spectra.make_circulant(dim, c, ell) if build else None
    except NotPositiveDefinite as exc:
        raise ConfigError(f"{spec!r}: {exc}") from None
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad covariance spec {spec!r}: {exc}") from None
    raise ConfigError(f"bad covariance spec {spec!r}")


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Setting:
    """Covariances and their limiting measures, shared read-only by workers."""

    xi: spectra.CovarianceModel
    sigma: spectra.CovarianceModel
    xi_measure: spectra.SpectralMeasure
    sigma_measure: spectra.SpectralMeasure
    delta: float
    lambda_star: float


def build_setting(cfg: ExperimentConfig) -> Setting:
    xi = parse_covariance(cfg.xi_spec, cfg.n)
    sigma = parse_covariance(cfg.sigma_spec, cfg.d)
    mx = spectra.measure_of(xi, min(cfg.measure_resolution, cfg.n))
    ms = spectra.measure_of(sigma, min(cfg.measure_resolution, cfg.d))
    return Setting(xi, sigma, mx, ms, cfg.delta, theory.weak_recovery_threshold(mx, ms, cfg.delta))


def lambda_values(cfg: ExperimentConfig, setting: Setting):
    scale = setting.lambda_star if cfg.lambda_relative else 1.0
    return [scale * x for x in cfg.lambda_grid]


def trial_seed(base_seed: int, lam: float, trial: int) -> int:
    """``base_seed`` XOR a 63-bit hash of (lambda bit pattern, trial)."""
    h = hashlib.blake2b(struct.pack("<dQ", float(lam), trial), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(h, "little")) & 0x7FFFFFFFFFFFFFFF


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.12g" % x


def _csv_line(values) -> str:
    return ",".join(_fmt(v) for v in values) + "\n"


def _theory_row(lam, th: theory.TheoryParams):
    eu2, ev2 = th.eta_u**2, th.eta_v**2
    return {
        "kind": "theory", "lambda": lam, "trial": None, "estimator": None,
        "overlap_u": th.eta_u, "overlap_v": th.eta_v,
        "mse_uu": 1 - eu2 * eu2, "mse_vv": 1 - ev2 * ev2, "mse_uv": 1 - eu2 * ev2,
        "sigma1": 1.0 if th.above_threshold else None, "sigma2": th.sigma2_star, "seed": None,
    }


def _run_trial(cfg, setting: Setting, lam, th, trial):
    seed = trial_seed(cfg.base_seed, lam, trial)
    inst = sample_instance(setting.xi, setting.sigma, lam, cfg.prior, seed)
    rows = []
    for name in cfg.estimators:
        rep = None
        try:
            if name == estimators.OPTIMAL:
                rep = estimators.optimal_spectral(inst, setting.xi, setting.sigma, th)
            elif name == estimators.VANILLA:
                rep = estimators.vanilla_svd(inst)
            elif name == estimators.WHITEN:
                rep = estimators.whiten_svd(inst, setting.xi, setting.sigma)
            else:
                rep = amp.amp_estimate(inst, setting.xi, setting.sigma, th, cfg.amp_steps, seed,
                                       measures=(setting.xi_measure, setting.sigma_measure))
        except BelowThreshold:
            pass
        row = {"kind": "sim", "lambda": lam, "trial": trial, "estimator": name, "seed": seed}
        for m in _METRICS:
            row[m] = None
        if rep is not None:
            row.update(overlap_u=rep.overlap_u, overlap_v=rep.overlap_v, mse_uu=rep.mse_uu,
                       mse_vv=rep.mse_vv, mse_uv=rep.mse_uv, sigma1=rep.sigma1_Astar,
                       sigma2=rep.sigma2_Astar)
        rows.append(row)
    return rows


def _workers(jobs):
    cap = os.environ.get("HSPEC_THREADS")
    n = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(n, jobs))


def _summarise(rows):
    """mean/sd per (lambda, estimator) over the sim rows."""
    groups = {}
    for r in rows:
        if r["kind"] == "sim":
            groups.setdefault((r["lambda"], r["estimator"]), []).append(r)
    out = []
    for (lam, name), grp in groups.items():
        entry = {"lambda": lam, "estimator": name, "trials": len(grp)}
        for m in _METRICS:
            vals = [g[m] for g in grp if g[m] is not None]
            entry[m] = statistics.fmean(vals) if vals else None
            entry[m + "_sd"] = statistics.stdev(vals) if len(vals) > 1 else (0.0 if vals else None)
        out.append(entry)
    return out


def run_experiment(cfg: ExperimentConfig, out=None, stream=None, quiet=False):
    """Run the configured sweep; write the CSV and print a summary.

    ``out`` (path or text file object) defaults to ``cfg.output_path``; with
    neither, no CSV is written. The summary goes to ``stream`` (stdout by
    default) unless ``quiet``. Returns ``(rows, summary)``.
    """
    setting = build_setting(cfg)
    lams = lambda_values(cfg, setting)
    thetas = [theory.compute_theory(setting.xi_measure, setting.sigma_measure, cfg.delta, lam)
              for lam in lams]

    jobs = [(i, t) for i in range(len(lams)) for t in range(cfg.trials)]
    with ThreadPoolExecutor(max_workers=_workers(len(jobs))) as pool:
        futures = [pool.submit(_run_trial, cfg, setting, lams[i], thetas[i], t) for i, t in jobs]
        sims = [f.result() for f in futures]

    rows = []
    k = 0
    for i, lam in enumerate(lams):
        rows.append(_theory_row(lam, thetas[i]))
        for _ in range(cfg.trials):
            rows.extend(sims[k])
            k += 1

    target = out if out is not None else cfg.output_path
    if target is not None:
        write_csv(rows, CSV_COLUMNS, target)
    summary = _summarise(rows)
    if not quiet:
        print(format_summary(setting, summary, thetas, lams), file=stream or sys.stdout)
    return rows, summary


def format_summary(setting, summary, thetas, lams) -> str:
    buf = io.StringIO()
    buf.write(f"lambda* = {setting.lambda_star:.6g}\n")
    by_lam = {lam: th for lam, th in zip(lams, thetas)}
    for entry in summary:
        th = by_lam[entry["lambda"]]
        parts = [f"lambda={entry['lambda']:.5g}", f"{entry['estimator']:<15}"]
        for m in ("overlap_u", "overlap_v", "mse_uv", "sigma1", "sigma2"):
            if entry[m] is not None:
                parts.append(f"{m}={entry[m]:.4f}±{entry[m + '_sd']:.4f}")
        if entry["overlap_u"] is None:
            parts.append("below threshold")
        elif entry["estimator"] == estimators.OPTIMAL:
            parts.append(f"(eta_u={th.eta_u:.4f} eta_v={th.eta_v:.4f})")
        buf.write("  ".join(parts) + "\n")
    return buf.getvalue().rstrip("\n")


def write_csv(rows, columns, target):
    stamp = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"# generated {stamp}\n", ",".join(columns) + "\n"]
    lines.extend(_csv_line(r.get(c) for c in columns) for r in rows)
    if hasattr(target, "write"):
        target.writelines(lines)
        return
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(lines)


def theory_table(cfg: ExperimentConfig, out=None):
    """Theory quantities per grid point (no sampling); writes CSV if a target is given."""
    setting = build_setting(cfg)
    rows = []
    for lam in lambda_values(cfg, setting):
        th = theory.compute_theory(setting.xi_measure, setting.sigma_measure, cfg.delta, lam)
        mm = theory.mmse_limits(setting.xi_measure, setting.sigma_measure, th.q_u_star, th.q_v_star)
        rows.append({
            "lambda": lam, "lambda_star": th.lambda_star, "above_threshold": th.above_threshold,
            "q_u": th.q_u_star, "q_v": th.q_v_star, "mu": th.mu_star, "nu": th.nu_star,
            "b": th.b_star if th.above_threshold else None,
            "c": th.c_star if th.above_threshold else None,
            "eta_u": th.eta_u, "eta_v": th.eta_v, "sigma2": th.sigma2_star,
            "mmse_matrix": mm.mmse_matrix, "mmse_u": mm.mmse_u, "mmse_v": mm.mmse_v,
            "trivial_matrix": mm.trivial_matrix, "trivial_u": mm.trivial_u, "trivial_v": mm.trivial_v,
        })
    target = out if out is not None else cfg.output_path
    if target is not None:
        write_csv(rows, THEORY_COLUMNS, target)
    return rows


def spectrum_table(cfg: ExperimentConfig, out=None):
    """Singular values of ``A`` and ``A*`` averaged over trials, one grid point.

    Uses the first entry of the lambda grid.
    """
    setting = build_setting(cfg)
    lam = lambda_values(cfg, setting)[0]
    th = theory.compute_theory(setting.xi_measure, setting.sigma_measure, cfg.delta, lam)
    raw, pre = [], []
    for t in range(cfg.trials):
        inst = sample_instance(setting.xi, setting.sigma, lam, cfg.prior, trial_seed(cfg.base_seed, lam, t))
        raw.append(np.linalg.svd(inst.A, compute_uv=False))
        if th.above_threshold:
            pre.append(np.linalg.svd(estimators.preprocess(inst, setting.xi, setting.sigma, th),
                                     compute_uv=False))
    rows = [{"matrix": "A", "index": i, "value": v} for i, v in enumerate(np.mean(raw, axis=0))]
    if pre:
        rows += [{"matrix": "Astar", "index": i, "value": v} for i, v in enumerate(np.mean(pre, axis=0))]
    target = out if out is not None else cfg.output_path
    if target is not None:
        write_csv(rows, ("matrix", "index", "value"), target)
    return rows


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
