"""Batch experiment driver.

Subcommands (all take a JSON config, see README for the format):

    langevin-contract couple        --config cfg.json [--force] [--out DIR]
    langevin-contract certify      --config cfg.json [--out DIR]
    langevin-contract gaussian-scan --config cfg.json [--out DIR]
    langevin-contract glc-scan     --config cfg.json [--out DIR]

Exit codes: 0 success, 2 config error, 3 inadmissible parameters or
numerical divergence without --force.  Outputs are deterministic functions
of (config, seeds): floats are printed with 17 significant digits, files
are written atomically, and grid order is the config order.  The optional
LANGEVIN_CONTRACT_WORKERS environment variable caps the number of worker
threads used for independent grid points (default 1).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import certificates, gaussian, glc
from .coupling import (
    CouplingError,
    certified_rate,
    certified_stepsize_threshold,
    empirical_rate,
    positive_prefix,
    run_synchronous_coupling,
    verify_trace_bound,
)
from .integrators import OVERDAMPED_SCHEMES, PhaseState, Scheme, StepParams
from .norms import WeightedNorm
from .potentials import PotentialError, make_potential

WORKERS_ENV = "LANGEVIN_CONTRACT_WORKERS"


class ConfigError(ValueError):
    """Malformed or inconsistent experiment config."""


class DivergenceError(RuntimeError):
    """Inadmissible parameters or divergence encountered without --force."""


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    _atomic_write(path, buf.getvalue())


def _write_json(path: Path, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _jsonable(x):
    if isinstance(x, float):
        return None if math.isnan(x) else x
    return x


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}:{e.colno}: {e.msg}")


def _schemes(cfg: dict) -> list[Scheme]:
    names = cfg.get("schemes")
    if not names or not isinstance(names, list):
        raise ConfigError("config needs a non-empty 'schemes' list")
    try:
        return [Scheme(name) for name in names]
    except ValueError as e:
        known = ", ".join(s.value for s in Scheme)
        raise ConfigError(f"{e}; known schemes: {known}")


def _potential(cfg: dict):
    spec = cfg.get("potential")
    if not isinstance(spec, dict):
        raise ConfigError("config needs a 'potential' mapping")
    try:
        return make_potential(spec)
    except PotentialError as e:
        raise ConfigError(f"potential: {e}")


def _grid(cfg: dict, section: str, key: str, required: bool = True) -> list[float]:
    block = cfg.get(section, {})
    val = block.get(key)
    if val is None:
        if required:
            raise ConfigError(f"config needs '{section}.{key}'")
        return []
    vals = val if isinstance(val, list) else [val]
    if not vals:
        raise ConfigError(f"'{section}.{key}' must be non-empty")
    return [float(x) for x in vals]


def _seeds(cfg: dict) -> list[int]:
    seeds = cfg.get("params", {}).get("seeds", [0])
    seeds = seeds if isinstance(seeds, list) else [seeds]
    if any((not isinstance(s, int)) or s < 0 for s in seeds):
        raise ConfigError("'params.seeds' must be non-negative integers")
    return seeds


def _out_dir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _n_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    return max(1, n)


def _run_grid(fn, items):
    """Evaluate fn over items, preserving order; threads when configured."""
    workers = _n_workers()
    if workers == 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _phase_state(block, key: str, dim: int) -> PhaseState:
    raw = block.get(key)
    if raw is None:
        raise ConfigError(f"config needs 'coupling.{key}'")
    arr = np.asarray(raw, dtype=float)
    if arr.shape == (dim,):
        arr = np.stack([arr, np.zeros(dim)])
    if arr.shape != (2, dim):
        raise ConfigError(f"'coupling.{key}' must be [x, v] with dim {dim}, got shape {arr.shape}")
    return PhaseState(arr[0], arr[1])


def cmd_couple(cfg: dict, args) -> int:
    pot = _potential(cfg)
    schemes = _schemes(cfg)
    hs = _grid(cfg, "params", "h")
    gammas = _grid(cfg, "params", "gamma")
    seeds = _seeds(cfg)
    n_steps = int(cfg.get("params", {}).get("n_steps", 1000))
    if n_steps < 0:
        raise ConfigError("'params.n_steps' must be non-negative")
    coupling_block = cfg.get("coupling", {})
    z0 = _phase_state(coupling_block, "z0", pot.dim)
    z1 = _phase_state(coupling_block, "z0_tilde", pot.dim)
    out = _out_dir(cfg, args)

    jobs = [(s, h, g, seed) for s in schemes for h in hs for g in gammas for seed in seeds]
    blocked = []
    for s, h, g, _ in jobs:
        rate = certified_rate(s, pot.m, pot.M, g, h)
        if not rate.admissible and not args.force:
            blocked.append(f"{s.value} h={h} gamma={g}: " + "; ".join(rate.violated()))
    if blocked:
        for msg in blocked:
            print(f"inadmissible without --force: {msg}", file=sys.stderr)
        raise DivergenceError(f"{len(blocked)} inadmissible grid points")

    def run(job):
        s, h, g, seed = job
        rate = certified_rate(s, pot.m, pot.M, g, h)
        params = StepParams(h, g)
        # forced runs can land where the certified norm degenerates (b^2 >= a);
        # fall back to the cross-term-free norm to still record the divergence
        norm = rate.norm if rate.b**2 < rate.a else WeightedNorm(rate.a, 0.0)
        trace = run_synchronous_coupling(
            s, pot, z0, z1, params, n_steps, seed, force=True, norm=norm
        )
        ok, first_bad = (None, None)
        if rate.admissible:
            ok, first_bad = verify_trace_bound(trace, rate)
        try:
            c_hat = empirical_rate(positive_prefix(trace))
        except CouplingError:
            c_hat = math.nan
        name = f"couple_{s.value}_h{h:g}_g{g:g}_s{seed}.csv"
        rows = []
        d0 = trace.distances[0]
        for k, dk in enumerate(trace.distances):
            bound = (
                rate.prefactor**2 * (1.0 - rate.c) ** (k - rate.shift) * d0
                if rate.admissible
                else ""
            )
            rows.append([s.value, h, g, seed, k, dk, bound])
        _write_csv(out / name, ["scheme", "h", "gamma", "seed", "k", "distance_sq", "bound_sq"], rows)
        return {
            "scheme": s.value,
            "h": h,
            "gamma": g,
            "seed": seed,
            "admissible": rate.admissible,
            "c_theoretical": rate.c,
            "prefactor": rate.prefactor,
            "c_empirical": _jsonable(c_hat),
            "bound_holds": ok,
            "first_violation": first_bad,
            "diverged": trace.diverged,
            "diverged_at": trace.diverged_at,
            "trace_file": name,
        }

    summary = _run_grid(run, jobs)
    diverged = [r for r in summary if r["diverged"]]
    _write_json(out / "couple_summary.json", {"runs": summary})
    if diverged and not args.force:
        raise DivergenceError(f"{len(diverged)} runs diverged")
    return 0


def cmd_certify(cfg: dict, args) -> int:
    pot = _potential(cfg)
    schemes = _schemes(cfg)
    bad = [s.value for s in schemes if s not in certificates.CERTIFICATE_SCHEMES]
    if bad:
        ok = ", ".join(s.value for s in certificates.CERTIFICATE_SCHEMES)
        raise ConfigError(
            f"no direct certificate for {bad}; permuted splittings route through "
            f"bao/oab (certified_rate); certifiable schemes: {ok}"
        )
    gammas = _grid(cfg, "params", "gamma")
    mode = cfg.get("certify", {}).get("mode", "check")
    out = _out_dir(cfg, args)
    if mode not in ("check", "table1"):
        raise ConfigError(f"'certify.mode' must be 'check' or 'table1', got {mode!r}")

    if mode == "check":
        hs = _grid(cfg, "params", "h")
        jobs = [(s, h, g) for s in schemes for h in hs for g in gammas]

        def run(job):
            s, h, g = job
            rep = certificates.check_certificate(s, pot.m, pot.M, g, h)
            return rep.to_dict()

        reports = _run_grid(run, jobs)
        _write_json(out / "certificates.json", {"mode": "check", "reports": reports})
        return 0

    def run_row(job):
        s, g = job
        h_cert = certificates.max_certified_stepsize(s, pot.m, pot.M, g)
        h_hyp = certified_stepsize_threshold(s, pot.m, pot.M, g)
        row = {
            "scheme": s.value,
            "m": pot.m,
            "M": pot.M,
            "gamma": g,
            "certified_h_max": h_cert,
            "hypothesis_h_max": h_hyp,
        }
        if h_hyp > 0.0:
            h_use = 0.8 * h_hyp
            row["hypothesis_rate_at_08h"] = certified_rate(s, pot.m, pot.M, g, h_use).c
            row["certified_rate_at_08h"] = certificates.max_certified_rate(
                s, pot.m, pot.M, g, h_use
            )
        else:
            row["hypothesis_rate_at_08h"] = None
            row["certified_rate_at_08h"] = None
        return row

    rows = _run_grid(run_row, [(s, g) for s in schemes for g in gammas])
    _write_json(out / "certificates.json", {"mode": "table1", "rows": rows})
    return 0


def cmd_gaussian_scan(cfg: dict, args) -> int:
    pot = _potential(cfg)
    schemes = _schemes(cfg)
    overdamped = [s.value for s in schemes if s in OVERDAMPED_SCHEMES]
    if overdamped:
        raise ConfigError(
            f"gaussian-scan covers kinetic schemes only (mode factor of {overdamped} is 1 - h lambda)"
        )
    gammas = _grid(cfg, "params", "gamma")
    h_grid = _grid(cfg, "scan", "h_grid")
    out = _out_dir(cfg, args)

    def run(job):
        s, g = job
        thresholds = {}
        for lam in (pot.m, pot.M):
            try:
                thresholds[lam] = gaussian.stability_threshold(s, lam, g)
            except gaussian.SpectralError:
                thresholds[lam] = math.nan
        rows = []
        for scan_row in gaussian.gaussian_scan(s, pot.m, pot.M, g, h_grid):
            for rep in scan_row.reports:
                rows.append(
                    [
                        s.value,
                        scan_row.h,
                        g,
                        rep.lam,
                        rep.spectral_radius,
                        rep.contractive,
                        thresholds[rep.lam],
                    ]
                )
        return rows

    all_rows = [r for chunk in _run_grid(run, [(s, g) for s in schemes for g in gammas]) for r in chunk]
    _write_csv(
        out / "gaussian_scan.csv",
        ["scheme", "h", "gamma", "lambda", "radius", "contractive", "stability_threshold"],
        all_rows,
    )
    return 0


def cmd_glc_scan(cfg: dict, args) -> int:
    pot = _potential(cfg)
    schemes = _schemes(cfg)
    gammas = _grid(cfg, "scan", "gamma_grid", required=False) or list(glc.DEFAULT_GAMMA_GRID)
    block = cfg.get("params", {})
    h = block.get("h")
    if isinstance(h, list):
        raise ConfigError("glc-scan takes a scalar 'params.h' (or omit for auto)")
    n_steps = int(block.get("n_steps", 2000))
    seeds = _seeds(cfg)
    out = _out_dir(cfg, args)

    def run(job):
        s, seed = job
        rows = glc.rate_collapse_scan(
            s, pot.m, pot.M, None if h is None else float(h), gammas, n_steps=n_steps, seed=seed
        )
        return [
            [s.value, r.gamma, r.h, r.c_theoretical, r.c_empirical, r.admissible, r.deviation]
            for r in rows
        ]

    all_rows = [r for chunk in _run_grid(run, [(s, seed) for s in schemes for seed in seeds]) for r in chunk]
    _write_csv(
        out / "glc_scan.csv",
        ["scheme", "gamma", "h", "c_theoretical", "c_empirical", "admissible", "deviation"],
        all_rows,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="langevin-contract",
        description="Contraction experiments for Langevin discretizations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("couple", cmd_couple),
        ("certify", cmd_certify),
        ("gaussian-scan", cmd_gaussian_scan),
        ("glc-scan", cmd_glc_scan),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir)")
        p.add_argument(
            "--force",
            action="store_true",
            help="run inadmissible parameters and record divergence instead of failing",
        )
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return args.func(cfg, args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DivergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
