"""Command line front end: ``qhf run``, ``qhf chain`` and ``qhf verify``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 strict-mode convergence failure.  ``QHF_THREADS`` bounds the worker pool
used by ``run --sweep``.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bath import BathSpec, SpectralDensity
from .chain import EmptyMeasureError, MeasureResolutionError, chain_coefficients, light_cone_ok
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config, preset
from .stats import simulate, write_csv, write_current_csv
from .tdvp import NumericalFailure

log = logging.getLogger("qhf")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_STRICT = 0, 2, 3, 4
MANIFEST_FORMAT = "qhf-manifest/1"


def _versions() -> dict:
    import matplotlib
    import scipy

    return {
        "qhf": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }


def _checkpoint_path(out: Path, branch: int) -> Path:
    return out / f"checkpoint_b{branch}.npz"


def _load_resume(resolved: dict, out: Path) -> list | None:
    paths = sorted(out.glob("checkpoint_b*.npz"))
    if not paths:
        log.warning("%s: no checkpoints to resume from, starting at t = 0", out)
        return None
    entries = []
    for p in paths:
        ck = load_checkpoint(p)
        if ck.extra.get("config") != json.loads(json.dumps(resolved)):
            raise ConfigError("checkpoint was written by a different configuration", str(p))
        entries.append((ck.time, ck.state, ck.extra["history"]))
    return entries


def _references(cfg: RunConfig, times) -> dict:
    """Exact curves for the independent-boson case (one Ohmic bath, no tunnelling in z)."""
    from .oracles import ib_mean, ib_variance

    if len(cfg.baths) != 1 or cfg.epsilon0 != 0.0 or cfg.baths[0].spectral_file:
        return {}
    b = cfg.bath_specs()[0]
    alpha, wc = b.spectral.alpha, b.spectral.cutoff
    t = np.asarray(times, dtype=float)
    mean = np.array([ib_mean(alpha, wc, x) for x in t])
    var = np.array([ib_variance(alpha, wc, b.beta, x) for x in t])
    return {"mean": (t, mean), "variance": (t, var)}


def run_config(cfg: RunConfig, out: Path | None = None, strict: bool | None = None, resume: bool = False) -> int:
    """Run one configuration and write its artifacts; returns the exit code."""
    out = Path(out or cfg.output.directory)
    strict = cfg.output.strict if strict is None else strict
    out.mkdir(parents=True, exist_ok=True)
    resolved = cfg.resolved()
    resolved["output"]["directory"] = str(out)
    params, baths = cfg.params(), cfg.bath_specs()

    on_sample = None
    if cfg.output.checkpoint:
        policy = cfg.numerics.policy()

        def on_sample(branch, t, state, history):
            extra = {"branch": branch, "config": resolved, "history": history}
            save_checkpoint(_checkpoint_path(out, branch), Checkpoint(state, t, policy, extra=extra))

    prior = _load_resume(resolved, out) if resume else None
    try:
        result = simulate(params, baths, cfg.numerics, on_sample=on_sample, resume=prior)
    except NumericalFailure as exc:
        log.error("%s: %s", cfg.source or out, exc)
        _write_manifest(out, resolved, {"failed": str(exc)}, ok=False)
        return EXIT_NUMERICAL

    files = []
    if "csv" in cfg.output.formats:
        files.append(write_csv(out / "results.csv", result.series, result.cumulants))
        if len(result.per_bath) > 1:
            for j, ms in enumerate(result.per_bath):
                files.append(write_csv(out / f"bath{j + 1}.csv", ms))
        if result.current is not None:
            files.append(write_current_csv(out / "current.csv", result.current))
    if "svg" in cfg.output.formats:
        from .plotting import plot_cumulants

        files += plot_cumulants(result.cumulants, out, references=_references(cfg, result.cumulants.times))
        if result.current is not None:
            files += plot_cumulants(result.current, out, prefix="current_")

    diag = dict(result.diagnostics)
    warns = diag["compression_warnings"]
    strict_failed = bool(strict and warns)
    convergence = {
        "light_cone_ok": diag["light_cone_ok"],
        "compression_warnings": warns,
        "discarded_weight": diag["discarded_weight"],
        "max_norm_drift": diag["max_norm_drift"],
        "max_energy_drift": diag["max_energy_drift"],
        "max_bond_seen": diag["max_bond_seen"],
        "strict": strict,
        "strict_failed": strict_failed,
    }
    _write_manifest(out, resolved, convergence, ok=not strict_failed, diagnostics=diag,
                    files=[Path(f).name for f in files])
    for w in warns:
        log.warning("%s", w)
    if strict_failed:
        log.error("strict mode: %d compression warning(s) escalated", len(warns))
        return EXIT_STRICT
    log.info("wrote %d file(s) to %s", len(files) + 1, out)
    return EXIT_OK


def _write_manifest(out: Path, resolved: dict, convergence: dict, ok: bool, diagnostics: dict | None = None,
                    files: list | None = None) -> Path:
    manifest = {
        "format": MANIFEST_FORMAT,
        "ok": ok,
        "config": resolved,
        "versions": _versions(),
        "convergence": convergence,
        "diagnostics": diagnostics or {},
        "files": files or [],
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=float) + "\n")
    return path


def _run_job(job: tuple) -> int:
    cfg, out, strict, resume = job
    try:
        return run_config(cfg, out, strict, resume)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {cfg.source}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MeasureResolutionError, EmptyMeasureError) as exc:
        log.error("%s: %s", cfg.source, exc)
        return EXIT_NUMERICAL


def _pool_size(n_jobs: int) -> int:
    raw = os.environ.get("QHF_THREADS", "")
    try:
        limit = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        log.warning("ignoring QHF_THREADS=%r (not an integer)", raw)
        limit = os.cpu_count() or 1
    return max(1, min(limit, n_jobs))


def cmd_run(args) -> int:
    configs = []
    try:
        for name in args.preset or []:
            configs.append(preset(name))
        for path in args.config:
            configs.append(load_config(path))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not configs:
        print("error: give at least one config file or --preset", file=sys.stderr)
        return EXIT_CONFIG
    jobs = []
    for k, cfg in enumerate(configs):
        out = None
        if args.out:
            out = Path(args.out) if len(configs) == 1 else Path(args.out) / f"run{k:03d}"
        jobs.append((cfg, out, True if args.strict else None, args.resume))
    if args.sweep and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=_pool_size(len(jobs))) as pool:
            codes = list(pool.map(_run_job, jobs))
    else:
        codes = [_run_job(job) for job in jobs]
    return max(codes)


def cmd_chain(args) -> int:
    try:
        if args.spectral_file:
            sd = SpectralDensity.from_file(args.spectral_file, domain_max=args.domain_max)
        else:
            sd = SpectralDensity.ohmic(args.alpha, args.omega_c, args.domain_max)
        bath = BathSpec.from_temperature(sd, args.temperature)
        chain_o, chain_a = chain_coefficients(bath, args.length, args.num_nodes)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MeasureResolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    chain_o.save(out / "chain_O.txt")
    print(f"wrote {out / 'chain_O.txt'}  (c0 = {chain_o.c0:.10g}, L = {chain_o.length})")
    if chain_a is not None:
        chain_a.save(out / "chain_A.txt")
        print(f"wrote {out / 'chain_A.txt'}  (c0 = {chain_a.c0:.10g}, L = {chain_a.length})")
    if args.t_max is not None:
        chains = [c for c in (chain_o, chain_a) if c is not None]
        if not all(light_cone_ok(c, args.t_max) for c in chains):
            log.warning("L = %d is inside the light cone of t_max = %g", args.length, args.t_max)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import run_scope

    report = None if args.json else (lambda c: print(c.line(), flush=True))
    checks = run_scope(args.scope, report)
    failed = [c for c in checks if not c.passed]
    if args.json:
        print(json.dumps({"scope": args.scope, "passed": not failed, "checks": [c.as_dict() for c in checks]},
                         indent=2, default=float))
    else:
        print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_STRICT if (failed and args.strict) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qhf", description="Heat statistics of spin-boson models")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="more log output (repeatable)")
    ap.add_argument("--version", action="version", version=f"qhf {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one or more configurations")
    run.add_argument("config", nargs="*", help="INI config or JSON manifest")
    run.add_argument("--preset", action="append", choices=["fig3", "fig4"], help="built-in desk-scale setup")
    run.add_argument("--out", help="output directory (overrides [output] directory)")
    run.add_argument("--strict", action="store_true", help="exit 4 on any compression warning")
    run.add_argument("--sweep", action="store_true", help="run configs in parallel (QHF_THREADS workers)")
    run.add_argument("--resume", action="store_true", help="continue from checkpoints in the output directory")
    run.set_defaults(func=cmd_run)

    ch = sub.add_parser("chain", help="write chain coefficients of a bath")
    ch.add_argument("--alpha", type=float, default=0.1)
    ch.add_argument("--omega-c", type=float, default=1.0)
    ch.add_argument("--temperature", type=float, default=0.0)
    ch.add_argument("--length", type=int, required=True)
    ch.add_argument("--domain-max", type=float, default=None)
    ch.add_argument("--spectral-file", default=None, help="two-column table omega J(omega)")
    ch.add_argument("--num-nodes", type=int, default=None)
    ch.add_argument("--t-max", type=float, default=None, help="warn if the chain is inside this light cone")
    ch.add_argument("--out", default=".")
    ch.set_defaults(func=cmd_chain)

    ver = sub.add_parser("verify", help="run the acceptance checks")
    ver.add_argument("--scope", default="all", choices=["oracle", "chain", "engine", "physics", "all"])
    ver.add_argument("--json", action="store_true", help="machine-readable report on stdout")
    ver.add_argument("--strict", action="store_true", help="exit 4 if any check fails")
    ver.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else (logging.INFO if args.verbose == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
