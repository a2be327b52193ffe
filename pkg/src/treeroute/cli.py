"""Command-line driver: ``treeroute <experiment> [flags]``, ``rerun`` and ``report``.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import platform
import re
import resource
import sys
import time
from pathlib import Path

from . import __version__
from .experiments import COMMON_NOTES, EXPERIMENTS, ConfigError, fmt, json_text

log = logging.getLogger("treeroute")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3
MANIFEST = "manifest.json"
TELEMETRY = "telemetry.json"
SUMMARY = "summary.json"
INCOMPLETE = "INCOMPLETE"
OUTPUT_ENV = "TREEROUTE_OUTPUT"


class RunError(RuntimeError):
    pass


class IncompleteRunError(RunError):
    pass


def default_threads() -> int:
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return max(1, os.cpu_count() or 1)


def _key(name: str) -> str:
    return name.strip().lower().replace("-", "_")


# ---------------------------------------------------------------------------
# configuration


def load_config(path, experiment: str) -> dict:
    """Read an INI file: ``[run]`` may hold ``seed``; ``[params]`` or ``[<experiment>]``
    hold experiment parameters.  Unknown sections and keys are rejected with
    their line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            section = m.group(1).strip()
            lines.setdefault((section, None), no)
        elif s and not s.startswith(("#", ";")):
            k = re.split(r"[=:]", s, maxsplit=1)[0]
            lines.setdefault((section, _key(k)), no)
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    exp = EXPERIMENTS[experiment]
    allowed = {p.name for p in exp.params}
    out = {}
    for sec in cp.sections():
        if sec == "run":
            keys = {"seed", "experiment"}
        elif sec in ("params", experiment):
            keys = allowed
        else:
            raise ConfigError(f"{path}:{lines.get((sec, None), '?')}: unknown section [{sec}]")
        for k, v in cp.items(sec):
            kk = _key(k)
            if kk not in keys:
                raise ConfigError(f"{path}:{lines.get((sec, kk), '?')}: unknown key '{k}' in [{sec}]")
            if kk == "experiment":
                if v.strip() != experiment:
                    raise ConfigError(f"{path}:{lines.get((sec, kk), '?')}: config is for '{v.strip()}'")
                continue
            out[kk] = v.strip()
    return out


# ---------------------------------------------------------------------------
# run directory handling


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_out_dir(name: str, params: dict) -> Path:
    root = Path(os.environ.get(OUTPUT_ENV) or "runs")
    tag = _sha256(json.dumps(params, sort_keys=True, default=str))[:8]
    return root / f"{name}-seed{params['seed']}-{tag}"


def build_manifest(name: str, params: dict, seeds: dict, artifacts: dict | None = None) -> dict:
    exp = EXPERIMENTS[name]
    m = {"experiment": name, "toolkit_version": __version__, "root_seed": params["seed"],
         "params": params, "derived_seeds": seeds, "notes": COMMON_NOTES + exp.notes,
         "status": "running" if artifacts is None else "complete"}
    if artifacts is not None:
        m["artifacts"] = artifacts
    return m


def execute(name: str, given: dict, out_dir=None, threads: int | None = None, force: bool = False) -> Path:
    """Resolve parameters, run the experiment and write its run directory."""
    exp = EXPERIMENTS[name]
    params = exp.resolve(given)
    threads = default_threads() if threads is None else int(threads)
    if threads < 1:
        raise ConfigError("threads must be at least 1")
    seeds = exp.plan(params)
    out = Path(out_dir) if out_dir else default_out_dir(name, params)
    if out.exists() and any(out.iterdir()) and not force:
        raise ConfigError(f"output directory {out} is not empty (use --force)")
    out.mkdir(parents=True, exist_ok=True)
    for stale in out.iterdir():
        if stale.is_file():
            stale.unlink()
    (out / INCOMPLETE).write_text("run in progress\n")
    _atomic_write(out / MANIFEST, json_text(build_manifest(name, params, seeds)))
    t0, c0 = time.time(), time.process_time()
    log.info("running %s into %s with %d threads", name, out, threads)
    try:
        artifacts, summary = exp.run(params, seeds, threads)
    except ConfigError:
        raise
    except Exception as exc:
        (out / INCOMPLETE).write_text(f"failed: {type(exc).__name__}: {exc}\n")
        raise RunError(f"{name} failed: {type(exc).__name__}: {exc}") from exc
    artifacts = dict(artifacts)
    artifacts[SUMMARY] = json_text(summary)
    hashes = {}
    for fname in sorted(artifacts):
        _atomic_write(out / fname, artifacts[fname])
        hashes[fname] = _sha256(artifacts[fname])
    _atomic_write(out / MANIFEST, json_text(build_manifest(name, params, seeds, hashes)))
    tele = {"wall_seconds": time.time() - t0, "cpu_seconds": time.process_time() - c0,
            "peak_rss_kib": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss, "threads": threads,
            "python": platform.python_version(), "started_unix": t0}
    _atomic_write(out / TELEMETRY, json_text(tele))
    (out / INCOMPLETE).unlink()
    return out


def read_manifest(run_dir) -> dict:
    run_dir = Path(run_dir)
    if not run_dir.is_dir() or not any(run_dir.iterdir()):
        raise ConfigError(f"{run_dir} is missing or empty")
    if (run_dir / INCOMPLETE).exists():
        raise IncompleteRunError(f"{run_dir} holds an incomplete run")
    try:
        return json.loads((run_dir / MANIFEST).read_text())
    except FileNotFoundError:
        raise ConfigError(f"{run_dir} has no {MANIFEST}") from None


def rerun(manifest_path, out_dir=None, threads: int | None = None, force: bool = False):
    """Re-execute a run from its manifest and compare artifact hashes."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST
    try:
        old = json.loads(manifest_path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read manifest {manifest_path}: {exc}") from None
    name = old.get("experiment")
    if name not in EXPERIMENTS:
        raise ConfigError(f"manifest names unknown experiment {name!r}")
    out = Path(out_dir) if out_dir else manifest_path.parent.with_name(manifest_path.parent.name + "-rerun")
    new_dir = execute(name, old["params"], out, threads, force)
    new = json.loads((new_dir / MANIFEST).read_text())
    diff = sorted(k for k in set(old.get("artifacts", {})) | set(new["artifacts"])
                  if old.get("artifacts", {}).get(k) != new["artifacts"].get(k))
    return new_dir, diff


# ---------------------------------------------------------------------------
# reports


def _fmt_pair(a, b):
    return f"{fmt(a)} vs {fmt(b)}"


def _report_lines(man: dict, s: dict) -> list:
    name = man["experiment"]
    p = man["params"]
    out = [f"experiment: {name}", f"toolkit: {man['toolkit_version']}", f"root seed: {man['root_seed']}",
           "params: " + ", ".join(f"{k}={v}" for k, v in sorted(p.items()))]
    if name == "tail":
        f = s["fit"]
        if "slope" in f:
            out.append(f"tail slope on [{fmt(f['d_range'][0])}, {fmt(f['d_range'][1])}]: "
                       f"{f['slope']:.4f} +/- {f['se']:.4f} (R^2 {f['r2']:.4f}, {f['points']} points)")
        else:
            out.append(f"tail slope: unavailable ({f['error']})")
        out.append(f"pairs used: {s['pairs']} of {s['qualifying_pairs']}; mean route {s['mean_route']:.6g}")
    elif name == "lemma-red":
        out.append(f"trials: {s['trials']}, violations: {s['violations']}, missing witnesses: "
                   f"{s['witness_missing']}")
        for m, (lo, thr) in s["min_pairs_vs_threshold"].items():
            out.append(f"m={m}: min pairs {fmt(lo)} vs 0.088 m^4 = {fmt(thr)} (ratio {lo / thr:.4f})")
    elif name == "scaling":
        for side, mu, ci in zip(p["sides"], s["means"], s["ci"]):
            out.append(f"side {fmt(side)}: mean D_r {mu:.6g} [{ci[0]:.6g}, {ci[1]:.6g}]")
        out.append(f"strictly increasing: {s['strictly_increasing']}; CIs separated: {s['ci_separated']}; "
                   f"last relative change: {s['last_relative_change']:.4f}")
        if "linear_r2" in s:
            out.append(f"linear fit R^2: {s['linear_r2']:.6f}")
    elif name == "lemma-green":
        for k, ph in zip(s["k"], s["p_hat"]):
            out.append(f"k={k}: failure rate {ph:.4f}")
        out.append(f"non-increasing: {s['non_increasing']}; last below 0.1: {s['last_below_0.1']}")
        if "circuit_p_hat" in s:
            out.append("zero-cost circuit rates (decreasing q): "
                       + ", ".join(f"{v:.4f}" for v in s["circuit_p_hat"])
                       + f"; strictly decreasing: {s['circuit_strictly_decreasing']}")
        if "exact_mismatches" in s:
            out.append(f"k=4 exhaustive vs contour mismatches: {s['exact_mismatches']}; "
                       f"empty-grid minimum {s['exact_empty_min']}")
    elif name == "lemma7":
        c = s["census"]
        out.append(f"terminals {s['terminals']}, |B| {s['B']}, |B^c| {s['Bc']} ({s['bipartition_method']})")
        out.append(f"census: S={c['S']}, S<={c['S_lo']}, S>={c['S_hi']}, unbalanced={c['unbalanced']}, "
                   f"psi={c['psi']:.4f}, implication {c['implication']}")
        out.append(f"long cross pairs: {s['long_pairs']} (threshold {s['threshold']:.6g}); reported "
                   f"{s['reported']}, all long: {s['reported_routes_ok']}")
    elif name == "rgg":
        out.append(f"points {s['points']}, components {s['components']}, largest {s['largest']}")
        out.append("moments: " + ", ".join(f"E[N^{k}]={v:.6g}" for k, v in s["moments"].items()))
        if "mst_bound" in s:
            b = s["mst_bound"]
            out.append(f"MST bound: {b['pairs']} pairs, {b['violations']} violations, max ratio "
                       f"{b['max_ratio']:.4f}")
    else:
        for k in sorted(s):
            v = s[k]
            if not isinstance(v, (list, dict)):
                out.append(f"{k}: {v}")
    for n in man.get("notes", []):
        out.append(f"note: {n}")
    return out


def emit_report(run_dir) -> str:
    """Human-readable report of a completed run; also written to report.txt."""
    run_dir = Path(run_dir)
    man = read_manifest(run_dir)
    try:
        summary = json.loads((run_dir / SUMMARY).read_text())
    except FileNotFoundError:
        raise IncompleteRunError(f"{run_dir} has no {SUMMARY}") from None
    text = "\n".join(_report_lines(man, summary)) + "\n"
    _atomic_write(run_dir / "report.txt", text)
    return text


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sp):
    sp.add_argument("--config", help="INI file with [params] (flags override it)")
    sp.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    sp.add_argument("--out", help=f"run directory (default ${OUTPUT_ENV} or ./runs)")
    sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all CPUs)")
    sp.add_argument("--force", action="store_true", help="overwrite a non-empty run directory")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treeroute", description="Route-length experiments on spatial trees.")
    ap.add_argument("-v", "--verbose", action="store_true")
    ap.add_argument("--version", action="version", version=f"treeroute {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, exp in EXPERIMENTS.items():
        sp = sub.add_parser(name, help=exp.help, description=exp.help)
        _add_common(sp)
        for p in exp.params:
            extra = {"choices": p.choices} if p.choices else {}
            dflt = "required" if p.required else p.default
            sp.add_argument("--" + p.name.replace("_", "-"), dest=p.name, default=None,
                            help=f"{p.help} [{dflt}]", **extra)
    sp = sub.add_parser("rerun", help="re-execute a run from its manifest and compare artifacts")
    sp.add_argument("manifest", help="manifest.json or its run directory")
    sp.add_argument("--out")
    sp.add_argument("--threads", type=int, default=None)
    sp.add_argument("--force", action="store_true")
    sp = sub.add_parser("report", help="print the report of a completed run directory")
    sp.add_argument("run_dir")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "report":
            sys.stdout.write(emit_report(args.run_dir))
            return EXIT_OK
        if args.command == "rerun":
            out, diff = rerun(args.manifest, args.out, args.threads, args.force)
            if diff:
                print(f"{out}: artifacts differ: {', '.join(diff)}", file=sys.stderr)
                return EXIT_RUNTIME
            print(f"{out}: all artifacts identical")
            return EXIT_OK
        exp = EXPERIMENTS[args.command]
        given = load_config(args.config, args.command) if args.config else {}
        for p in exp.params:
            v = getattr(args, p.name)
            if v is not None:
                given[p.name] = v
        if args.seed is not None:
            given["seed"] = args.seed
        out = execute(args.command, given, args.out, args.threads, args.force)
        print(out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RunError, RuntimeError, MemoryError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
