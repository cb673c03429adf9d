"""Command line interface: reproducible experiment runs with manifests.

Every command writes its tabular results as CSV, structured reports as
JSON, and a manifest.json recording the artifact version, a hash of the
resolved configuration, stage timings, and SHA-256 digests of every
output file.  Outputs are byte-identical for identical (config, seed)
regardless of --threads; the manifest is the only file allowed to differ
(wall time).

Exit codes: 0 success, 1 experiment-level verification failure (for
example a battery prime where the generators are not surjective), 2
configuration errors (bad flags, malformed TOML, unknown keys).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from dataclasses import fields as dc_fields
from dataclasses import is_dataclass
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .approx import ApproxReport, FiniteSubset, approx_report, random_symmetric_subset
from .errors import ConfigError, GroupSieveError, InsufficientSignal, VerificationFailure
from .modp import GenSet, PrimeModulus, load_generator_file, sanov_generators
from .primes import is_prime
from .spectral import SpectralReport, lambda1
from .table import DEFAULT_CAP, GroupTable, enumerate_group, full_special_linear, standard_subgroup
from .walks import (
    DEFAULT_CHUNK,
    FitResult,
    ScanReport,
    ScanRow,
    Target,
    WalkSampler,
    WalkStats,
    monte_carlo_walk,
    nonconcentration_fit,
    strong_approx_scan,
)
from .sieve import select_primes, sieve_run, target_predicate, SieveReport

FLOAT_FMT = ".17g"


def _fmt(x) -> str:
    v = float(x)
    if not math.isfinite(v):
        raise VerificationFailure(f"non-finite value {v!r} would leak into CSV")
    return format(v, FLOAT_FMT)


# ---------------------------------------------------------------------------
# JSON round-trip for report records
# ---------------------------------------------------------------------------

_REPORT_TYPES = {cls.__name__: cls for cls in
                 (FitResult, ApproxReport, SieveReport, ScanRow, ScanReport,
                  SpectralReport, WalkStats)}

# fields that JSON turns into lists or string-keyed dicts and that must be
# restored to tuples / int keys for the dataclass round trip
_TUPLE_FIELDS = {
    "FitResult": ("window",),
    "ScanReport": ("rows",),
    "SieveReport": ("primes", "schedule"),
    "WalkStats": ("schedule",),
}
_INT_KEY_FIELDS = {
    "SieveReport": ("densities", "counts"),
}


def encode_report(obj):
    """Recursively convert report records to JSON-serializable structures."""
    if isinstance(obj, Fraction):
        return {"fraction": f"{obj.numerator}/{obj.denominator}"}
    if is_dataclass(obj) and not isinstance(obj, type):
        return {"type": type(obj).__name__,
                "fields": {f.name: encode_report(getattr(obj, f.name))
                           for f in dc_fields(obj)}}
    if isinstance(obj, dict):
        return {str(k): encode_report(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [encode_report(v) for v in obj]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return obj.item()
    raise TypeError(f"cannot encode {type(obj).__name__}")


def decode_report(obj):
    """Inverse of encode_report: rebuild the originating record types."""
    if isinstance(obj, list):
        return [decode_report(v) for v in obj]
    if not isinstance(obj, dict):
        return obj
    if set(obj) == {"fraction"}:
        return Fraction(obj["fraction"])
    if set(obj) == {"type", "fields"} and obj["type"] in _REPORT_TYPES:
        name = obj["type"]
        cls = _REPORT_TYPES[name]
        vals = {k: decode_report(v) for k, v in obj["fields"].items()}
        for f in _TUPLE_FIELDS.get(name, ()):
            if vals.get(f) is not None:
                vals[f] = tuple(tuple(v) if isinstance(v, list) else v
                                for v in vals[f])
        for f in _INT_KEY_FIELDS.get(name, ()):
            vals[f] = {int(k): v for k, v in vals[f].items()}
        if name == "WalkStats":
            vals["counts"] = {t: {int(n): c for n, c in per.items()}
                              for t, per in vals["counts"].items()}
        return cls(**vals)
    return {k: decode_report(v) for k, v in obj.items()}


def _write_json(path: Path, payload) -> None:
    text = json.dumps(encode_report(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n")


def load_report(path) -> object:
    """Parse a report JSON file back into its record type(s)."""
    return decode_report(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

def _int(text, what: str) -> int:
    try:
        return int(text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad {what}: {text!r}") from exc


def _parse_prime_list(spec: str) -> list[int]:
    """Primes from "3:61" (all primes in range) or "3,5,7" (explicit)."""
    spec = spec.strip()
    if ":" in spec:
        lo_s, _, hi_s = spec.partition(":")
        lo, hi = _int(lo_s, "prime range"), _int(hi_s, "prime range")
        if lo > hi:
            raise ConfigError(f"empty prime range {spec!r}")
        return [p for p in range(max(lo, 2), hi + 1) if is_prime(p)]
    out = []
    for item in spec.split(","):
        p = _int(item, "prime list entry")
        if not is_prime(p):
            raise ConfigError(f"{p} is not prime")
        out.append(p)
    return sorted(set(out))


def _parse_schedule(spec: str) -> list[int]:
    """Step schedules: "10:120:5" arithmetic, "geom:8:256:2" geometric,
    or an explicit list "4,8,12"."""
    spec = spec.strip()
    if spec.startswith("geom:"):
        parts = spec[5:].split(":")
        if len(parts) != 3:
            raise ConfigError(f"geometric schedule needs start:stop:ratio, got {spec!r}")
        start, stop = _int(parts[0], "schedule"), _int(parts[1], "schedule")
        ratio = _int(parts[2], "schedule")
        if start < 0 or ratio < 2 or stop < start:
            raise ConfigError(f"bad geometric schedule {spec!r}")
        out = []
        n = start
        while n <= stop:
            out.append(n)
            n *= ratio
        return out
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"arithmetic schedule needs start:stop[:step], got {spec!r}")
        start, stop = _int(parts[0], "schedule"), _int(parts[1], "schedule")
        step = _int(parts[2], "schedule") if len(parts) == 3 else 1
        if step < 1 or start < 0 or stop < start:
            raise ConfigError(f"bad arithmetic schedule {spec!r}")
        return list(range(start, stop + 1, step))
    try:
        out = sorted(set(int(v) for v in spec.split(",")))
    except ValueError as exc:
        raise ConfigError(f"bad schedule {spec!r}") from exc
    if not out or out[0] < 0:
        raise ConfigError(f"bad schedule {spec!r}")
    return out


def _parse_targets(spec: str) -> list[Target]:
    """Comma list of KIND[:PARAM]@PRIME target predicates.

    Kinds: borel, identity, punip, trace:T, cycle:2, cycle:1-1.
    """
    targets = []
    for item in spec.split(","):
        head, sep, prime_s = item.strip().partition("@")
        if not sep:
            raise ConfigError(f"target {item!r} lacks @prime")
        p = _int(prime_s, f"prime in target {item!r}")
        if not is_prime(p):
            raise ConfigError(f"{p} is not prime in target {item!r}")
        kind, _, param = head.partition(":")
        if kind == "borel":
            targets.append(Target.borel(p))
        elif kind == "identity":
            targets.append(Target.identity(p))
        elif kind == "punip":
            targets.append(Target.power_unipotent(p))
        elif kind == "trace":
            if param == "":
                raise ConfigError(f"target {item!r} needs trace:VALUE")
            targets.append(Target.trace(p, _int(param, "trace value")))
        elif kind == "cycle":
            if param == "2":
                targets.append(Target.cycle_type(p, (2,)))
            elif param in ("1-1", "11"):
                targets.append(Target.cycle_type(p, (1, 1)))
            else:
                raise ConfigError(f"target {item!r}: cycle param must be 2 or 1-1")
        else:
            raise ConfigError(f"unknown target kind {kind!r}")
    return targets


def _resolve_gens(args) -> GenSet:
    if getattr(args, "gens", None):
        return load_generator_file(args.gens)
    return sanov_generators()


def _chunk_for(threads: int, samples: int) -> int:
    # worker count only influences chunk sizing; per-sample counter streams
    # make the counts identical under any split
    threads = max(1, threads)
    return max(1, min(DEFAULT_CHUNK, math.ceil(samples / threads)))


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    h.update(path.read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, command: str, config: dict,
                    timings: dict, outputs: list[Path], t0: float) -> None:
    cfg_text = json.dumps(config, sort_keys=True)
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
        "config": config,
        "wall_time_s": round(time.time() - t0, 3),
        "stage_timings_s": {k: round(v, 3) for k, v in timings.items()},
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _csv_writer(handle):
    return csv.writer(handle, lineterminator="\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_gap(args, out_dir: Path, config: dict, t0: float) -> int:
    timings = {}
    t = time.time()
    rows = []
    if args.cyclic is not None:
        if args.cyclic < 3:
            raise ConfigError("--cyclic needs n >= 3")
        table = GroupTable.cyclic_group(args.cyclic)
        rep = lambda1(table, method=args.method, tol=args.tol)
        rows.append((args.cyclic, rep))
    else:
        gens = _resolve_gens(args)
        for p in _parse_prime_list(args.primes):
            mod = PrimeModulus(p, gens.members[0].d)
            table = enumerate_group(gens.reduce(mod), mod)
            if table.order < 2:
                print(f"gap: skipping p={p} (trivial image)", file=sys.stderr)
                continue
            rows.append((p, lambda1(table, method=args.method, tol=args.tol)))
    timings["compute"] = time.time() - t
    t = time.time()
    out = out_dir / "gap.csv"
    with open(out, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["p", "group_order", "lambda1", "alpha1", "alpha_min",
                    "method", "iterations", "residual"])
        for p, rep in rows:
            w.writerow([p, rep.order, _fmt(rep.lambda1), _fmt(rep.alpha1),
                        _fmt(rep.alpha_min), rep.method, rep.iterations,
                        _fmt(rep.residual)])
    timings["write"] = time.time() - t
    _write_manifest(out_dir, "gap", config, timings, [out], t0)
    return 0


def _cmd_walk(args, out_dir: Path, config: dict, t0: float) -> int:
    if args.seed is None:
        raise ConfigError("walk is stochastic; --seed is required")
    timings = {}
    t = time.time()
    gens = _resolve_gens(args)
    targets = _parse_targets(args.targets)
    schedule = _parse_schedule(args.schedule)
    primes = sorted({t_.prime for t_ in targets})
    if args.primes:
        primes = sorted(set(primes) | set(_parse_prime_list(args.primes)))
    sampler = WalkSampler(gens, args.seed, primes)
    timings["setup"] = time.time() - t
    t = time.time()
    stats = monte_carlo_walk(sampler, schedule, args.samples, targets,
                             chunk=_chunk_for(args.threads, args.samples),
                             lazy=args.lazy)
    fits = {}
    for tgt in targets:
        try:
            fits[tgt.name] = nonconcentration_fit(stats, tgt.name)
        except InsufficientSignal:
            fits[tgt.name] = None
    timings["compute"] = time.time() - t
    t = time.time()
    out_csv = out_dir / "walk.csv"
    with open(out_csv, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["n", "target", "prime", "frequency", "ci_lo", "ci_hi", "samples"])
        for tgt in targets:
            for n in stats.schedule:
                lo, hi = stats.interval(tgt.name, n)
                w.writerow([n, tgt.name, tgt.prime,
                            _fmt(stats.frequency(tgt.name, n)),
                            _fmt(lo), _fmt(hi), stats.samples])
    out_json = out_dir / "walk.json"
    _write_json(out_json, {"stats": stats, "fits": fits})
    timings["write"] = time.time() - t
    _write_manifest(out_dir, "walk", config, timings, [out_csv, out_json], t0)
    return 0


def _cmd_approx(args, out_dir: Path, config: dict, t0: float) -> int:
    timings = {}
    t = time.time()
    table = full_special_linear(args.prime)
    spec = args.set
    if spec in ("torus", "borel", "monomial"):
        subset = FiniteSubset(table, standard_subgroup(table, spec))
    elif spec.startswith("random:"):
        if args.seed is None:
            raise ConfigError("random sets are stochastic; --seed is required")
        size = _int(spec.split(":", 1)[1], "random set size")
        subset = random_symmetric_subset(table, size, args.seed)
    elif spec.startswith("file:"):
        ids = json.loads(Path(spec.split(":", 1)[1]).read_text())
        if not isinstance(ids, list):
            raise ConfigError("id list file must hold a JSON array")
        subset = FiniteSubset(table, ids)
    else:
        raise ConfigError(f"unknown set spec {spec!r}")
    timings["setup"] = time.time() - t
    t = time.time()
    report = approx_report(subset)
    timings["compute"] = time.time() - t
    t = time.time()
    out_json = out_dir / "approx.json"
    _write_json(out_json, report)
    timings["write"] = time.time() - t
    _write_manifest(out_dir, "approx", config, timings, [out_json], t0)
    return 0


_SIEVE_KEYS = {"generators", "preset", "battery", "target", "schedule",
               "samples", "seed", "b_hat"}
_BATTERY_KEYS = {"count", "m", "p_min", "ceiling"}
_TARGET_KEYS = {"kind", "m", "partition", "t"}


def _check_keys(mapping: dict, allowed: set, where: str) -> None:
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {', '.join(unknown)}")


def _cmd_sieve(args, out_dir: Path, config: dict, t0: float) -> int:
    timings = {}
    t = time.time()
    try:
        raw = Path(args.config).read_bytes()
        cfg = tomllib.loads(raw.decode())
    except (OSError, UnicodeDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {args.config}: {exc}") from exc
    _check_keys(cfg, _SIEVE_KEYS, "config")
    for key in ("battery", "target", "schedule", "samples"):
        if key not in cfg:
            raise ConfigError(f"config lacks required key {key!r}")
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        raise ConfigError("sieve is stochastic; seed required (config or --seed)")
    _check_keys(cfg["battery"], _BATTERY_KEYS, "battery")
    _check_keys(cfg["target"], _TARGET_KEYS, "target")
    bspec = cfg["battery"]
    battery = select_primes(int(bspec["count"]), int(bspec.get("m", 1)),
                            int(bspec.get("p_min", 3)),
                            ceiling=int(bspec.get("ceiling", 100_000)))
    if "generators" in cfg and "preset" in cfg:
        raise ConfigError("give either generators or preset, not both")
    if "generators" in cfg:
        gens = load_generator_file(cfg["generators"])
    elif cfg.get("preset", "sanov") == "sanov":
        gens = sanov_generators()
    else:
        raise ConfigError(f"unknown preset {cfg['preset']!r}")
    tspec = cfg["target"]
    kind = tspec.get("kind")
    kwargs = {}
    if kind == "m_power":
        kwargs["m"] = int(tspec["m"])
    elif kind == "missing_cycle_type":
        kwargs["partition"] = tuple(int(c) for c in tspec["partition"])
    elif kind == "trace_value":
        kwargs["t"] = int(tspec["t"])
    elif kind == "power_unipotent":
        pass
    else:
        raise ConfigError(f"unknown target kind {kind!r}")
    sched = cfg["schedule"]
    if isinstance(sched, list):
        schedule = sorted(set(int(v) for v in sched))
    elif isinstance(sched, dict):
        _check_keys(sched, {"start", "stop", "step"}, "schedule")
        schedule = list(range(int(sched["start"]), int(sched["stop"]) + 1,
                              int(sched.get("step", 1))))
    else:
        raise ConfigError("schedule must be a list or {start, stop, step}")
    if not schedule:
        raise ConfigError("empty schedule")
    samples = int(cfg["samples"])
    b_hat = float(cfg["b_hat"]) if "b_hat" in cfg else None
    timings["setup"] = time.time() - t
    t = time.time()
    predicate = target_predicate(kind, battery, gens, **kwargs)
    sampler = WalkSampler(gens, int(seed), battery.primes)
    report = sieve_run(sampler, predicate, battery, schedule, samples,
                       b_hat=b_hat, chunk=_chunk_for(args.threads, samples))
    timings["compute"] = time.time() - t
    t = time.time()
    out_csv = out_dir / "sieve.csv"
    with open(out_csv, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["n", "estimate", "ci_lo", "ci_hi"])
        for n in report.schedule:
            lo, hi = report.interval(n)
            w.writerow([n, _fmt(report.estimate(n)), _fmt(lo), _fmt(hi)])
    out_json = out_dir / "sieve.json"
    _write_json(out_json, report)
    timings["write"] = time.time() - t
    _write_manifest(out_dir, "sieve", config, timings, [out_csv, out_json], t0)
    return 0


def _cmd_strongapprox(args, out_dir: Path, config: dict, t0: float) -> int:
    timings = {}
    t = time.time()
    gens = _resolve_gens(args)
    report = strong_approx_scan(gens, _parse_prime_list(args.primes), cap=args.cap)
    timings["compute"] = time.time() - t
    t = time.time()
    out_csv = out_dir / "strongapprox.csv"
    with open(out_csv, "w", newline="") as fh:
        w = _csv_writer(fh)
        w.writerow(["p", "status", "order", "expected"])
        for row in report.rows:
            w.writerow([row.prime, row.status,
                        "" if row.order is None else row.order, row.expected])
    out_json = out_dir / "strongapprox.json"
    _write_json(out_json, report)
    timings["write"] = time.time() - t
    _write_manifest(out_dir, "strongapprox", config, timings,
                    [out_csv, out_json], t0)
    return 0


def _cmd_report(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
    base = path.parent
    ok = True
    for name, digest in sorted(manifest.get("outputs", {}).items()):
        target = base / name
        if not target.exists():
            print(f"{name}: MISSING")
            ok = False
        elif _sha256(target) != digest:
            print(f"{name}: MISMATCH")
            ok = False
        else:
            print(f"{name}: ok")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="64-bit seed for stochastic commands")
    common.add_argument("--threads", type=int, default=1,
                        help="worker count hint (results are identical for any value)")
    common.add_argument("--out-dir", default=".", help="output directory")

    parser = argparse.ArgumentParser(
        prog="groupsieve",
        description="Spectral gaps, random walks, approximate-subgroup "
                    "statistics and group sieves on SL_d(F_p)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gap = sub.add_parser("gap", parents=[common],
                           help="Cayley spectral gaps over a prime range")
    p_gap.add_argument("--preset", choices=["sanov"], default="sanov")
    p_gap.add_argument("--gens", help="generator JSON file (overrides preset)")
    p_gap.add_argument("--primes", default="3:13", help="range 3:61 or list 3,5,7")
    p_gap.add_argument("--cyclic", type=int, default=None,
                       help="use Z/n with steps {1,-1} instead of SL_2")
    p_gap.add_argument("--method", choices=["auto", "dense", "power_iteration"],
                       default="auto")
    p_gap.add_argument("--tol", type=float, default=1e-10)

    p_walk = sub.add_parser("walk", parents=[common],
                            help="Monte Carlo residue walk against targets")
    p_walk.add_argument("--preset", choices=["sanov"], default="sanov")
    p_walk.add_argument("--gens", help="generator JSON file (overrides preset)")
    p_walk.add_argument("--samples", type=int, required=True)
    p_walk.add_argument("--schedule", required=True,
                        help="10:120:5 (arithmetic), geom:8:256:2, or 4,8,12")
    p_walk.add_argument("--targets", required=True,
                        help="comma list of KIND[:PARAM]@PRIME, e.g. borel@101,trace:0@101")
    p_walk.add_argument("--primes", default="",
                        help="extra primes to register beyond target primes")
    p_walk.add_argument("--lazy", action="store_true",
                        help="mix in the identity with weight 1/2 each step")

    p_apx = sub.add_parser("approx", parents=[common],
                           help="approximate-subgroup statistics of a subset")
    p_apx.add_argument("--prime", type=int, required=True)
    p_apx.add_argument("--set", required=True,
                       help="torus | borel | monomial | random:SIZE | file:PATH")

    p_sv = sub.add_parser("sieve", parents=[common],
                          help="group sieve run from a TOML config")
    p_sv.add_argument("--config", required=True)

    p_sa = sub.add_parser("strongapprox", parents=[common],
                          help="mod-p surjectivity scan")
    p_sa.add_argument("--preset", choices=["sanov"], default="sanov")
    p_sa.add_argument("--gens", help="generator JSON file (overrides preset)")
    p_sa.add_argument("--primes", default="2:61")
    p_sa.add_argument("--cap", type=int, default=DEFAULT_CAP)

    p_rep = sub.add_parser("report", parents=[common],
                           help="verify output digests against a manifest")
    p_rep.add_argument("--manifest", required=True)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    t0 = time.time()
    config = {k: v for k, v in sorted(vars(args).items())
              if k not in ("out_dir", "threads")}
    try:
        if args.command == "report":
            return _cmd_report(args)
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        handler = {"gap": _cmd_gap, "walk": _cmd_walk, "approx": _cmd_approx,
                   "sieve": _cmd_sieve, "strongapprox": _cmd_strongapprox}[args.command]
        return handler(args, out_dir, config, t0)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GroupSieveError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
