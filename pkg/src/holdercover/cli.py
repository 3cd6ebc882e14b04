"""Command-line experiment runner.

Every subcommand resolves its options from defaults, an optional key-value
config file and command-line flags (in that order of precedence), runs, and
writes a report that embeds the resolved config.  ``replay`` re-runs a
report's embedded config; the output matches the original byte for byte
apart from the timestamp.

Exit status: 0 on success, 1 on a usage or config error, 2 when a
certificate or audit fails.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction
from functools import partial

import numpy as np

from . import cover as cv
from . import directions as dr
from . import doubling as db
from . import lattice as lt
from . import percolation as pc
from . import visibility as vis

SCHEMA = 1
SEED_ENV = "HOLDERCOVER_SEED"


class UsageError(ValueError):
    """Invalid command line or config; exit status 1."""


class CertificateFailure(RuntimeError):
    """A run finished but a certificate or audit failed; exit status 2."""


# ---------------------------------------------------------------------------
# option tables


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _window(text) -> str:
    if str(text).strip() == "":
        return ""
    lo, hi = (int(v) for v in str(text).split(":"))
    if lo > hi:
        raise ValueError("window must be lo:hi with lo <= hi")
    return f"{lo}:{hi}"


def _fraction_str(text) -> str:
    Fraction(str(text))
    return str(text)


def _float_list(text) -> str:
    vals = [float(v) for v in str(text).split(",")]
    if not vals:
        raise ValueError("empty list")
    return str(text)


@dataclass(frozen=True)
class Opt:
    name: str
    kind: object
    default: object
    help: str


_SET = Opt("set", str, "corner_dust:2,1/32", "set spec kind:params, e.g. cantor1d:1/3 or corner_dust:2,1/32")
_SEED = Opt("seed", int, 0, "random seed (HOLDERCOVER_SEED overrides)")

OPTIONS: dict[str, list[Opt]] = {
    "boxdim": [
        Opt("set", str, "cantor1d:1/3", _SET.help),
        Opt("depth", int, 12, "generation depth of the set"),
        Opt("window", _window, "", "fit window lo:hi (default 1:depth)"),
        Opt("base", int, 0, "cube base (0 picks 1/ratio for Cantor sets, else 2)"),
    ],
    "cover": [
        _SET,
        Opt("depth", int, 3, "generation depth of the set"),
        Opt("k", int, 1, "plane dimension"),
        Opt("t", float, 0.45, "dimension parameter t"),
        Opt("w", float, 0.95, "content exponent w"),
        Opt("n0", int, 4, "first level"),
        Opt("nmax", int, 9, "last level"),
        Opt("mesh", float, 0.01, "Grassmannian net mesh"),
        Opt("directions", int, 20, "number of random unflagged planes to certify"),
        _SEED,
    ],
    "percolate": [
        Opt("d", int, 2, "ambient dimension"),
        Opt("t", float, 0.4, "percolation parameter, p = 2^(t-d)"),
        Opt("depth", int, 11, "subdivision depth"),
        Opt("seeds", int, 20, "number of surviving runs"),
        Opt("m", int, 8, "sphere resolution 2^-m for coverage"),
        Opt("require_pair", _bool, True, "require both transversal subtrees to survive"),
        _SEED,
    ],
    "visibility": [
        _SET,
        Opt("depth", int, 3, "generation depth of the set"),
        Opt("t", float, 0.45, "dimension parameter t"),
        Opt("w", float, 0.95, "content exponent w"),
        Opt("n0", int, 4, "first level"),
        Opt("nmax", int, 8, "last level"),
        Opt("S", _float_list, "2", "clip radius, or a comma list for a sweep"),
        Opt("mesh", float, 0.0, "grid mesh (0 = smallest tube radius)"),
        Opt("viewpoints", int, 50, "random viewpoints per radius"),
        _SEED,
    ],
    "doubling": [
        Opt("n1", int, 100, "first block length"),
        Opt("delta", _fraction_str, "0.01", "side weight delta (decimal or p/q)"),
        Opt("L", int, 5, "number of blocks"),
        Opt("d", int, 1, "product dimension"),
        Opt("depth", int, 8, "depth of the doubling search"),
    ],
    "netaudit": [
        Opt("d", int, 2, "ambient dimension"),
        Opt("k", int, 1, "plane dimension"),
        Opt("mesh", float, 0.05, "net mesh"),
        Opt("audit", int, 10_000, "Haar samples in the covering audit"),
        _SEED,
    ],
}

CSV_COLUMNS = {
    "boxdim": ["level", "count"],
    "cover": ["level", "pairs", "flagged_cells", "content", "tail_content"],
    "percolate": ["seed", "level", "count"],
    "visibility": ["S", "level", "tubes", "flagged_cells", "content"],
    "doubling": ["L", "count", "exponent", "mu_factor"],
    "netaudit": ["cell", "nearest_other"],
}


# ---------------------------------------------------------------------------
# config files


def parse_config(text: str, source: str = "<config>") -> dict[int, tuple[str, str]]:
    """Parse ``key = value`` lines; returns {line number: (key, value)}."""
    out = {}
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{source}:{no}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise UsageError(f"{source}:{no}: missing key")
        if key in {k for k, _ in out.values()}:
            raise UsageError(f"{source}:{no}: duplicate key {key!r}")
        out[no] = (key, value)
    if not out:
        raise UsageError(f"{source}: config file is empty")
    return out


def _convert(opt: Opt, value, where: str):
    try:
        return opt.kind(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"{where}: bad value {value!r} for {opt.name}: {exc}") from None


def resolve_config(command: str, file_entries: dict | None = None, flags: dict | None = None,
                   source: str = "<config>", env: bool = True) -> dict:
    """Defaults, then config entries, then flags, then the seed environment override."""
    opts = {o.name: o for o in OPTIONS[command]}
    values = {o.name: o.default for o in OPTIONS[command]}
    for no, (key, value) in (file_entries or {}).items():
        if key == "command":
            if value != command:
                raise UsageError(f"{source}:{no}: config is for {value!r}, not {command!r}")
            continue
        if key not in opts:
            raise UsageError(f"{source}:{no}: unknown key {key!r} for {command}")
        values[key] = _convert(opts[key], value, f"{source}:{no}")
    for key, value in (flags or {}).items():
        if value is not None:
            values[key] = _convert(opts[key], value, f"--{key}")
    if env and "seed" in opts and os.environ.get(SEED_ENV):
        values["seed"] = _convert(opts["seed"], os.environ[SEED_ENV], SEED_ENV)
    values["command"] = command
    return values


# ---------------------------------------------------------------------------
# helpers


def parse_set(spec: str, depth: int) -> lt.PointSample:
    """``kind:a,b`` with positional parameters per kind."""
    kind, _, rest = spec.partition(":")
    args = [a.strip() for a in rest.split(",") if a.strip()]
    try:
        if kind == "cantor1d":
            return lt.cantor1d(Fraction(args[0]) if args else Fraction(1, 3), depth)
        if kind == "corner_dust":
            d = int(args[0]) if args else 2
            r = Fraction(args[1]) if len(args) > 1 else Fraction(1, 4)
            return lt.corner_dust(d, r, depth)
        if kind == "dense_direction_countable":
            d = int(args[0]) if args else 2
            J = int(args[1]) if len(args) > 1 else 8
            return lt.dense_direction_countable(d, J)
        if kind == "grid":
            return lt.grid(int(args[0]) if args else 2, depth)
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad set spec {spec!r}: {exc}") from None
    raise UsageError(f"unknown set kind {kind!r}")


def _pmap(fn, items, jobs: int):
    items = list(items)
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _finite(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


# ---------------------------------------------------------------------------
# commands; each returns (result dict, csv rows, passed)


def run_boxdim(cfg: dict, jobs: int):
    sample = parse_set(cfg["set"], cfg["depth"])
    base = cfg["base"]
    if base == 0:
        base = 2
        if cfg["set"].startswith("cantor1d"):
            r = Fraction(cfg["set"].partition(":")[2] or "1/3")
            base = r.denominator if r.numerator == 1 else 2
    lo, hi = (int(v) for v in (cfg["window"] or f"1:{cfg['depth']}").split(":"))
    cover = lt.build_scale_cover(sample, base, range(lo, hi + 1))
    fit = lt.box_dimension_estimate(cover, (lo, hi))
    result = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
              "levels": list(fit.levels), "counts": list(fit.counts), "degenerate": fit.degenerate,
              "base": base, "points": len(sample)}
    rows = list(zip(fit.levels, fit.counts))
    return result, rows, True


def _certify(V_frame, sample, params):
    return cv.injectivity_certificate(sample, dr.KPlane(V_frame), params)


def run_cover(cfg: dict, jobs: int):
    sample = parse_set(cfg["set"], cfg["depth"])
    d = sample.dim
    params = cv.CoverParams(d, cfg["k"], cfg["t"], cfg["w"], cfg["n0"], cfg["nmax"])
    scover = lt.build_scale_cover(sample, 2, params.levels)
    fams = cv.build_pair_families(scover, params)
    net = dr.build_net(d, cfg["k"], cfg["mesh"], seed=cfg["seed"])
    report = cv.accumulate_exceptional(fams, net, params)
    flagged = set(report.flagged().tolist())
    rng = np.random.default_rng(cfg["seed"] + 1)
    frames = []
    while len(frames) < cfg["directions"] and len(flagged) < len(net):
        F = dr.random_planes(d, cfg["k"], 1, rng)[0]
        if net.nearest(dr.KPlane(F))[0] not in flagged:
            frames.append(F)
    certs = _pmap(partial(_certify, sample=sample, params=params), frames, jobs)
    box = lt.box_dimension_estimate(scover, (params.n0, params.nmax))
    result = json.loads(cv.report_json(report, certs))
    if len(flagged) == len(net):
        result["passed"] = False
        result["reason"] = "every net cell is flagged"
    result["count_slope"] = box.slope
    result["net"] = {"cells": len(net), "audit": net.audit}
    rows = [(n, report.pair_counts[n], int(report.cells[n].size), report.content[n], report.tail_content[n])
            for n in report.levels]
    return result, rows, result["passed"]


def _percolation_run(seed, cfg):
    p = pc.p_from_t(cfg["d"], cfg["t"])
    Q = pc.default_transversal_pair(cfg["d"])
    if cfg["require_pair"] and not all(pc.retained_path(seed, p, q) for q in Q):
        return None
    tree = pc.simulate(cfg["d"], cfg["depth"], seed, p=p)
    if tree.extinct:
        return None
    out = {"seed": seed, "counts": tree.counts}
    try:
        out["slope"] = pc.direction_slope(tree)["slope"]
    except pc.ExtinctError:
        if cfg["require_pair"]:
            return None
        out["slope"] = None
    if cfg["d"] in (2, 3):
        out["coverage"] = pc.sphere_coverage(tree, cfg["m"])
    return out


def run_percolate(cfg: dict, jobs: int):
    runs, seed, tried = [], cfg["seed"], 0
    batch = max(64, 16 * jobs)
    fn = partial(_percolation_run, cfg=cfg)
    while len(runs) < cfg["seeds"]:
        if tried > 10**6:
            raise CertificateFailure("too few surviving runs")
        for r in _pmap(fn, range(seed, seed + batch), jobs):
            if r is not None and len(runs) < cfg["seeds"]:
                runs.append(r)
        seed += batch
        tried += batch
    slopes = [r["slope"] for r in runs if r.get("slope") is not None]
    cov = [r["coverage"] for r in runs if "coverage" in r]
    result = {
        "p": pc.p_from_t(cfg["d"], cfg["t"]),
        "runs": runs,
        "mean_slope": float(np.mean(slopes)) if slopes else None,
        "slope_se": float(np.std(slopes, ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else None,
        "coverage_fraction_099": float(np.mean([c >= 0.99 for c in cov])) if cov else None,
    }
    rows = [(r["seed"], n, c) for r in runs for n, c in enumerate(r["counts"])]
    return result, rows, True


def _view(h, sample, t, w, report):
    res = vis.polar_graph_cover(sample, h, t, w)
    flagged = report.is_flagged(h)
    if res.ok:
        return {"h": h.tolist(), "ok": True, "flagged": flagged, "constant": res.constant}
    return {"h": h.tolist(), "ok": False, "flagged": flagged, "pair": list(res.pair)}


def run_visibility(cfg: dict, jobs: int):
    sample = parse_set(cfg["set"], cfg["depth"])
    d = sample.dim
    params = cv.CoverParams(d, 1, cfg["t"], cfg["w"], cfg["n0"], cfg["nmax"])
    scover = lt.build_scale_cover(sample, 2, params.levels)
    pts = sample.as_float()
    rng = np.random.default_rng(cfg["seed"])
    per_S, rows, passed = [], [], True
    for S in (float(v) for v in cfg["S"].split(",")):
        rep = vis.tube_exceptional_points(scover, params, S=S, mesh=cfg["mesh"] or None)
        hs = []
        while len(hs) < cfg["viewpoints"]:
            h = rng.uniform(-S, S, d)
            if np.linalg.norm(h) < S and not np.any(np.all(pts == h, axis=1)):
                hs.append(h)
        views = _pmap(partial(_view, sample=sample, t=cfg["t"], w=cfg["w"], report=rep), hs, jobs)
        # an unflagged viewpoint that is blocked contradicts the tube cover
        passed &= all(v["ok"] or v["flagged"] for v in views)
        entry = rep.as_dict()
        entry["viewpoints"] = views
        per_S.append(entry)
        rows += [(S, n, len(rep.tubes[n]), int(rep.flags[n].sum()), rep.content[n]) for n in rep.levels]
    return {"radii": per_S}, rows, passed


def run_doubling(cfg: dict, jobs: int):
    delta = Fraction(cfg["delta"])
    rule = db.DigitRule(cfg["n1"], delta)
    mu = db.TernaryBernoulli(delta)
    result = json.loads(db.report_json(rule, cfg["L"], mu, cfg["d"]))
    est = db.doubling_constant_estimate(mu, cfg["d"], cfg["depth"])
    result["doubling"] = est.as_dict()
    res = db.k_boxdim_bound(rule, range(1, cfg["L"] + 1))
    factors = result["mu_K_factors"]
    rows = [(L, res["counts"][L], res["exponents"][L], factors[L - 1]) for L in range(1, cfg["L"] + 1)]
    return result, rows, True


def run_netaudit(cfg: dict, jobs: int):
    try:
        net = dr.build_net(cfg["d"], cfg["k"], cfg["mesh"], seed=cfg["seed"], audit_size=cfg["audit"])
    except dr.NetAuditError as exc:
        return {"passed": False, "error": str(exc)}, [], False
    nearest = []
    for i in range(len(net)):
        dist = dr.plane_distances(net.centers[i], net.centers)
        dist[i] = np.inf
        nearest.append(float(dist.min()) if len(net) > 1 else math.inf)
    result = {"cells": len(net), "c_net": net.c_net, "audit": net.audit, "passed": net.audit["passed"],
              "min_separation": _finite(min(nearest))}
    return result, [(i, _finite(v)) for i, v in enumerate(nearest)], True


RUNNERS = {
    "boxdim": run_boxdim,
    "cover": run_cover,
    "percolate": run_percolate,
    "visibility": run_visibility,
    "doubling": run_doubling,
    "netaudit": run_netaudit,
}


# ---------------------------------------------------------------------------
# reports


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def render(cfg: dict, fmt: str, jobs: int = 1) -> tuple[str, bool]:
    """Run ``cfg`` and return (report text, passed)."""
    result, rows, passed = RUNNERS[cfg["command"]](cfg, jobs)
    if fmt == "json":
        payload = {"schema": SCHEMA, "command": cfg["command"], "config": cfg, "passed": passed,
                   "result": result, "timestamp": _timestamp()}
        return json.dumps(payload, sort_keys=True, indent=2, default=_json_default) + "\n", passed
    head = (f"# schema: {SCHEMA}\n# config: {json.dumps(cfg, sort_keys=True)}\n"
            f"# passed: {str(passed).lower()}\n# timestamp: {_timestamp()}\n")
    return head + _csv(rows, CSV_COLUMNS[cfg["command"]]), passed


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def load_report_config(path: str) -> tuple[dict, str]:
    """Embedded config and format of a report written by this tool."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.startswith("#"):
        for line in text.splitlines():
            if line.startswith("# config: "):
                return json.loads(line[len("# config: "):]), "csv"
        raise UsageError(f"{path}: no embedded config")
    try:
        return json.loads(text)["config"], "json"
    except (ValueError, KeyError):
        raise UsageError(f"{path}: not a report") from None


def describe() -> str:
    lines = [f"JSON reports (schema {SCHEMA}): keys command, config, passed, result, schema, timestamp.",
             "CSV reports: '# schema', '# config', '# passed', '# timestamp' lines, then a table.", ""]
    for cmd, cols in CSV_COLUMNS.items():
        lines.append(f"{cmd}: {','.join(cols)}")
        for o in OPTIONS[cmd]:
            lines.append(f"    {o.name} (default {o.default!r}): {o.help}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="holdercover", description="Hölder graph cover experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd, opts in OPTIONS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--format", choices=["json", "csv"], default=None)
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes; never changes results")
        for o in opts:
            p.add_argument(f"--{o.name.replace('_', '-')}", dest=o.name, default=None, help=o.help)
    r = sub.add_parser("replay", help="re-run the config embedded in a report")
    r.add_argument("report")
    r.add_argument("--out")
    r.add_argument("--jobs", type=int, default=1)
    sub.add_parser("describe", help="document report columns and options")
    return parser


def _write(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "describe":
            _write(describe(), None)
            return 0
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        if args.command == "replay":
            cfg, fmt = load_report_config(args.report)
            cfg = resolve_config(cfg["command"], {i: (k, v) for i, (k, v) in enumerate(cfg.items(), 1)},
                                 source=args.report, env=False)
            cfg_format = fmt
        else:
            entries = None
            fmt_entry = None
            if args.config:
                try:
                    with open(args.config, encoding="utf-8") as fh:
                        entries = parse_config(fh.read(), args.config)
                except OSError as exc:
                    raise UsageError(f"cannot read config: {exc}") from None
                for no, (k, v) in list(entries.items()):
                    if k == "format":
                        fmt_entry = v
                        del entries[no]
            flags = {o.name: getattr(args, o.name) for o in OPTIONS[args.command]}
            cfg = resolve_config(args.command, entries, flags, args.config or "<config>")
            cfg_format = args.format or fmt_entry or "json"
            if cfg_format not in ("json", "csv"):
                raise UsageError(f"unknown format {cfg_format!r}")
        text, passed = render(cfg, cfg_format, args.jobs)
        _write(text, args.out)
        return 0 if passed else 2
    except UsageError as exc:
        print(f"holdercover: error: {exc}", file=sys.stderr)
        return 1
    except CertificateFailure as exc:
        print(f"holdercover: failed: {exc}", file=sys.stderr)
        return 2
    except (dr.NetAuditError, pc.ExtinctError) as exc:
        print(f"holdercover: failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"holdercover: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
