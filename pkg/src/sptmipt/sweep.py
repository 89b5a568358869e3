"""Manifests, result files, resumable parallel sweeps and the analysis passes."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import os
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable

import numpy as np
import yaml

from . import analysis
from .circuits import (CHAIN_OBSERVABLES, CircuitConfig, EventKind, Probes, TrajectoryRecord,
                       horizon, make_rng, point_seed, run_block, run_trajectory, sample_phase,
                       _pool_tables)
from .clifford import StabilizerState, clipped_endpoints, contiguous_entropy_table, entanglement_entropy

log = logging.getLogger("sptmipt")

ROWS_VERSION = "sptmipt-rows v1"
ROW_FIELDS = ["p_s", "p_u", "L", "t", "observable", "trajectory", "value", "seed"]
KINDS = ("sweep", "oracle", "percolation", "tau", "collapse", "fit")
WORKERS_ENV = "SPTMIPT_WORKERS"

EXIT_OK, EXIT_FAILED, EXIT_VALIDATION, EXIT_MISMATCH, EXIT_IO = 0, 1, 2, 3, 4


class ManifestError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid manifest:\n  " + "\n  ".join(self.problems))


# ---------------------------------------------------------------------------
# manifest

TOP_KEYS = {"kind", "L", "p_s", "p_u", "trajectories", "workers", "output", "master_seed",
            "backend", "events", "config", "probes", "oracle", "analysis"}
CONFIG_KEYS = {f.name for f in fields(CircuitConfig)} - {"N", "p_s", "p_u", "master_seed"}
PROBE_KEYS = {"times", "every", "observables"}
ORACLE_KEYS = {"probe_every", "regions", "rank_every"}
ANALYSIS_KEYS = {"input", "observable", "p_u", "x_min", "window", "n_boot", "boot_seed",
                 "L", "p_s", "t"}
OBSERVABLES = set(CHAIN_OBSERVABLES) | {"S_a", "S_a_tilde"}


@dataclass
class RunManifest:
    kind: str
    L: list
    p_s: list
    p_u: list
    trajectories: int = 1
    workers: int | None = None
    output: str | None = None
    master_seed: int = 0
    backend: str = "auto"
    events: str = "circuit"
    config: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    analysis: dict = field(default_factory=dict)

    def point_configs(self) -> list[CircuitConfig]:
        out = []
        for L in self.L:
            for pu in self.p_u:
                for ps in self.p_s:
                    out.append(CircuitConfig(N=int(L), p_s=float(ps), p_u=float(pu),
                                             master_seed=int(self.master_seed), **self.config))
        return out

    def probes_for(self, cfg: CircuitConfig) -> Probes:
        p = self.probes or {}
        obs = tuple(p.get("observables") or Probes.default(cfg).observables)
        if p.get("every"):
            k = int(p["every"])
            times = tuple(range(k, horizon(cfg) + 1, k))
        elif p.get("times") is not None:
            times = tuple(int(t) for t in p["times"])
        else:
            times = Probes.default(cfg).times
        return Probes(times, obs)


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def validate_manifest(raw: dict) -> RunManifest:
    problems = []
    if not isinstance(raw, dict):
        raise ManifestError(["<root>: expected a mapping"])
    for k in sorted(set(raw) - TOP_KEYS):
        problems.append(f"{k}: unknown key")
    for sect, allowed in (("config", CONFIG_KEYS), ("probes", PROBE_KEYS),
                          ("oracle", ORACLE_KEYS), ("analysis", ANALYSIS_KEYS)):
        sub = raw.get(sect) or {}
        if not isinstance(sub, dict):
            problems.append(f"{sect}: expected a mapping")
            continue
        for k in sorted(set(sub) - allowed):
            problems.append(f"{sect}.{k}: unknown key")
    kind = raw.get("kind")
    if kind not in KINDS:
        problems.append(f"kind: must be one of {', '.join(KINDS)}")
    needs_grid = kind in ("sweep", "oracle", "percolation", "tau")
    grid = {}
    n_before = len(problems)
    for k in ("L", "p_s", "p_u"):
        if k not in raw:
            if needs_grid:
                problems.append(f"{k}: required")
            grid[k] = [] if k != "p_u" else [0.0]
            continue
        vals = _as_list(raw[k])
        if not vals:
            problems.append(f"{k}: empty list")
        for i, v in enumerate(vals):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                problems.append(f"{k}[{i}]: not a number")
            elif k == "L" and (int(v) != v or int(v) < 4 or int(v) % 2):
                problems.append(f"{k}[{i}]: chain length must be an even integer >= 4")
        grid[k] = vals
    grid_ok = len(problems) == n_before
    traj = raw.get("trajectories", 1)
    if isinstance(traj, bool) or not isinstance(traj, int) or traj < 1:
        problems.append("trajectories: must be an integer >= 1")
    workers = raw.get("workers")
    if workers is not None and (not isinstance(workers, int) or workers < 1):
        problems.append("workers: must be an integer >= 1")
    seed = raw.get("master_seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        problems.append("master_seed: must be an unsigned 64-bit integer")
    backend = raw.get("backend", "auto")
    if backend not in ("auto", "tableau", "percolation"):
        problems.append("backend: must be auto, tableau or percolation")
    events = raw.get("events", "circuit")
    if events not in ("circuit", "marginal"):
        problems.append("events: must be circuit or marginal")
    probes = raw.get("probes") or {}
    if isinstance(probes, dict):
        for i, o in enumerate(probes.get("observables") or []):
            if o not in OBSERVABLES:
                problems.append(f"probes.observables[{i}]: unknown observable {o!r}")
    template = dict(raw.get("config") or {}) if isinstance(raw.get("config"), dict) else {}
    template = {k: v for k, v in template.items() if k in CONFIG_KEYS}
    if grid_ok and needs_grid:
        for L in grid["L"]:
            for pu in grid["p_u"]:
                for ps in grid["p_s"]:
                    try:
                        cfg = CircuitConfig(N=int(L), p_s=float(ps), p_u=float(pu), **template)
                    except (ValueError, TypeError) as exc:
                        problems.append(f"grid[L={L}, p_s={ps}, p_u={pu}]: {exc}")
                        continue
                    if kind in ("oracle", "percolation") and cfg.p_u != 0:
                        problems.append(f"grid[L={L}, p_s={ps}, p_u={pu}]: {kind} requires p_u=0")
                    if "S_topo" in (probes.get("observables") or ["S_topo"]) and cfg.N % 4:
                        problems.append(f"grid[L={L}]: S_topo needs L divisible by 4")
    if problems:
        raise ManifestError(problems)
    return RunManifest(kind=kind, L=[int(v) for v in grid["L"]], p_s=[float(v) for v in grid["p_s"]],
                       p_u=[float(v) for v in grid["p_u"]], trajectories=traj, workers=workers,
                       output=raw.get("output"), master_seed=seed, backend=backend, events=events,
                       config=template, probes=dict(probes), oracle=dict(raw.get("oracle") or {}),
                       analysis=dict(raw.get("analysis") or {}))


def parse_manifest(path) -> RunManifest:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise OSError(f"cannot read manifest {path}: {exc}") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ManifestError([f"<root>: not well-formed YAML ({exc})"]) from exc
    return validate_manifest(raw)


# ---------------------------------------------------------------------------
# rows


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_rows(path, rows: Iterable[list]):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# {ROWS_VERSION}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROW_FIELDS)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    os.replace(tmp, path)


def read_rows(path) -> list[dict]:
    with open(path, newline="") as fh:
        head = fh.readline().strip()
        if head != f"# {ROWS_VERSION}":
            raise ValueError(f"{path}: unsupported row schema {head!r}")
        rd = csv.DictReader(fh)
        if rd.fieldnames != ROW_FIELDS:
            raise ValueError(f"{path}: unexpected columns {rd.fieldnames}")
        out = []
        for r in rd:
            r["p_s"], r["p_u"] = float(r["p_s"]), float(r["p_u"])
            r["L"], r["t"] = int(r["L"]), int(r["t"])
            r["value"] = float(r["value"])
            out.append(r)
        return out


def record_rows(cfg: CircuitConfig, rec: TrajectoryRecord):
    for t, name, v in rec.rows:
        yield [cfg.p_s, cfg.p_u, cfg.N, t, name, rec.trajectory, v, rec.lineage]


def aggregate_rows(cfg: CircuitConfig, agg: dict):
    lineage = f"{cfg.master_seed:x}/{point_seed(cfg.master_seed, cfg.N, cfg.p_s, cfg.p_u):016x}"
    for (name, t), st in agg.items():
        yield [cfg.p_s, cfg.p_u, cfg.N, t, name, "agg", st.mean, lineage]
        yield [cfg.p_s, cfg.p_u, cfg.N, t, name + ":stderr", "agg", st.stderr, lineage]
        yield [cfg.p_s, cfg.p_u, cfg.N, t, name + ":count", "agg", st.count, lineage]


def point_key(cfg: CircuitConfig) -> str:
    return f"L={cfg.N},p_s={cfg.p_s!r},p_u={cfg.p_u!r}"


# ---------------------------------------------------------------------------
# journal


def read_journal(path) -> list[dict]:
    """Complete journal entries; a torn final line is dropped (and trimmed on disk)."""
    path = Path(path)
    if not path.exists():
        return []
    good, keep = [], []
    with open(path) as fh:
        for line in fh:
            if not line.endswith("\n"):
                break
            try:
                good.append(json.loads(line))
            except json.JSONDecodeError:
                break
            keep.append(line)
    with open(path, "w") as fh:
        fh.writelines(keep)
    return good


# ---------------------------------------------------------------------------
# task execution


def _run_task(task):
    kind, cfg_dict, index, probes, backend, events = task
    cfg = CircuitConfig(**cfg_dict)
    try:
        if kind == "tau":
            from .channel import time_to_steady
            res = time_to_steady(cfg, trajectory_index=index)
            rec = TrajectoryRecord(cfg.config_hash(), index, cfg.seed_for(index), cfg.lineage(index))
            rec.rows = [(res.time_steps, "tau_star", float(res.tau)),
                        (res.time_steps, "tau_censored", int(res.censored))]
            rec.final = {"events": res.events, "final_n": res.final_n}
        elif backend == "percolation":
            from .percolation import run_percolation_trajectory
            rec = run_percolation_trajectory(cfg, index, Probes(*probes), events=events)
        else:
            rec = run_trajectory(cfg, index, None, Probes(*probes))
        return ("ok", point_key(cfg), index, rec.to_json())
    except Exception:
        return ("err", point_key(cfg), index, traceback.format_exc())


def choose_backend(manifest: RunManifest, cfg: CircuitConfig) -> str:
    if manifest.backend != "auto":
        return manifest.backend
    if manifest.kind == "percolation":
        return "percolation"
    return "tableau"


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(manifest: RunManifest, out_dir, workers: int | None = None) -> dict:
    """Run every (point, trajectory) not yet in the journal, then write sorted outputs.

    Returns a summary with per-trajectory failures.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or manifest.workers or default_workers()
    journal = out / "journal.jsonl"
    done = {(e["key"], e["trajectory"]): e for e in read_journal(journal)}
    configs = manifest.point_configs()
    tasks = []
    for cfg in configs:
        pr = manifest.probes_for(cfg)
        backend = choose_backend(manifest, cfg)
        for i in range(manifest.trajectories):
            if (point_key(cfg), i) not in done:
                tasks.append((manifest.kind, cfg.to_dict(), i, (pr.times, pr.observables),
                              backend, manifest.events))
    failures = []
    if tasks:
        log.info("running %d trajectories on %d worker(s)", len(tasks), workers)
        with open(journal, "a") as jf:
            def consume(res):
                status, key, idx, payload = res
                if status == "ok":
                    entry = {"key": key, "trajectory": idx, "record": payload}
                    jf.write(json.dumps(entry, sort_keys=True) + "\n")
                    jf.flush()
                    done[(key, idx)] = entry
                else:
                    failures.append({"key": key, "trajectory": idx, "error": payload})
                    log.error("trajectory %s #%d failed", key, idx)
            if workers == 1:
                for t in tasks:
                    consume(_run_task(t))
            else:
                with ProcessPoolExecutor(max_workers=workers) as ex:
                    for res in ex.map(_run_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))):
                        consume(res)
    write_outputs(manifest, configs, done, out)
    if failures:
        (out / "failures.json").write_text(json.dumps(failures, indent=1))
    return {"computed": len(tasks) - len(failures), "failures": failures,
            "total": len(done), "out": str(out)}


def write_outputs(manifest: RunManifest, configs, done: dict, out: Path):
    rows, agg_rows, points = [], [], {}
    for cfg in configs:
        key = point_key(cfg)
        recs = [TrajectoryRecord.from_json(done[(key, i)]["record"])
                for i in range(manifest.trajectories) if (key, i) in done]
        for rec in recs:
            rows.extend(record_rows(cfg, rec))
        if recs:
            agg = analysis.aggregate(recs)
            agg_rows.extend(aggregate_rows(cfg, agg))
            points[(cfg.N, cfg.p_s, cfg.p_u)] = agg
    write_rows(out / "rows.csv", rows)
    write_rows(out / "aggregate.csv", agg_rows)
    curves = {}
    names = sorted({k[0] for agg in points.values() for k in agg if not k[0].startswith("S[")})
    for pu in sorted({k[2] for k in points}):
        sub = {(L, ps): agg for (L, ps, u), agg in points.items() if u == pu}
        for name in names:
            cs = analysis.curves_from_points(sub, name)
            if cs:
                curves[f"{name}|p_u={pu!r}"] = [c.to_dict() for c in cs]
    (out / "curves.json").write_text(json.dumps(curves, indent=1, sort_keys=True))


# ---------------------------------------------------------------------------
# coupled oracle


def parse_regions(regions, n: int) -> list[tuple[int, int]]:
    """``all`` or ``a-b,c-d`` (1-based inclusive intervals)."""
    if regions in (None, "all"):
        return [(a, b) for a in range(1, n + 1) for b in range(a, n + 1)]
    if isinstance(regions, str):
        items = [s for s in regions.split(",") if s.strip()]
        regions = [tuple(int(v) for v in s.split("-")) for s in items]
    out = []
    for iv in regions:
        a, b = (iv[0], iv[-1])
        if not 1 <= a <= b <= n:
            raise ValueError(f"region {a}-{b} outside 1..{n}")
        out.append((int(a), int(b)))
    return out


def coupled_check(cfg: CircuitConfig, index: int, probe_every: int = 10, regions=None,
                  rank_every: int = 0, mutate: str | None = None) -> dict:
    """Tableau vs percolation on one event stream; returns counts and the first mismatch.

    ``mutate="skip_splits"`` disables the percolation split rule (used to
    check that the checker catches a broken oracle).
    """
    from .percolation import PercolationState, endpoint_pairs, run_percolation
    n = cfg.N
    rng = make_rng(cfg.seed_for(index))
    block = sample_phase(cfg, rng, cfg.t_equil)
    pblock = block
    if mutate == "skip_splits":
        from .circuits import EventBlock
        kinds = np.where(block.kinds == EventKind.SINGLE, EventKind.NOOP, block.kinds).astype(np.int8)
        pblock = EventBlock(kinds, block.sites, block.gates, block.bits)
    elif mutate is not None:
        raise ValueError(f"unknown mutation {mutate!r}")
    regs = parse_regions(regions, n)
    ra = np.array([a for a, _ in regs])
    rb = np.array([b for _, b in regs])
    tables = _pool_tables(cfg, None)
    st = StabilizerState.zero(n)
    ps = PercolationState.fresh(n)
    probes = mism = comps = 0
    first = None
    for pos in range(0, len(block), probe_every):
        stop = min(pos + probe_every, len(block))
        run_block(st, block, cfg, tables, pos, stop)
        run_percolation(ps, pblock, pos, stop)
        l1, r1 = clipped_endpoints(st)
        l2, r2 = endpoint_pairs(ps)
        T1 = contiguous_entropy_table(l1, r1, n)[ra, rb]
        T2 = contiguous_entropy_table(l2, r2, n)[ra, rb]
        if rank_every and probes % rank_every == 0:
            T1 = np.array([entanglement_entropy(st, range(a, b + 1)) for a, b in regs])
        bad = np.flatnonzero(T1 != T2)
        comps += len(regs)
        mism += bad.size
        if bad.size and first is None:
            j = bad[0]
            first = {"trajectory": index, "event_index": stop - 1, "region": list(regs[j]),
                     "tableau": int(T1[j]), "percolation": int(T2[j])}
        probes += 1
    return {"probes": probes, "comparisons": comps, "mismatches": mism, "first_failure": first}


def run_oracle_check(manifest: RunManifest, regions=None, mutate=None) -> dict:
    bad = [c for c in manifest.point_configs() if c.p_u != 0]
    if bad:
        raise ManifestError([f"grid[L={c.N}, p_s={c.p_s}, p_u={c.p_u}]: oracle requires p_u=0"
                             for c in bad])
    opts = manifest.oracle or {}
    regions = regions if regions is not None else opts.get("regions", "all")
    report = {"trajectories": 0, "probes": 0, "comparisons": 0, "mismatches": 0,
              "first_failure": None, "points": []}
    for cfg in manifest.point_configs():
        pt = {"key": point_key(cfg), "mismatches": 0}
        for i in range(manifest.trajectories):
            r = coupled_check(cfg, i, int(opts.get("probe_every", 10)), regions,
                              int(opts.get("rank_every", 0)), mutate)
            for k in ("probes", "comparisons", "mismatches"):
                report[k] += r[k]
            pt["mismatches"] += r["mismatches"]
            report["trajectories"] += 1
            if r["first_failure"] and report["first_failure"] is None:
                report["first_failure"] = dict(r["first_failure"], key=point_key(cfg))
        report["points"].append(pt)
    return report


# ---------------------------------------------------------------------------
# analysis passes over sweep output


def load_points(rows_path) -> dict:
    """{(L, p_s, p_u): {trajectory: {(observable, t): value}}} from a rows file."""
    pts: dict = {}
    for r in read_rows(rows_path):
        d = pts.setdefault((r["L"], r["p_s"], r["p_u"]), {}).setdefault(int(r["trajectory"]), {})
        d[(r["observable"], r["t"])] = r["value"]
    return pts


def _curves_from_rows(pts: dict, observable: str, p_u: float | None):
    by = {}
    for (L, ps, pu), trajs in sorted(pts.items()):
        if p_u is not None and pu != p_u:
            continue
        ts = sorted({t for tr in trajs.values() for (o, t) in tr if o == observable})
        if not ts:
            continue
        t = ts[-1]
        vals = [tr[(observable, t)] for _, tr in sorted(trajs.items()) if (observable, t) in tr]
        by.setdefault(L, []).append((ps, analysis.summarize(vals)))
    return [analysis.EntropyCurve("p_s", [p for p, _ in it], L, [s.mean for _, s in it],
                                  [s.stderr for _, s in it], [s.count for _, s in it], observable)
            for L, it in sorted(by.items())]


def run_collapse(rows_path, observable="S_topo", p_u=None, **kw):
    pts = load_points(rows_path)
    curves = _curves_from_rows(pts, observable, p_u)
    res = analysis.scaling_collapse(curves, **kw)
    return curves, res


def _profiles(trajs: dict, L: int):
    ts = sorted({t for tr in trajs.values() for (o, t) in tr if o == "S[1]"})
    if not ts:
        raise ValueError("no S(x) profile rows in input")
    t = ts[-1]
    return np.array([[tr[(f"S[{x}]", t)] for x in range(1, L)]
                     for _, tr in sorted(trajs.items()) if ("S[1]", t) in tr])


def _series(trajs: dict, name="S_half"):
    ts = sorted({t for tr in trajs.values() for (o, t) in tr if o == name})
    arr = np.array([[tr[(name, t)] for t in ts] for _, tr in sorted(trajs.items())
                    if all((name, t) in tr for t in ts)])
    return np.array(ts), arr


def run_fit(rows_path, L=None, p_s=None, p_u=None, x_min=4, window=None, n_boot=200,
            boot_seed=0) -> dict:
    pts = load_points(rows_path)
    keys = [k for k in sorted(pts) if (L is None or k[0] == L) and (p_s is None or k[1] == p_s)
            and (p_u is None or k[2] == p_u)]
    out = {}
    for k in keys:
        trajs = pts[k]
        res = {}
        try:
            prof = _profiles(trajs, k[0])
            res["profile"] = analysis.fit_profile_bootstrap(prof, k[0], x_min, n_boot, boot_seed).to_dict()
        except ValueError as exc:
            res["profile_error"] = str(exc)
        ts, ser = _series(trajs)
        if ts.size >= 3:
            w = tuple(window) if window else (2, k[0] // 8)
            try:
                res["time"] = analysis.fit_time_bootstrap(ser, ts, w, n_boot, boot_seed).to_dict()
            except ValueError as exc:
                res["time_error"] = str(exc)
        out[f"L={k[0]},p_s={k[1]!r},p_u={k[2]!r}"] = res
    return out


def tau_summary(rows_path) -> dict:
    pts = load_points(rows_path)
    summ = {}
    for (L, ps, pu), trajs in sorted(pts.items()):
        taus = [tr[k] for tr in trajs.values() for k in tr if k[0] == "tau_star"]
        cens = [tr[k] for tr in trajs.values() for k in tr if k[0] == "tau_censored"]
        st = analysis.summarize(taus)
        summ[f"L={L},p_s={ps!r},p_u={pu!r}"] = {"L": L, "p_s": ps, "p_u": pu, "mean": st.mean,
                                                  "stderr": st.stderr, "count": st.count,
                                                  "censored_fraction": float(np.mean(cens))}
    return summ


# ---------------------------------------------------------------------------
# plot data


@dataclass
class ProfileData:
    x: np.ndarray
    y: np.ndarray
    yerr: np.ndarray


def emit_plot_data(panels: dict, path) -> dict:
    """Write tab-separated (x, y, yerr[, L]) files per panel plus ``index.json``.

    ``panels`` maps a panel name to a list of EntropyCurve, a
    (curves, CollapseResult) pair, or a ProfileData.
    """
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, payload in sorted(panels.items()):
        files = []
        if isinstance(payload, ProfileData):
            f = out / f"{name}.tsv"
            with open(f, "w") as fh:
                fh.write("x\ty\tyerr\n")
                for a, b, e in zip(payload.x, payload.y, payload.yerr):
                    fh.write(f"{_fmt(a)}\t{_fmt(float(b))}\t{_fmt(float(e))}\n")
            files.append(f.name)
        elif isinstance(payload, tuple):
            curves, res = payload
            f = out / f"{name}.tsv"
            with open(f, "w") as fh:
                fh.write("x_scaled\ty\tyerr\tL\n")
                for row in analysis.collapsed_points(curves, res.p_c, res.nu):
                    fh.write("\t".join(_fmt(v) for v in row) + "\n")
            files.append(f.name)
        else:
            for c in payload:
                f = out / f"{name}_L{c.L}.tsv"
                with open(f, "w") as fh:
                    fh.write(f"{c.parameter}\ty\tyerr\n")
                    for a, b, e in zip(c.values, c.means, c.stderrs):
                        fh.write(f"{_fmt(float(a))}\t{_fmt(float(b))}\t{_fmt(float(e))}\n")
                files.append(f.name)
        index[name] = files
    doc = {"panels": index, "generated": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    (out / "index.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    return doc


def panels_from_results(results_dir) -> dict:
    """Collect plottable panels from a results directory (any missing pieces are skipped)."""
    d = Path(results_dir)
    panels = {}
    if (d / "curves.json").exists():
        cj = json.loads((d / "curves.json").read_text())
        for key, cs in sorted(cj.items()):
            name, pu = key.split("|")
            tag = f"{name}_vs_p_s_{pu.replace('=', '')}"
            panels[tag] = [analysis.EntropyCurve(c["parameter"], c["values"], c["L"], c["means"],
                                                 c["stderrs"], c["counts"], c["observable"])
                           for c in cs]
    if (d / "collapse.json").exists():
        cj = json.loads((d / "collapse.json").read_text())
        curves = [analysis.EntropyCurve(c["parameter"], c["values"], c["L"], c["means"],
                                        c["stderrs"], c["counts"], c["observable"])
                  for c in cj["curves"]]
        res = analysis.CollapseResult(**cj["result"])
        panels[f"{cj['observable']}_collapse"] = (curves, res)
    if (d / "rows.csv").exists():
        pts = load_points(d / "rows.csv")
        for (L, ps, pu), trajs in sorted(pts.items()):
            try:
                prof = _profiles(trajs, L)
            except ValueError:
                continue
            st = [analysis.summarize(prof[:, j]) for j in range(L - 1)]
            panels[f"profile_L{L}_p_s{ps!r}_p_u{pu!r}"] = ProfileData(
                np.arange(1, L), np.array([s.mean for s in st]), np.array([s.stderr for s in st]))
    return panels
