"""Command line entry point: ``sptmipt <command> --manifest run.yaml --out dir``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import sweep
from .sweep import (EXIT_FAILED, EXIT_IO, EXIT_MISMATCH, EXIT_OK, EXIT_VALIDATION, ManifestError,
                    RunManifest, parse_manifest)

log = logging.getLogger("sptmipt")

COMMAND_KIND = {"sweep": "sweep", "oracle": "oracle", "perc": "percolation", "tau": "tau"}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sptmipt", description="Symmetric measurement-only circuit "
                                 "simulations: tableau and percolation backends, sweeps and analysis.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, manifest_required=True):
        p.add_argument("--manifest", required=manifest_required, help="YAML run manifest")
        p.add_argument("--out", help="output directory (overrides the manifest)")
        return p

    for name, doc in (("sweep", "run a parameter sweep on the tableau backend"),
                      ("perc", "run a parameter sweep on the percolation backend"),
                      ("tau", "time-to-steady-state for the averaged channel")):
        p = common(sub.add_parser(name, help=doc))
        p.add_argument("--workers", type=int, help=f"worker processes (default ${sweep.WORKERS_ENV} or 1)")
        p.add_argument("--seed", type=lambda s: int(s, 0), help="override master_seed")
    p = common(sub.add_parser("oracle", help="coupled tableau vs percolation check"))
    p.add_argument("--seed", type=lambda s: int(s, 0), help="override master_seed")
    p.add_argument("--probe-regions", help="'all' or comma-separated intervals like 1-8,5-12")
    for name, doc in (("collapse", "finite-size scaling collapse of a sweep"),
                      ("fit", "logarithmic fits of profiles and half-chain growth"),
                      ("emit", "write plot-ready data files and an index")):
        p = common(sub.add_parser(name, help=doc), manifest_required=False)
        p.add_argument("--input", help="results directory of an earlier sweep")
        if name == "collapse":
            p.add_argument("--observable", default=None)
    return ap


def _out_dir(args, manifest: RunManifest | None) -> Path:
    out = args.out or (manifest.output if manifest else None)
    if not out:
        raise ManifestError(["output: required (set it in the manifest or pass --out)"])
    return Path(out)


def _load(args, kind: str | None):
    m = parse_manifest(args.manifest)
    if kind and m.kind != kind:
        raise ManifestError([f"kind: this command needs kind={kind}, got {m.kind}"])
    if getattr(args, "seed", None) is not None:
        m = replace(m, master_seed=args.seed)
    return m


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=float))


def _analysis_opts(args):
    if args.manifest:
        m = parse_manifest(args.manifest)
        return m, dict(m.analysis)
    return None, {}


def cmd_run(args) -> int:
    m = _load(args, COMMAND_KIND[args.command])
    out = _out_dir(args, m)
    res = sweep.run_sweep(m, out, args.workers)
    if m.kind == "tau":
        _write_json(out / "tau.json", sweep.tau_summary(out / "rows.csv"))
    print(f"{res['computed']} trajectories computed, {res['total']} in journal -> {out}")
    if res["failures"]:
        for f in res["failures"]:
            print(f"FAILED {f['key']} #{f['trajectory']}: {f['error'].strip().splitlines()[-1]}",
                  file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_oracle(args) -> int:
    m = _load(args, "oracle")
    rep = sweep.run_oracle_check(m, regions=args.probe_regions)
    out = args.out or m.output
    if out:
        _write_json(Path(out) / "oracle.json", rep)
    print(f"{rep['trajectories']} trajectories, {rep['comparisons']} comparisons, "
          f"{rep['mismatches']} mismatches")
    if rep["mismatches"]:
        ff = rep["first_failure"]
        print(f"first mismatch: {ff['key']} trajectory {ff['trajectory']} event {ff['event_index']} "
              f"region {ff['region']}: tableau {ff['tableau']} vs percolation {ff['percolation']}",
              file=sys.stderr)
        return EXIT_MISMATCH
    return EXIT_OK


def _input_dir(args, opts) -> Path:
    src = args.input or opts.get("input")
    if not src:
        raise ManifestError(["analysis.input: required (or pass --input)"])
    return Path(src)


def cmd_collapse(args) -> int:
    m, opts = _analysis_opts(args)
    src = _input_dir(args, opts)
    obs = args.observable or opts.get("observable", "S_topo")
    curves, res = sweep.run_collapse(src / "rows.csv", obs, opts.get("p_u"))
    out = Path(args.out or (m.output if m and m.output else src))
    _write_json(out / "collapse.json", {"observable": obs, "result": res.to_dict(),
                                       "curves": [c.to_dict() for c in curves]})
    print(f"p_c = {res.p_c:.4f} +- {res.p_c_err:.4f}, nu = {res.nu:.3f} +- {res.nu_err:.3f}")
    return EXIT_OK


def cmd_fit(args) -> int:
    m, opts = _analysis_opts(args)
    src = _input_dir(args, opts)
    res = sweep.run_fit(src / "rows.csv", opts.get("L"), opts.get("p_s"), opts.get("p_u"),
                        opts.get("x_min", 4), opts.get("window"), opts.get("n_boot", 200),
                        opts.get("boot_seed", 0))
    out = Path(args.out or (m.output if m and m.output else src))
    _write_json(out / "fit.json", res)
    for k, v in res.items():
        for which in ("profile", "time"):
            if which in v:
                f = v[which]
                print(f"{k} {which}: slope {f['slope']:.4f} +- {f['slope_err']:.4f}")
    return EXIT_OK


def cmd_emit(args) -> int:
    m, opts = _analysis_opts(args)
    src = _input_dir(args, opts)
    out = Path(args.out or (m.output if m and m.output else src / "plot"))
    doc = sweep.emit_plot_data(sweep.panels_from_results(src), out)
    print(f"{sum(len(v) for v in doc['panels'].values())} data files -> {out}")
    return EXIT_OK


HANDLERS = {"sweep": cmd_run, "perc": cmd_run, "tau": cmd_run, "oracle": cmd_oracle,
            "collapse": cmd_collapse, "fit": cmd_fit, "emit": cmd_emit}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return HANDLERS[args.command](args)
    except ManifestError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
