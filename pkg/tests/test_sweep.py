import json
import os
import signal
import subprocess
import sys
import time
from pathlib import Path

import pytest
import yaml

from sptmipt import sweep
from sptmipt.sweep import (ManifestError, ProfileData, coupled_check, emit_plot_data, panels_from_results,
                           parse_manifest, parse_regions, read_journal, read_rows, run_collapse,
                           run_oracle_check, run_sweep, validate_manifest, write_rows)

MINIMAL = {"kind": "sweep", "L": [16], "p_s": [0.5], "p_u": [0], "trajectories": 10}


def manifest(**kw):
    raw = dict(MINIMAL)
    raw.update(kw)
    return validate_manifest(raw)


def problems(raw):
    with pytest.raises(ManifestError) as ei:
        validate_manifest(raw)
    return ei.value.problems


def snapshot(d):
    return {f: (Path(d) / f).read_bytes() for f in ("rows.csv", "aggregate.csv", "curves.json")}


# ---------------------------------------------------------------------------
# manifests


def test_minimal_manifest_valid(tmp_path):
    m = validate_manifest(MINIMAL)
    assert m.kind == "sweep" and m.trajectories == 10 and len(m.point_configs()) == 1
    p = tmp_path / "m.yaml"
    p.write_text(yaml.safe_dump(MINIMAL))
    assert parse_manifest(p) == m


def test_constraint_violations_listed():
    ps = problems(dict(MINIMAL, p_s=[0.7], p_u=[0.5]))
    assert len(ps) == 1 and "p_s+p_u>1" in ps[0] and ps[0].startswith("grid[")
    ps = problems(dict(MINIMAL, p_u=[0.1], config={"schedule": "layered"}))
    assert any("layered" in p for p in ps)


def test_unknown_keys_with_paths():
    ps = problems(dict(MINIMAL, colour=1, config={"basis": "X"}, probes={"evry": 3},
                       p_s=[0.7], p_u=[0.5]))
    assert "colour: unknown key" in ps
    assert "config.basis: unknown key" in ps
    assert "probes.evry: unknown key" in ps
    assert any("p_s+p_u>1" in p for p in ps)


def test_other_violations():
    ps = problems({"kind": "nope", "L": [15], "p_s": ["a"], "trajectories": 0, "master_seed": -1,
                   "backend": "gpu", "probes": {"observables": ["S_bogus"]}})
    for frag in ("kind:", "L[0]:", "p_s[0]:", "trajectories:", "master_seed:",
                 "backend:", "probes.observables[0]:"):
        assert any(p.startswith(frag) for p in ps), frag
    assert "p_u: required" in problems({k: v for k, v in MINIMAL.items() if k != "p_u"})
    assert any("S_topo" in p for p in problems(dict(MINIMAL, L=[18])))
    assert any("requires p_u=0" in p for p in problems(dict(MINIMAL, kind="oracle", p_u=[0.2])))
    with pytest.raises(ManifestError):
        validate_manifest([1, 2])


def test_parse_manifest_io_and_yaml_errors(tmp_path):
    with pytest.raises(OSError):
        parse_manifest(tmp_path / "missing.yaml")
    p = tmp_path / "bad.yaml"
    p.write_text("kind: [sweep\n")
    with pytest.raises(ManifestError):
        parse_manifest(p)


def test_parse_regions():
    assert parse_regions("1-4,3-8", 8) == [(1, 4), (3, 8)]
    assert len(parse_regions("all", 4)) == 10
    with pytest.raises(ValueError):
        parse_regions("0-3", 8)


# ---------------------------------------------------------------------------
# rows and journal


def test_rows_roundtrip_and_version(tmp_path):
    p = tmp_path / "r.csv"
    write_rows(p, [[0.5, 0.0, 16, 4, "S_topo", 0, 2, "0/ab/cd"], [0.5, 0.0, 16, 4, "S_topo", "agg", 1.5, "0/ab"]])
    rows = read_rows(p)
    assert rows[0]["value"] == 2.0 and rows[1]["trajectory"] == "agg" and rows[0]["L"] == 16
    p.write_text(p.read_text().replace("v1", "v9"))
    with pytest.raises(ValueError):
        read_rows(p)


def test_journal_drops_torn_line(tmp_path):
    p = tmp_path / "j.jsonl"
    p.write_text('{"a": 1}\n{"a": 2}\n{"a": 3')
    assert read_journal(p) == [{"a": 1}, {"a": 2}]
    assert p.read_text() == '{"a": 1}\n{"a": 2}\n'


# ---------------------------------------------------------------------------
# sweeps


def small_manifest(**kw):
    return manifest(L=[16, 32], p_s=[0.3, 0.6], trajectories=6, **kw)


def test_rerun_is_idempotent(tmp_path):
    m = small_manifest()
    r1 = run_sweep(m, tmp_path, 1)
    assert r1["computed"] == 24 and not r1["failures"]
    s1 = snapshot(tmp_path)
    r2 = run_sweep(m, tmp_path, 1)
    assert r2["computed"] == 0 and snapshot(tmp_path) == s1
    rows = read_rows(tmp_path / "rows.csv")
    assert {r["L"] for r in rows} == {16, 32}
    curves = json.loads((tmp_path / "curves.json").read_text())
    assert "S_topo|p_u=0.0" in curves


def test_worker_count_does_not_change_output(tmp_path):
    m = small_manifest()
    run_sweep(m, tmp_path / "a", 1)
    run_sweep(m, tmp_path / "b", 3)
    assert snapshot(tmp_path / "a") == snapshot(tmp_path / "b")


def test_resume_after_truncated_journal(tmp_path):
    m = small_manifest()
    run_sweep(m, tmp_path / "full", 1)
    part = tmp_path / "part"
    part.mkdir()
    lines = (tmp_path / "full" / "journal.jsonl").read_text().splitlines(keepends=True)
    (part / "journal.jsonl").write_text("".join(lines[:9]) + lines[9][: len(lines[9]) // 2])
    r = run_sweep(m, part, 1)
    assert r["computed"] == 24 - 9
    assert snapshot(part) == snapshot(tmp_path / "full")


def test_resume_after_sigkill(tmp_path):
    raw = dict(MINIMAL, L=[32, 64], p_s=[0.3, 0.5], trajectories=15, output=str(tmp_path / "k"))
    mf = tmp_path / "m.yaml"
    mf.write_text(yaml.safe_dump(raw))
    run_sweep(validate_manifest(dict(raw)), tmp_path / "ref", 1)
    cmd = [sys.executable, "-m", "sptmipt.cli", "sweep", "--manifest", str(mf)]
    proc = subprocess.Popen(cmd, stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    journal = tmp_path / "k" / "journal.jsonl"
    deadline = time.time() + 60
    while time.time() < deadline and proc.poll() is None:
        if journal.exists() and journal.stat().st_size > 0:
            break
        time.sleep(0.01)
    if proc.poll() is None:
        os.kill(proc.pid, signal.SIGKILL)
    proc.wait()
    assert subprocess.run(cmd, capture_output=True).returncode == 0
    assert snapshot(tmp_path / "k") == snapshot(tmp_path / "ref")


def test_trajectory_failure_isolated(tmp_path, monkeypatch):
    real = sweep.run_trajectory

    def flaky(cfg, index, *a, **kw):
        if index == 2:
            raise RuntimeError("boom")
        return real(cfg, index, *a, **kw)

    monkeypatch.setattr(sweep, "run_trajectory", flaky)
    r = run_sweep(manifest(trajectories=4), tmp_path, 1)
    assert len(r["failures"]) == 1 and r["failures"][0]["trajectory"] == 2
    assert "boom" in r["failures"][0]["error"]
    assert r["computed"] == 3 and (tmp_path / "failures.json").exists()
    monkeypatch.undo()
    r = run_sweep(manifest(trajectories=4), tmp_path, 1)
    assert r["computed"] == 1 and not r["failures"]


def test_percolation_and_tau_sweeps(tmp_path):
    m = manifest(kind="percolation", L=[16, 32], p_s=[0.4, 0.5, 0.6], trajectories=20)
    run_sweep(m, tmp_path / "p", 1)
    m2 = manifest(kind="sweep", L=[16, 32], p_s=[0.4, 0.5, 0.6], trajectories=20, backend="percolation")
    run_sweep(m2, tmp_path / "p2", 1)
    assert snapshot(tmp_path / "p") == snapshot(tmp_path / "p2")
    tm = manifest(kind="tau", L=[16], p_s=[0.5], p_u=[0.0, 0.3], trajectories=5,
                  probes={"observables": ["S_half"]})
    run_sweep(tm, tmp_path / "t", 1)
    summ = sweep.tau_summary(tmp_path / "t" / "rows.csv")
    assert len(summ) == 2 and all(v["censored_fraction"] == 0 for v in summ.values())


def test_collapse_and_fit_passes(tmp_path):
    m = manifest(kind="percolation", L=[16, 32, 64], p_s=[0.3, 0.4, 0.5, 0.6, 0.7], trajectories=40,
                 probes={"observables": ["S_topo", "S_half", "profile"]})
    run_sweep(m, tmp_path, 1)
    curves, res = run_collapse(tmp_path / "rows.csv", "S_topo")
    assert len(curves) == 3 and 0.3 < res.p_c < 0.7
    fit = sweep.run_fit(tmp_path / "rows.csv", L=64, p_s=0.5, n_boot=20)
    (key, v), = fit.items()
    assert "profile" in v and v["profile"]["slope"] > 0


# ---------------------------------------------------------------------------
# oracle


def test_oracle_check_clean_and_mutated():
    m = manifest(kind="oracle", L=[16], p_s=[0.5], trajectories=5)
    rep = run_oracle_check(m)
    assert rep["mismatches"] == 0 and rep["comparisons"] > 0 and rep["first_failure"] is None
    bad = run_oracle_check(m, mutate="skip_splits")
    assert bad["mismatches"] > 0 and bad["first_failure"]["trajectory"] == 0
    assert 0 <= bad["first_failure"]["event_index"] < 16 * 16 * 4
    r = coupled_check(m.point_configs()[0], 0, probe_every=5, regions="1-8,9-16", rank_every=3)
    assert r["mismatches"] == 0 and r["comparisons"] == 2 * r["probes"]
    with pytest.raises(ManifestError):
        run_oracle_check(manifest(L=[16], p_u=[0.2]))


# ---------------------------------------------------------------------------
# plot data


def test_emit_plot_data(tmp_path):
    from sptmipt.analysis import EntropyCurve, scaling_collapse
    import numpy as np
    curves = [EntropyCurve("p_s", [0.4, 0.5, 0.6], L, [1.5 - 0.01 * L, 1.0, 0.5 + 0.01 * L],
                           [0.05] * 3, [10] * 3) for L in (8, 16, 32)]
    res = scaling_collapse(curves)
    prof = ProfileData(np.arange(1, 16), np.ones(15), np.zeros(15))
    doc = emit_plot_data({"c": (curves, res), "prof": prof, "curves": curves}, tmp_path / "o")
    lines = (tmp_path / "o" / "c.tsv").read_text().splitlines()
    assert lines[0] == "x_scaled\ty\tyerr\tL" and len(lines) == 1 + 9
    assert len((tmp_path / "o" / "prof.tsv").read_text().splitlines()) == 1 + 15
    assert doc["panels"]["curves"] == ["curves_L8.tsv", "curves_L16.tsv", "curves_L32.tsv"]
    empty = emit_plot_data({}, tmp_path / "e")
    assert empty["panels"] == {} and sorted(os.listdir(tmp_path / "e")) == ["index.json"]


def test_panels_from_results(tmp_path):
    m = manifest(kind="percolation", L=[16], p_s=[0.4, 0.6], trajectories=5,
                 probes={"observables": ["S_topo", "profile"]})
    run_sweep(m, tmp_path, 1)
    panels = panels_from_results(tmp_path)
    profs = [v for v in panels.values() if isinstance(v, ProfileData)]
    assert len(profs) == 2 and all(p.x.size == 15 for p in profs)
    assert any(k.startswith("S_topo_vs_p_s") for k in panels)
