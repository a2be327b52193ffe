"""Acceptance criteria, each at its stated scale and tolerance.

Every test prints one PASS/FAIL line; the lines are repeated in the pytest
terminal summary.  Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""
import json
import math
import time

import numpy as np
import pytest

from treeroute import cli
from treeroute.builders import build_gabriel, build_mst, rgg_components
from treeroute.geometry import Window, sample_poisson
from treeroute.network import centroid, route_hops, route_length

from conftest import bfs_route, random_points, random_tree, record_acceptance
from test_builders import bfs_components, edge_set, gabriel_scan, kruskal_complete
from test_network import exhaustive_centroid

pytestmark = pytest.mark.slow


def run_experiment(name, tmp_path, **given):
    t0 = time.perf_counter()
    out = cli.execute(name, {k: v for k, v in given.items()}, tmp_path / name, threads=1)
    summary = json.loads((out / cli.SUMMARY).read_text())
    return out, summary, time.perf_counter() - t0


def test_criterion_01_lemma_red(tmp_path):
    _, s, dt = run_experiment("lemma-red", tmp_path, m="15,25", trials="200", seed=1)
    ratios = ", ".join(f"m={m} min/0.088m^4={r:.3f}" for m, r in s["min_ratio"].items())
    ok = s["trials"] >= 200 and s["violations"] == 0
    assert record_acceptance(1, ok, f"{s['trials']} trials, {s['violations']} violations, {ratios}", dt, 120)


def test_criterion_02_exact_cross_check(tmp_path):
    _, s, dt = run_experiment("lemma-green", tmp_path, q="0.05", k="", circuit_q="", exact_check="true",
                              seed=2)
    ok = s["exact_mismatches"] == 0 and s["exact_empty_at_least_half_k"]
    detail = (f"150 random removed sets at k=4: {s['exact_mismatches']} mismatches; "
              f"empty-grid minimum {s['exact_empty_min']} >= 2")
    assert record_acceptance(2, ok, detail, dt, 300)


def test_criterion_03_conservation(tmp_path):
    _, s, dt = run_experiment("contours", tmp_path, k="4,8,16", count="1000", seed=3)
    ok = s["colorings"] == 3000 and s["conservation_failures"] == 0
    assert record_acceptance(3, ok, f"{s['colorings']} colourings, {s['conservation_failures']} failures", dt, 30)


def test_criterion_04_lemma_green_trend(tmp_path):
    _, s, dt = run_experiment("lemma-green", tmp_path, q="0.05", k="8,16,32,64", trials="200", circuit_q="",
                              exact_check="false", seed=4)
    rates = ", ".join(f"k={k}: {p:.3f}" for k, p in zip(s["k"], s["p_hat"]))
    ok = s["non_increasing"] and s["p_hat"][-1] < 0.1
    assert record_acceptance(4, ok, f"failure rates {rates}", dt, 600)


def test_criterion_05_zero_cost_monotone(tmp_path):
    _, s, dt = run_experiment("lemma-green", tmp_path, q="0.05", k="", circuit_q="0.4,0.2,0.1,0.05",
                              max_len="20", circuit_trials="10000", exact_check="false", seed=5)
    rates = ", ".join(f"{p:.4f}" for p in s["circuit_p_hat"])
    ok = s["circuit_strictly_decreasing"]
    assert record_acceptance(5, ok, f"q=0.4..0.05 -> {rates} (Wilson CIs disjoint: {ok})", dt, 120)


def test_criterion_06_small_r_finiteness(tmp_path):
    t0 = time.perf_counter()
    means = {}
    for side in (500, 1000):
        _, s, _ = run_experiment("rho", tmp_path / str(side), model="mst", window=str(side), bins="0.45,0.55",
                                 cap="none", replicates="3", seed=6)
        means[side] = s["mean_route"][0]
    rel = abs(means[1000] - means[500]) / means[500]
    ps = sample_poisson(1.0, Window(0, 0, 50), 6)
    comp = rgg_components(ps, 0.5)
    tree = build_mst(ps)
    checked = bad = 0
    for lab in np.flatnonzero(comp.sizes > 1):
        mem = np.flatnonzero(comp.labels == lab)
        iu, ju = np.triu_indices(len(mem), 1)
        d = route_length(tree, mem[iu], mem[ju])
        bad += int(np.sum(d > 0.5 * comp.sizes[lab] * (1 + 1e-12)))
        checked += len(d)
    dt = time.perf_counter() - t0
    ok = rel < 0.10 and bad == 0 and checked > 0
    detail = (f"rho(0.5) {means[500]:.4f} (500^2) vs {means[1000]:.4f} (1000^2), rel diff {rel:.4f}; "
              f"MST bound on {checked} RGG pairs, {bad} violations")
    assert record_acceptance(6, ok, detail, dt, 600)


def test_criterion_07_tree_tail_divergence(tmp_path):
    t0 = time.perf_counter()
    parts, ok = [], True
    for model in ("mst", "rain"):
        _, s, _ = run_experiment("scaling", tmp_path / model, model=model, r="10", sides="250,500,1000",
                                 replicates="3", seed=7)
        good = s["strictly_increasing"] and s["ci_separated"]
        ok &= good
        cis = "; ".join(f"{m:.1f} [{a:.1f}, {b:.1f}]" for m, (a, b) in zip(s["means"], s["ci"]))
        parts.append(f"{model}: {cis} -> {'ok' if good else 'not separated'}")
    _, s, _ = run_experiment("scaling", tmp_path / "gabriel", model="gabriel", r="10", sides="250,500,1000",
                             replicates="3", seed=7)
    ok &= s["last_relative_change"] < 0.15
    parts.append(f"gabriel: means {', '.join(f'{m:.2f}' for m in s['means'])}, "
                 f"last change {100 * s['last_relative_change']:.1f}%")
    dt = time.perf_counter() - t0
    assert record_acceptance(7, ok, " | ".join(parts), dt, 1800)


def test_criterion_08_tail_shape(tmp_path):
    _, s, dt = run_experiment("tail", tmp_path, model="mst", window="1000", r="10", cap="none",
                              fit_range="50,100", seed=8)
    f = s["fit"]
    ok = "slope" in f and -1.6 <= f["slope"] <= -0.7
    detail = f"slope {f.get('slope', float('nan')):.3f} +/- {f.get('se', float('nan')):.3f} on d in [50, 100], band [-1.6, -0.7]"
    assert record_acceptance(8, ok, detail, dt, 900)


def test_criterion_09_oracle_suite():
    t0 = time.perf_counter()
    checks = {}
    ps = random_points(1500, math.sqrt(1500), 9)
    checks["MST vs complete Kruskal (n=1500)"] = edge_set(build_mst(ps)) == kruskal_complete(ps.points)
    t = random_tree(400, 9)
    rng = np.random.default_rng(9)
    u, v = rng.integers(0, 400, 1000), rng.integers(0, 400, 1000)
    d, h = route_length(t, u, v), route_hops(t, u, v)
    bfs = [bfs_route(t, a, b) for a, b in zip(u, v)]
    checks["route_length vs BFS (10^3 queries)"] = bool(
        np.allclose(d, [x for x, _ in bfs], rtol=1e-12, atol=1e-12) and np.array_equal(h, [y for _, y in bfs]))
    ps = random_points(800, math.sqrt(800), 10)
    checks["Gabriel vs definition scan (n=800)"] = edge_set(build_gabriel(ps)) == gabriel_scan(ps.points)
    ps = random_points(1000, 25.0, 11)
    checks["RGG components vs BFS"] = bool(np.array_equal(rgg_components(ps, 0.7).labels,
                                                          bfs_components(ps.points, 0.7)))
    cen = True
    for seed in range(5):
        tt = random_tree(300, 100 + seed)
        cen &= centroid(tt) == exhaustive_centroid(tt)[0]
    checks["centroid vs exhaustive scan"] = cen
    dt = time.perf_counter() - t0
    ok = all(checks.values())
    detail = "; ".join(f"{k}: {'exact' if v else 'MISMATCH'}" for k, v in checks.items())
    assert record_acceptance(9, ok, detail, dt, 300)


DETERMINISM = {
    "rho": {"model": "mst", "window": "120", "bins": "0,0.5,1,2", "replicates": "3"},
    "tail": {"model": "gabriel", "window": "80", "r": "5"},
    "scaling": {"model": "mst", "r": "5", "sides": "40,60,80", "replicates": "3", "cap": "2000"},
    "lemma-red": {"trials": "10"},
    "lemma-green": {"q": "0.05", "k": "4,8,16", "trials": "20", "circuit_trials": "500"},
    "contours": {"count": "50"},
    "lemma7": {"model": "rain", "m": "10", "k": "8"},
    "rgg": {"window": "40"},
    "rain-check": {"window": "40"},
}


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    bad = []
    for name, given in DETERMINISM.items():
        out = cli.execute(name, dict(given, seed="10"), tmp_path / name, threads=1)
        for th in (1, 8):
            again, diff = cli.rerun(out / cli.MANIFEST, tmp_path / f"{name}-t{th}", threads=th)
            same = (out / cli.MANIFEST).read_bytes() == (again / cli.MANIFEST).read_bytes()
            if diff or not same:
                bad.append(f"{name}@{th}")
    dt = time.perf_counter() - t0
    detail = f"{len(DETERMINISM)} experiments rerun at 1 and 8 threads; differing: {', '.join(bad) or 'none'}"
    assert record_acceptance(10, not bad, detail, dt, None)


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(pytest.main([__file__, "-v", "-s"]))
