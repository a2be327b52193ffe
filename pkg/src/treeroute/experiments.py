"""Experiment definitions: parameters, derived seeds, execution and artifacts.

Every experiment is a pure function of its resolved parameters and derived
seeds.  Artifacts are returned as text so the driver can hash and write them
atomically; floats in CSV use 17 significant digits.
"""
from __future__ import annotations

import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .seeds import derive_seed

MODELS = ("mst", "rain", "comb", "gabriel")
TREE_MODELS = ("mst", "rain", "comb")


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# parameter parsing


class ConfigError(ValueError):
    pass


def _floats(s):
    if isinstance(s, (list, tuple)):
        return [float(v) for v in s]
    return [float(v) for v in str(s).split(",") if v.strip()]


def _ints(s):
    if isinstance(s, (list, tuple)):
        return [int(v) for v in s]
    return [int(v) for v in str(s).split(",") if v.strip()]


def _opt_int(s):
    if s is None or str(s).lower() in ("none", "inf", "all", ""):
        return None
    return int(float(s))


def _opt_float(s):
    if s is None or str(s).lower() in ("none", ""):
        return None
    return float(s)


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _model(s):
    if s not in MODELS:
        raise ValueError(f"model must be one of {', '.join(MODELS)}")
    return s


@dataclass
class Param:
    name: str
    parse: Callable
    default: object = None
    required: bool = False
    help: str = ""
    choices: tuple | None = None


@dataclass
class Experiment:
    name: str
    help: str
    params: list
    run: Callable  # (params, seeds, threads) -> (artifacts, summary)
    plan: Callable  # params -> {label: seed}
    notes: list = field(default_factory=list)

    def resolve(self, given: dict) -> dict:
        known = {p.name for p in self.params} | {"seed"}
        for key in given:
            if key not in known:
                raise ConfigError(f"unknown parameter '{key}' for {self.name}")
        try:
            out = {"seed": int(given["seed"]) if given.get("seed") is not None else 0}
        except (TypeError, ValueError):
            raise ConfigError(f"invalid seed {given['seed']!r}") from None
        for p in self.params:
            if p.name not in given:
                if p.required:
                    raise ConfigError(f"missing required parameter '{p.name}' for {self.name}")
                out[p.name] = p.default
                continue
            raw = given[p.name]
            try:
                out[p.name] = raw if raw is None else p.parse(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid value for '{p.name}': {exc}") from None
        return out


# ---------------------------------------------------------------------------
# route statistics


def _build(model, side, seed, intensity):
    from .estimators import build_model

    return build_model(model, side, seed, intensity)


def _parallel(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def _replicate_plan(p, tag):
    reps = 1 if p["model"] == "comb" else p["replicates"]
    return {f"{tag}/rep{i}": derive_seed(p["seed"], tag, p["model"], p["window"], i) for i in range(reps)}


def run_rho(p, seeds, threads):
    from .estimators import _mean_se, pair_route_stats

    edges = np.asarray(p["bins"], dtype=float)
    side = p["window"]
    margin = 0.1 * side if p["margin"] is None else p["margin"]

    def task(label):
        s = seeds[label]
        net = _build(p["model"], side, s, p["intensity"])
        return pair_route_stats(net, edges, cap=p["cap"], margin=margin, seed=s)

    labels = sorted(seeds)
    res = _parallel(task, labels, threads)
    n = sum(r.counts for r in res)
    s1 = sum(r.sums for r in res)
    s2 = sum(r.sumsq for r in res)
    totals = sum(r.totals for r in res)
    mean, se = _mean_se(n, s1, s2)
    centers = 0.5 * (edges[:-1] + edges[1:])
    rows = []
    for c, mu, k, e in zip(centers, mean, n, se):
        rows.append([c, mu if k else "", k, e if k > 1 else ""])
    per_rep = [[lab] + [r.sums[b] / r.counts[b] if r.counts[b] else float("nan") for b in range(len(centers))]
               for lab, r in zip(labels, res)]
    summary = {"bins": edges, "mean_route": mean, "pairs": n, "qualifying_pairs": totals, "se": se,
               "per_replicate": per_rep, "margin": margin}
    return {"rho.csv": csv_text(["r_bin", "mean_route", "pairs", "se"], rows)}, summary


def run_tail(p, seeds, threads):
    from .estimators import InsufficientPointsError, estimate_tail, fit_tail_exponent, geometric_grid

    side, r = p["window"], p["r"]
    margin = 0.1 * side if p["margin"] is None else p["margin"]
    dgrid = np.asarray(p["d_grid"]) if p["d_grid"] else geometric_grid(r, side)
    (label,) = seeds
    s = seeds[label]
    net = _build(p["model"], side, s, p["intensity"])
    te = estimate_tail(net, r, d_grid=dgrid, cap=p["cap"], margin=margin, seed=s, model=p["model"])
    lo, hi = p["fit_range"] if p["fit_range"] else (5 * r, 10 * r)
    try:
        fit = fit_tail_exponent(te, (lo, hi))
        fit_d = {"slope": fit.slope, "intercept": fit.intercept, "se": fit.se, "r2": fit.r2,
                 "points": fit.npoints, "d_range": [lo, hi]}
    except InsufficientPointsError as exc:
        fit_d = {"error": str(exc), "d_range": [lo, hi]}
    rows = [[d, c, a, b, te.pairs] for d, c, a, b in zip(te.d, te.chi, te.lo, te.hi)]
    summary = {"pairs": te.pairs, "qualifying_pairs": te.total, "mean_route": te.mean_route,
               "se_route": te.se_route, "fit": fit_d, "margin": margin,
               "chi_monotone": bool(np.all(np.diff(te.chi) <= 0))}
    return {"tail.csv": csv_text(["d", "chi", "lo", "hi", "pairs"], rows)}, summary


def _scaling_plan(p):
    reps = 1 if p["model"] == "comb" else p["replicates"]
    return {f"scaling/{fmt(side)}/rep{i}": derive_seed(p["seed"], "scaling", p["model"], float(side), i)
            for side in p["sides"] for i in range(reps)}


def run_scaling(p, seeds, threads):
    from .estimators import window_scaling_study

    cap = p["cap"]
    if cap == "auto":
        cap = None if p["model"] in TREE_MODELS else 100_000
    fn = lambda side, rep: seeds[f"scaling/{fmt(side)}/rep{rep}"]  # noqa: E731
    res = window_scaling_study(p["model"], p["r"], p["sides"], p["replicates"], p["seed"], cap=cap,
                               margin_frac=p["margin_frac"], intensity=p["intensity"],
                               threads=threads, seed_fn=fn)
    rows = [[row.side, row.mean, row.ci_lo, row.ci_hi, row.sd, row.replicates, row.pairs]
            for row in res.rows]
    tail_rows = []
    for side, te in res.tails.items():
        for d, c, a, b in zip(te.d, te.chi, te.lo, te.hi):
            tail_rows.append([side, d, c, a, b, te.pairs])
    means = res.means()
    inc = bool(np.all(np.diff(means) > 0))
    sep = all(b.ci_lo > a.ci_hi for a, b in zip(res.rows, res.rows[1:]))
    last = abs(means[-1] - means[-2]) / means[-2] if len(means) >= 2 else float("nan")
    summary = {"model": p["model"], "r": p["r"], "cap": cap, "means": means,
               "ci": [[row.ci_lo, row.ci_hi] for row in res.rows],
               "replicate_means": [row.replicate_means for row in res.rows],
               "strictly_increasing": inc, "ci_separated": sep, "last_relative_change": last}
    if p["model"] == "comb":
        sides = np.asarray(p["sides"])
        fit = np.polyfit(sides, means, 1)
        pred = np.polyval(fit, sides)
        ss = float(np.sum((means - means.mean()) ** 2))
        summary["linear_r2"] = 1 - float(np.sum((means - pred) ** 2)) / ss if ss > 0 else float("nan")
    return {"scaling.csv": csv_text(["side", "mean_route", "ci_lo", "ci_hi", "sd", "replicates", "pairs"], rows),
            "scaling_tails.csv": csv_text(["side", "d", "chi", "lo", "hi", "pairs"], tail_rows)}, summary


# ---------------------------------------------------------------------------
# combinatorics


def _red_plan(p):
    return {f"lemma-red/{fmt(m)}/{t}": derive_seed(p["seed"], "lemma-red", float(m), t)
            for m in p["m"] for t in range(p["trials"])}


def lemma_red_trial(m, seed):
    from .lemma_lab.balance import (adversarial_coloring, count_bichromatic_pairs, is_balanced,
                                    lemma_red_hypothesis, sample_balanced, sliding_square_witness)
    from .seeds import rng_for

    s1 = sample_balanced(m, derive_seed(seed, "S1"))
    s2 = sample_balanced(m, derive_seed(seed, "S2"), x0=m)
    pts = np.concatenate([s1, s2])
    assert is_balanced(s1, m).balanced and is_balanced(s2, m, x0=m).balanced
    rng = rng_for(derive_seed(seed, "colour"))
    for _ in range(1000):
        blue, family = adversarial_coloring(pts, m, rng)
        if lemma_red_hypothesis(pts, blue, m):
            break
    else:  # pragma: no cover - every family reaches the hypothesis quickly
        raise RuntimeError("no admissible colouring drawn")
    pairs = count_bichromatic_pairs(pts, blue, math.sqrt(2) * m)
    w = sliding_square_witness(pts, blue, m)
    b1 = int(blue[: len(s1)].sum())
    b2 = int(blue[len(s1):].sum())
    return family, b1, b2, -1 if w is None else w.i, pairs


def run_lemma_red(p, seeds, threads):
    labels = sorted(seeds, key=lambda s: (float(s.split("/")[1]), int(s.split("/")[2])))
    items = [(float(lab.split("/")[1]), seeds[lab]) for lab in labels]
    res = _parallel(lambda it: lemma_red_trial(*it), items, threads)
    rows, ratios, viol, missing = [], {}, 0, 0
    for (m, _), lab, (family, b1, b2, wi, pairs) in zip(items, labels, res):
        thr = 0.088 * m ** 4
        ok = pairs >= thr
        viol += not ok
        missing += wi < 0
        ratios.setdefault(m, []).append(pairs / thr)
        rows.append([m, int(lab.split("/")[2]), family, b1, b2, wi, pairs, thr, ok])
    summary = {"trials": len(rows), "violations": viol, "witness_missing": missing,
               "min_ratio": {fmt(m): min(v) for m, v in ratios.items()},
               "min_pairs_vs_threshold": {fmt(m): [min(v) * 0.088 * m ** 4, 0.088 * m ** 4]
                                          for m, v in ratios.items()}}
    header = ["m", "trial", "family", "blue_s1", "blue_s2", "witness_i", "pairs", "threshold", "ok"]
    return {"lemma_red.csv": csv_text(header, rows)}, summary


def _green_plan(p):
    out = {"lemma-green": p["seed"]}
    if p["exact_check"]:
        out["lemma-green/exact-check"] = derive_seed(p["seed"], "exact-check")
    return out


def run_lemma_green(p, seeds, threads):
    from .lemma_lab.green import c_exact, c_via_contours, mc_lemma_green, zero_cost_circuit_mc
    from .seeds import rng_for

    root = p["seed"]
    rows, rates = [], []
    for k in p["k"]:
        r = mc_lemma_green(p["q"], k, p["trials"], root, p["exclude_box"], p["allow_k5"], threads)
        rates.append(r.p_hat)
        rows.append([k, p["q"], r.trials, r.failures, r.p_hat, r.lo, r.hi, r.method, r.zero_cost_failures,
                     float(np.mean(r.values)), int(np.min(r.values))])
    header = ["k", "q", "trials", "failures", "p_hat", "lo", "hi", "method", "zero_cost_failures",
              "mean_bound", "min_bound"]
    arts = {"lemma_green.csv": csv_text(header, rows)}
    summary = {"q": p["q"], "k": p["k"], "p_hat": rates,
               "non_increasing": bool(np.all(np.diff(rates) <= 0)),
               "last_below_0.1": bool(rates[-1] < 0.1) if rates else None}
    if p["circuit_q"]:
        crow = []
        for q in p["circuit_q"]:
            z = zero_cost_circuit_mc(q, p["max_len"], p["circuit_trials"], root, threads)
            crow.append([q, p["max_len"], z.trials, z.hits, z.p_hat, z.lo, z.hi])
        arts["zero_cost.csv"] = csv_text(["q", "max_len", "trials", "hits", "p_hat", "lo", "hi"], crow)
        # along decreasing q, each interval sits strictly below the previous one
        srt = sorted(crow, key=lambda r: -r[0])
        summary["circuit_p_hat"] = [r[4] for r in srt]
        summary["circuit_strictly_decreasing"] = all(b[6] < a[5] for a, b in zip(srt, srt[1:]))
    if p["exact_check"]:
        rng = rng_for(seeds["lemma-green/exact-check"])
        k = 4
        erows, mism = [], 0
        for dens in (0.0, 0.1, 0.3):
            for i in range(50):
                rem = rng.random((k, k)) < dens
                a = c_exact(rem, k).value
                b = c_via_contours(rem, k).value
                mism += a != b
                erows.append([dens, i, int(rem.sum()), a, b, a == b])
        empty = c_exact(np.zeros((k, k), dtype=bool), k).value
        arts["exact_check.csv"] = csv_text(["density", "i", "removed", "exhaustive", "contour", "equal"], erows)
        summary["exact_mismatches"] = mism
        summary["exact_empty_min"] = empty
        summary["exact_empty_at_least_half_k"] = empty >= k / 2
    return arts, summary


def _contour_plan(p):
    return {f"contours/{k}": derive_seed(p["seed"], "contours", k) for k in p["k"]}


def run_contours(p, seeds, threads):
    from .lemma_lab.contours import (GridColoring, count_unlike_pairs, extract_dual_contours,
                                     is_self_avoiding, maximal_decomposition)
    from .seeds import rng_for

    def per_k(k):
        rng = rng_for(seeds[f"contours/{k}"])
        rows, dumps = [], []
        for t in range(p["count"]):
            gc = GridColoring.random(k, rng, p["p_green"])
            cs = extract_dual_contours(gc)
            unlike = count_unlike_pairs(gc.green)
            infos = maximal_decomposition(cs, gc)
            mx = [i for i in infos if i.maximal]
            union = np.zeros((k, k), dtype=np.int64)
            for i in mx:
                union += i.interior
            rows.append([k, t, cs.total_length, unlike, cs.total_length == unlike, len(cs.circuits),
                         len(cs.paths), sum(i.contour.kind == "circuit" for i in mx),
                         sum(i.contour.kind == "path" for i in mx),
                         all(is_self_avoiding(c) for c in cs.contours),
                         bool(union.max(initial=0) <= 1),
                         all(i.inside_uniform and i.outside_uniform and i.inside_connected for i in mx),
                         sum(i.ambiguous for i in infos)])
            if t < p["dump"]:
                dumps.append(json.loads(cs.to_json()))
        return rows, dumps

    results = _parallel(per_k, list(p["k"]), threads)
    rows = [r for rs, _ in results for r in rs]
    dumps = {str(k): d for k, (_, d) in zip(p["k"], results)}
    header = ["k", "trial", "contour_length", "unlike_pairs", "conserved", "circuits", "paths",
              "maximal_circuits", "maximal_paths", "self_avoiding", "maximal_disjoint",
              "ring_checks", "ambiguous_paths"]
    summary = {"colorings": len(rows), "conservation_failures": sum(not r[4] for r in rows),
               "self_avoidance_failures": sum(not r[9] for r in rows),
               "disjointness_failures": sum(not r[10] for r in rows),
               "ring_failures": sum(not r[11] for r in rows),
               "turn_rule": "green on the left; left turn at four-way dual vertices"}
    return {"contours.csv": csv_text(header, rows), "contours.json": json_text(dumps)}, summary


def _lemma7_plan(p):
    return {"lemma7/tree": derive_seed(p["seed"], "lemma7", p["model"], float(p["m"]), p["k"]),
            "lemma7/report": derive_seed(p["seed"], "lemma7-report")}


def run_lemma7(p, seeds, threads):
    from .builders import build_grid_comb, build_mst, build_poisson_rain
    from .geometry import Window, sample_poisson
    from .lemma_lab.lemma7 import lemma7_pipeline
    from .network import route_length

    n = p["m"] * p["k"]
    pad = 0.1 * n if p["pad"] is None else p["pad"]
    big = Window(-pad, -pad, n + 2 * pad)
    s = seeds["lemma7/tree"]
    if p["model"] == "mst":
        tree = build_mst(sample_poisson(p["intensity"], big, s))
    elif p["model"] == "rain":
        tree = build_poisson_rain(p["intensity"], big, s)
    elif p["model"] == "comb":
        tree = build_grid_comb(big, 1 / math.sqrt(p["intensity"]))
    else:
        raise ConfigError("lemma7 needs a tree model")
    w = Window(0.0, 0.0, n)
    res = lemma7_pipeline(tree, w, p["m"], p["k"], p["report_cap"], seeds["lemma7/report"])
    rep = res.reported
    routes = route_length(tree, rep[:, 0], rep[:, 1]) if len(rep) else np.zeros(0)
    seps = np.hypot(*(tree.positions[rep[:, 0]] - tree.positions[rep[:, 1]]).T) if len(rep) else np.zeros(0)
    vstar = res.centroid
    cen = np.full(len(rep), vstar)
    via = tree.distance(rep[:, 0], cen) + tree.distance(cen, rep[:, 1]) if len(rep) else np.zeros(0)
    through = bool(np.all(np.isclose(routes, via, rtol=1e-9, atol=0))) if len(rep) else True
    cells = []
    k = p["k"]
    for x in range(k):
        for y in range(k):
            cells.append([x, y, res.cell_counts[x, y], res.blue_counts[x, y], res.balanced[x, y],
                          "green" if res.coloring.green[x, y] else "yellow"])
    c = res.census
    summary = {"m": p["m"], "k": k, "threshold": res.threshold, "terminals": res.n_terminals,
               "centroid": vstar, "B": len(res.split.B), "Bc": len(res.split.Bc),
               "bipartition_method": res.split.method,
               "census": {"S": c.S, "S_lo": c.S_lo, "S_hi": c.S_hi, "unbalanced": c.unbalanced,
                          "total": c.total, "implication": c.implication, "psi": c.psi,
                          "blue_total": c.blue_total, "red_total": c.red_total},
               "long_pairs": res.long_pairs, "reported": len(rep),
               "reported_routes_ok": bool(np.all(routes >= res.threshold)),
               "reported_through_centroid": through, "notes": res.notes}
    return {"lemma7_census.csv": csv_text(["col", "row", "points", "blue", "balanced", "color"], cells),
            "lemma7_pairs.csv": csv_text(["b", "b_complement", "separation", "route"],
                                         [[a, b, s_, r_] for (a, b), s_, r_ in zip(rep, seps, routes)])}, summary


def _single_plan(tag):
    return lambda p: {tag: derive_seed(p["seed"], tag, float(p["window"]))}


def run_rgg(p, seeds, threads):
    from .builders import build_mst, rgg_components
    from .geometry import Window, sample_poisson

    s = seeds["rgg"]
    ps = sample_poisson(p["intensity"], Window(0.0, 0.0, p["window"]), s)
    comp = rgg_components(ps, p["r0"])
    rows = [[size, cnt] for size, cnt in sorted(comp.histogram.items())]
    summary = {"points": len(ps), "components": len(comp.sizes), "moments": comp.moments(),
               "largest": int(comp.sizes.max(initial=0))}
    if p["check_mst_bound"] and len(ps) >= 2:
        t = build_mst(ps)
        checked = viol = 0
        worst = 0.0
        for lab in np.flatnonzero(comp.sizes > 1):
            mem = np.flatnonzero(comp.labels == lab)
            iu, ju = np.triu_indices(len(mem), 1)
            d = t.distance(mem[iu], mem[ju])
            bound = p["r0"] * comp.sizes[lab]
            checked += len(d)
            viol += int(np.sum(d > bound * (1 + 1e-12)))
            worst = max(worst, float(np.max(d / bound)))
        summary["mst_bound"] = {"pairs": checked, "violations": viol, "max_ratio": worst}
    return {"rgg_sizes.csv": csv_text(["size", "components"], rows)}, summary


def run_rain_check(p, seeds, threads):
    from .builders import build_poisson_rain
    from .geometry import Window

    t = build_poisson_rain(p["intensity"], Window(0.0, 0.0, p["window"]), seeds["rain-check"])
    arr = t.arrival
    xy = t.positions
    order = np.argsort(arr, kind="stable")
    rank = np.empty(len(arr), dtype=np.int64)
    rank[order] = np.arange(len(arr))
    bad_parent = 0
    for start in range(1, len(order), 256):
        idx = order[start:start + 256]
        d2 = ((xy[idx, None, :] - xy[None, order, :]) ** 2).sum(axis=2)
        d2[rank[order][None, :] >= rank[idx][:, None]] = np.inf
        best = order[np.argmin(d2, axis=1)]
        bad_parent += int(np.sum(best != t.parent[idx]))
    nonroot = t.parent >= 0
    mono = bool(np.all(arr[t.parent[nonroot]] < arr[nonroot]))
    summary = {"points": len(arr), "parent_mismatches": bad_parent, "arrival_monotone": mono,
               "root": int(t.root)}
    rows = [[i, xy[i, 0], xy[i, 1], arr[i], t.parent[i]] for i in range(len(arr))]
    return {"rain_tree.csv": csv_text(["id", "x", "y", "arrival", "parent"], rows)}, summary


# ---------------------------------------------------------------------------

_MODEL = Param("model", _model, "mst", help="network model", choices=MODELS)
_INT = Param("intensity", float, 1.0, help="points per unit area")

EXPERIMENTS = {
    "rho": Experiment("rho", "mean route length per separation bin", [
        _MODEL, Param("window", float, 200.0, help="window side"), _INT,
        Param("bins", _floats, [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0], help="comma-separated bin edges"),
        Param("cap", _opt_int, 100_000, help="pairs kept per bin ('none' = all)"),
        Param("margin", _opt_float, None, help="boundary margin (default 10%% of side)"),
        Param("replicates", int, 1, help="independent windows pooled")],
        run_rho, lambda p: _replicate_plan(p, "rho")),
    "tail": Experiment("tail", "route-length survival chi(r, d) and log-log slope", [
        _MODEL, Param("window", float, 500.0, help="window side"), _INT,
        Param("r", float, required=True, help="pair separation cut-off"),
        Param("d_grid", _floats, None, help="comma-separated thresholds (default r * 2^(j/4))"),
        Param("cap", _opt_int, 100_000, help="pairs kept ('none' = all)"),
        Param("margin", _opt_float, None, help="boundary margin (default 10%% of side)"),
        Param("fit_range", _floats, None, help="lo,hi of the slope fit (default 5r,10r)")],
        run_tail, lambda p: {"tail": derive_seed(p["seed"], "tail", p["model"], float(p["window"]))}),
    "scaling": Experiment("scaling", "mean D_r across window sides", [
        _MODEL, _INT, Param("r", float, required=True, help="pair separation cut-off"),
        Param("sides", _floats, required=True, help="comma-separated increasing window sides"),
        Param("replicates", int, 3, help="windows per side"),
        Param("cap", lambda s: "auto" if str(s) == "auto" else _opt_int(s), "auto",
              help="pairs per window ('auto': all on trees, 1e5 otherwise)"),
        Param("margin_frac", float, 0.1, help="margin as a fraction of the side")],
        run_scaling, _scaling_plan),
    "lemma-red": Experiment("lemma-red", "bichromatic pair counts on balanced squares", [
        Param("m", _floats, [15.0, 25.0], help="square sides"),
        Param("trials", int, 200, help="trials per side")],
        run_lemma_red, _red_plan),
    "lemma-green": Experiment("lemma-green", "Pr(c(Xi) < k/400), exact cross-check, zero-cost circuits", [
        Param("q", float, required=True, help="removal probability per cell"),
        Param("k", _ints, [8, 16, 32, 64], help="grid sides"),
        Param("trials", int, 200, help="trials per k"),
        Param("exclude_box", _bool, False, help="also remove a random 0.001k-side box"),
        Param("allow_k5", _bool, False, help="exhaustive search at k = 5"),
        Param("circuit_q", _floats, [0.4, 0.2, 0.1, 0.05], help="q values for the zero-cost circuit estimate"),
        Param("max_len", int, 20, help="longest circuit searched"),
        Param("circuit_trials", int, 10_000, help="fields per q"),
        Param("exact_check", _bool, True, help="run the k=4 exhaustive vs contour cross-check")],
        run_lemma_green, _green_plan,
        notes=["for k > 5 the colouring portfolio gives an upper bound on c, so failure rates are lower bounds"]),
    "contours": Experiment("contours", "dual contour extraction on random colourings", [
        Param("k", _ints, [4, 8, 16], help="grid sides"),
        Param("count", int, 1000, help="colourings per k"),
        Param("p_green", float, 0.5, help="green probability per cell"),
        Param("dump", int, 3, help="contour sets serialised per k")],
        run_contours, _contour_plan,
        notes=["at four-way dual vertices a contour turns left, keeping green on its left"]),
    "lemma7": Experiment("lemma7", "centroid bipartition, subsquare census and long cross routes", [
        Param("model", _model, "mst", help="tree model", choices=TREE_MODELS), _INT,
        Param("m", float, 20.0, help="subsquare side"), Param("k", int, 25, help="subsquares per axis"),
        Param("pad", _opt_float, None, help="extra tree margin around the window (default 10%%)"),
        Param("report_cap", int, 1000, help="long pairs written out")],
        run_lemma7, _lemma7_plan,
        notes=["finite-window spanned subtree approximates the restriction of the infinite tree"]),
    "rgg": Experiment("rgg", "random geometric graph components and the MST route bound", [
        Param("window", float, 50.0, help="window side"), _INT,
        Param("r0", float, 0.5, help="connection radius"),
        Param("check_mst_bound", _bool, True, help="check route <= r0 * N(v, r0) on every pair")],
        run_rgg, _single_plan("rgg")),
    "rain-check": Experiment("rain-check", "Poisson rain parents against a linear scan", [
        Param("window", float, 100.0, help="window side"), _INT],
        run_rain_check, _single_plan("rain-check")),
}

PALM_NOTE = "pairs are drawn uniformly from the window, not Palm-calibrated"
for _name in ("rho", "tail", "scaling"):
    EXPERIMENTS[_name].notes.append(PALM_NOTE)

COMMON_NOTES = [
    "seeds derive as sha256(root seed, experiment, labels)",
]
