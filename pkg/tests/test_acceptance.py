"""Acceptance criteria. Each test prints one ``PASS``/``FAIL`` line, also
collected into the pytest terminal summary.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import logging
import time
from functools import lru_cache

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_graph, random_similarity
from mwcsel.cli import main as cli_main
from mwcsel.clique import grow_clique, mwc_select, pair_weight
from mwcsel.experiment import ExperimentConfig, _contexts, load_dataset, run_experiment
from mwcsel.graph import build_graph, prune_edges
from mwcsel.ingest import Trial, TrialSet, holdout_split, save_trials, synth_trials
from mwcsel.metrics import ConfusionCounts, RatingMatrix, f_score, fleiss_kappa, rand_index
from mwcsel.similarity import discrete_frechet, similarity_matrix
from mwcsel.threshold import (
    delta_schedule,
    select_threshold,
    similarity_distribution,
)

TOL_WEIGHT = 1e-9
TOL_HIST = 1e-12
TOL_METRIC = 1e-12
N_SEEDS = 20


def report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# clique checks shared by several criteria
_VALIDITY = {"cliques": 0, "violations": 0}


def _check_validity(g, cliques):
    G = g.parent if hasattr(g, "parent") else g
    lookup = {v: k for k, v in enumerate(G.vertices)}
    for c in cliques:
        _VALIDITY["cliques"] += 1
        for a, b in itertools.combinations(c.members, 2):
            if G.mu[lookup[a], lookup[b]] < c.delta:
                _VALIDITY["violations"] += 1


def _weight_oracle(G, members):
    pos = [G.vertices.index(v) for v in members]
    w = sum(G.eta[p] for p in pos)
    for a, b in itertools.combinations(pos, 2):
        w += G.mu[a, b]
    return w


def _random_instances(seed, count, n_max=30):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        n = int(rng.integers(4, n_max + 1))
        k = int(rng.integers(1, 4))
        g = random_graph(rng, n, k)
        deltas = np.sort(rng.uniform(0.2, 0.8, size=k))[::-1]
        deltas = [float(d) for d in deltas]
        if len(set(deltas)) < k:
            continue
        out.append((g, deltas))
    return out


# --------------------------------------------------------------------------
# Fréchet oracle
# --------------------------------------------------------------------------

def _coupling_oracle(a, b):
    """Minimum over every monotone coupling of the maximum pointwise gap."""
    m, n = len(a), len(b)
    best = np.inf

    def walk(i, j, cur):
        nonlocal best
        cur = max(cur, abs(a[i] - b[j]))
        if cur >= best:
            return
        if i == m - 1 and j == n - 1:
            best = cur
            return
        if i + 1 < m:
            walk(i + 1, j, cur)
        if j + 1 < n:
            walk(i, j + 1, cur)
        if i + 1 < m and j + 1 < n:
            walk(i + 1, j + 1, cur)

    walk(0, 0, 0.0)
    return best


def test_frechet_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatches = 0
    for _ in range(500):
        a = rng.integers(-5, 6, size=int(rng.integers(1, 7))).astype(float)
        b = rng.integers(-5, 6, size=int(rng.integers(1, 7))).astype(float)
        if discrete_frechet(a, b) != _coupling_oracle(a, b):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    report("Frechet oracle", mismatches == 0 and elapsed < 5.0,
           f"{mismatches} mismatches in 500 pairs, {elapsed:.2f} s (limit 5 s)")


# --------------------------------------------------------------------------
# Proposition 1 and Theorem 1
# --------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _grown():
    """Cliques grown by mwc_select on 100 random graphs (n <= 30)."""
    out = []
    for g, deltas in _random_instances(11, 200)[:100]:
        res = mwc_select(g, deltas)
        _check_validity(g, res.cliques)
        out.append((g, res))
    return out


def test_proposition1_identity():
    runs = _grown()
    checked, bad, worst = 0, 0, 0.0
    for g, res in runs:
        for c in res.cliques:
            n = len(c.members)
            if n == 0:
                continue
            rhs = _weight_oracle(g, c.members)
            if n == 1:
                lhs = c.weight
            else:
                lhs = sum(pair_weight(i, j, g, n, c.delta) for i, j in itertools.combinations(c.members, 2))
            err = abs(lhs - rhs)
            worst = max(worst, err)
            bad += err > TOL_WEIGHT
            checked += 1
    report("Proposition 1 identity", len(runs) == 100 and bad == 0,
           f"{checked} cliques on {len(runs)} graphs, {bad} violations, max error {worst:.1e}")


def test_theorem1_admissions():
    admissions, bad = 0, 0
    for g, res in _grown():
        lookup = {v: k for k, v in enumerate(g.vertices)}
        for c in res.cliques:
            prev = 0.0
            for k, v in enumerate(c.members):
                members = c.members[:k]
                w = _weight_oracle(g, c.members[:k + 1])
                inc = g.eta[lookup[v]] + sum(g.mu[lookup[u], lookup[v]] for u in members)
                admissions += 1
                if not (w > prev) or abs((w - prev) - inc) > TOL_WEIGHT:
                    bad += 1
                if abs(c.trace[k] - w) > TOL_WEIGHT:
                    bad += 1
                prev = w
    report("Theorem 1 admissions", bad == 0 and admissions > 0,
           f"{admissions} admissions, {bad} violations")


# --------------------------------------------------------------------------
# Proposition 2 and clique validity
# --------------------------------------------------------------------------

def test_proposition2_equivalence():
    instances = _random_instances(29, 100)[:50]
    mismatches = 0
    for g, deltas in instances:
        res = mwc_select(g, deltas)
        _check_validity(g, res.cliques)
        order = res.params["class_order"]
        view = g.view()
        seq = []
        for label, d in zip(order, deltas):
            c = grow_clique(prune_edges(view, d), label)
            seq.append(set(c.members))
            keep = [p for p in view.positions if g.vertices[p] not in c.members]
            view = type(view)(g, np.asarray(keep, dtype=np.int64), 0.0)
        if seq != [set(c.members) for c in res.cliques]:
            mismatches += 1
    report("Proposition 2 equivalence", len(instances) == 50 and mismatches == 0,
           f"{mismatches} mismatches on {len(instances)} instances")


@lru_cache(maxsize=None)
def _experiment_results():
    """Per seed mean RI of every selector on the synthetic family, plus a
    clique-validity sweep over each split's selection."""
    logging.disable(logging.WARNING)
    try:
        out = {}
        t0 = time.perf_counter()
        for seed in range(N_SEEDS):
            ds = {"synth": {"classes": 2, "per_class": 20, "length": 64,
                            "noise_fraction": 0.2, "seed": seed}}
            trials = load_dataset(ds)
            base = ExperimentConfig(dataset=ds, seed=seed)
            ctx = _contexts(trials, base)
            row = {}
            for sel in ("none", "mwc", "lw", "gw", "lrt", "grt"):
                cfg = ExperimentConfig(dataset=ds, seed=seed, selector=sel, A=0.5)
                row[sel] = run_experiment(cfg, trials, ctx).mean["rand_index"]
            cfg = ExperimentConfig(dataset=ds, seed=seed, selector="mwc", A=0.1)
            row["mwc_hi"] = run_experiment(cfg, trials, ctx).mean["rand_index"]
            for c in ctx:
                for A in (0.1, 0.5):
                    res = c.mwc(ExperimentConfig(dataset=ds, seed=seed, A=A))
                    _check_validity(c.graph, res.cliques)
            out[seed] = row
        return out, time.perf_counter() - t0
    finally:
        logging.disable(logging.NOTSET)


def test_zz_clique_validity():
    # named to run after the other clique-producing criteria
    _grown()
    _experiment_results()
    for seed in range(5):
        t = synth_trials(classes=3, per_class=12, length=48, noise_fraction=0.25, seed=seed)
        mu = similarity_matrix(t)
        g = build_graph(t, mu)
        deltas = delta_schedule(similarity_distribution(mu), [0.3, 0.4, 0.5])
        _check_validity(g, mwc_select(g, deltas).cliques)
    report("Clique validity", _VALIDITY["violations"] == 0 and _VALIDITY["cliques"] > 0,
           f"{_VALIDITY['cliques']} cliques checked, {_VALIDITY['violations']} pairs below threshold")


# --------------------------------------------------------------------------
# threshold module
# --------------------------------------------------------------------------

def _random_histograms(seed, count):
    rng = np.random.default_rng(seed)
    hs = []
    for _ in range(count):
        n = int(rng.integers(3, 40))
        lo = rng.uniform(0, 0.6)
        mu = random_similarity(rng, n, lo, rng.uniform(lo + 0.05, 1.0))
        hs.append((mu, similarity_distribution(mu, float(rng.choice([0.05, 0.1, 0.02, 0.25])))))
    return hs


def test_threshold_law():
    rng = np.random.default_rng(5)
    mono_bad = cover_bad = checks = 0
    for mu, h in _random_histograms(77, 50):
        targets = np.sort(rng.uniform(0.001, 0.999, size=12))
        deltas = [select_threshold(h, a) for a in targets]
        for a1, a2, d1, d2 in zip(targets, targets[1:], deltas, deltas[1:]):
            if a1 < a2 and not d1 >= d2:
                mono_bad += 1
        for a, d in zip(targets, deltas):
            checks += 1
            cover = float(np.mean(mu >= d))
            j = int(np.flatnonzero(h.lower == d)[0])
            one_bin = h.counts[j] / h.n_total
            if not (a - TOL_HIST <= cover < a + one_bin + TOL_HIST):
                cover_bad += 1
    report("Threshold law", mono_bad == 0 and cover_bad == 0,
           f"50 histograms, {checks} targets: {mono_bad} monotonicity and {cover_bad} coverage violations")


def test_histogram_normalization():
    mats = [mu for mu, _ in _random_histograms(91, 50)]
    for seed in range(5):
        mats.append(similarity_matrix(synth_trials(noise_fraction=0.2, seed=seed)).values)
    rng = np.random.default_rng(3)
    mats += [np.full((k, k), 1.0) for k in (1, 2, 7)]
    mats += [random_similarity(rng, 25) for _ in range(20)]
    worst = 0.0
    for mu in mats:
        for interval in (0.05, 0.1, 0.3):
            h = similarity_distribution(mu, interval)
            worst = max(worst, abs(h.densities.sum() - 1.0))
    report("Histogram normalization", worst <= TOL_HIST,
           f"{len(mats)} matrices x 3 intervals, max |sum d - 1| = {worst:.1e}")


# --------------------------------------------------------------------------
# splits
# --------------------------------------------------------------------------

def _fixture(sizes):
    trials, tid = [], 0
    for label, n in enumerate(sizes):
        for _ in range(n):
            trials.append(Trial(tid, label, np.array([0.0, 1.0])))
            tid += 1
    return TrialSet(trials)


def test_split_counts():
    detail = []
    ok = True
    for sizes, (tr_exp, te_exp) in (((135, 133), (180, 88)), ((100, 100), (134, 66))):
        ts = _fixture(sizes)
        for plan in holdout_split(ts, (2, 1), 3, seed=0):
            tr_labels = [ts.by_id(i).label for i in plan.train_ids]
            n_tr = len(plan.train_ids)
            n_te = len(plan.test_ids)
            per_class = all(abs(tr_labels.count(c) - 2 * n / 3) <= 1 for c, n in enumerate(sizes))
            ok &= per_class and n_tr + n_te == sum(sizes) and abs(n_tr - tr_exp) <= len(sizes)
        detail.append(f"{sum(sizes)} -> {n_tr}:{n_te} (expected {tr_exp}:{te_exp})")
    report("Split counts", ok, "; ".join(detail) + ", tolerance 1 per class")


# --------------------------------------------------------------------------
# trend reproduction on synthetic data
# --------------------------------------------------------------------------

def test_selection_helps():
    res, elapsed = _experiment_results()
    ri = {k: np.array([res[s][k] for s in range(N_SEEDS)]) for k in res[0]}
    gain = ri["mwc"].mean() - ri["none"].mean()
    wins = {b: float(np.mean(ri["mwc"] > ri[b])) for b in ("lw", "gw", "lrt", "grt")}
    ok = gain >= 0.05 and all(w >= 0.6 for w in wins.values()) and elapsed < 60
    win_txt = ", ".join(f"{b} {w:.0%}" for b, w in wins.items())
    report("Selection helps", ok,
           f"mean RI mwc {ri['mwc'].mean():.3f} vs none {ri['none'].mean():.3f} "
           f"(gain {gain:+.3f}, need >= 0.05); mwc beats {win_txt} of seeds (need >= 60%); "
           f"{elapsed:.1f} s (limit 60 s)")


def test_delta_sweep_shape():
    res, _ = _experiment_results()
    hold = [res[s]["mwc"] >= res[s]["mwc_hi"] for s in range(N_SEEDS)]
    frac = float(np.mean(hold))
    report("Delta sweep shape", frac >= 0.8,
           f"RI at A=0.5 >= RI at A=0.1 on {frac:.0%} of {N_SEEDS} seeds (need >= 80%)")


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def _kappa_oracle(counts):
    counts = [list(map(int, row)) for row in counts]
    N = len(counts)
    n = sum(counts[0])
    k = len(counts[0])
    P = [(sum(x * x for x in row) - n) / (n * (n - 1)) for row in counts]
    Pbar = sum(P) / N
    pj = [sum(row[j] for row in counts) / (N * n) for j in range(k)]
    Pe = sum(p * p for p in pj)
    return (Pbar - Pe) / (1 - Pe)


def test_metric_formulas():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        tp, fp, tn, fn = (int(x) for x in rng.integers(1, 50, size=4))
        c = ConfusionCounts(tp, fp, tn, fn)
        worst = max(worst, abs(rand_index(c) - (tp + tn) / (tp + fp + tn + fn)))
        beta = float(rng.uniform(0, 3))
        p, r = tp / (tp + fp), tp / (tp + fn)
        worst = max(worst, abs(f_score(c, beta) - (1 + beta ** 2) * p * r / (beta ** 2 * p + r)))
        N, n, k = int(rng.integers(1, 15)), int(rng.integers(2, 8)), int(rng.integers(2, 5))
        while True:
            counts = np.stack([rng.multinomial(n, np.ones(k) / k) for _ in range(N)])
            # expected agreement is 1 when a single category is used
            if np.count_nonzero(counts.sum(axis=0)) >= 2:
                break
        worst = max(worst, abs(fleiss_kappa(RatingMatrix(counts)) - _kappa_oracle(counts)))
    unanimous = []
    for N, n, k in ((2, 2, 2), (5, 4, 3), (10, 3, 2)):
        counts = np.zeros((N, k), dtype=int)
        counts[np.arange(N), np.arange(N) % k] = n
        unanimous.append(fleiss_kappa(RatingMatrix(counts)))
    ok = worst <= TOL_METRIC and all(u == 1.0 for u in unanimous)
    report("Metric formulas", ok,
           f"100 random matrices, max error {worst:.1e}; unanimous kappa = {unanimous}")


# --------------------------------------------------------------------------
# determinism
# --------------------------------------------------------------------------

def _run_twice(tmp_path, name, argv_fn):
    outs = []
    for rep in (1, 2):
        d = tmp_path / f"{name}_{rep}"
        code = cli_main(argv_fn(d))
        assert code == 0, f"{name} exited {code}"
        files = {p.name: p.read_bytes() for p in sorted(d.iterdir())}
        # the recorded config names its own output directory; compare the rest
        run_cfg = json.loads(files.pop("run_config.json"))
        del run_cfg["params"]["out"]
        files["run_config.json"] = json.dumps(run_cfg, sort_keys=True).encode()
        outs.append(files)
    return outs[0] == outs[1], outs[0]


def test_determinism(tmp_path):
    logging.disable(logging.WARNING)
    try:
        data = tmp_path / "trials.csv"
        save_trials(synth_trials(noise_fraction=0.2, seed=4), data)
        same = {}
        same["synth"], _ = _run_twice(tmp_path, "synth", lambda d: ["synth", "--seed", "4", "--out", str(d)])
        same["similarity"], sim = _run_twice(
            tmp_path, "similarity", lambda d: ["similarity", str(data), "--out", str(d)])
        matrix = tmp_path / "similarity_1" / "similarity.json"
        same["thresholds"], _ = _run_twice(
            tmp_path, "thresholds", lambda d: ["thresholds", str(matrix), "--A", "0.2", "0.5", "--out", str(d)])
        for method in ("mwc", "lw", "gw"):
            same[f"select {method}"], _ = _run_twice(
                tmp_path, f"sel_{method}",
                lambda d: ["select", str(data), "--method", method, "--out", str(d)])
        same["select lrt"], _ = _run_twice(
            tmp_path, "sel_lrt",
            lambda d: ["select", str(data), "--method", "lrt", "--test", str(data), "--k", "1",
                       "--m", "3", "--out", str(d)])
        cfg = tmp_path / "eval.json"
        cfg.write_text(json.dumps({"dataset": {"path": str(data)}, "points": [0.3, 0.5]}))
        same["evaluate"], _ = _run_twice(
            tmp_path, "evaluate", lambda d: ["evaluate", "--config", str(cfg), "--out", str(d)])

        # 1 worker against several
        workers_same = True
        for w in (2, 4):
            d = tmp_path / f"sim_w{w}"
            assert cli_main(["similarity", str(data), "--workers", str(w), "--out", str(d)]) == 0
            workers_same &= (d / "similarity.csv").read_bytes() == sim["similarity.csv"]
            workers_same &= (d / "similarity.json").read_bytes() == sim["similarity.json"]
        t = synth_trials(per_class=15, noise_fraction=0.2, seed=9)
        workers_same &= all(np.array_equal(similarity_matrix(t, workers=1).values,
                                           similarity_matrix(t, workers=w).values) for w in (2, 3, 8))
    finally:
        logging.disable(logging.NOTSET)
    differing = [k for k, v in same.items() if not v]
    report("Determinism", not differing and workers_same,
           f"{len(same)} CLI commands re-run, differing: {differing or 'none'}; "
           f"1 vs k workers identical: {workers_same}")
