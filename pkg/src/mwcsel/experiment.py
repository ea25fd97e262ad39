"""Reference classifier and the hold-out evaluation harness."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import baselines
from .clique import SelectionResult, mwc_select
from .errors import ConfigError, DataError, MwcselError
from .graph import build_graph
from .ingest import SynthConfig, TrialSet, holdout_split, load_trials, synth_trials
from .metrics import f_score, fleiss_kappa, pair_confusion, rand_index, rating_matrix
from .similarity import (
    FrechetNorm,
    PairwiseRaw,
    SimilarityParams,
    cross_raw,
    cross_similarity,
    pairwise_raw,
    similarity_from_raw,
)
from .threshold import DEFAULT_INTERVAL, delta_schedule, similarity_distribution

__all__ = [
    "knn_classify",
    "ExperimentConfig",
    "EvalReport",
    "SplitContext",
    "run_experiment",
    "run_sweep",
    "SELECTORS",
]

logger = logging.getLogger(__name__)

SELECTORS = ("none", "mwc") + baselines.BASELINES
METRICS = ("rand_index", "f_score", "kappa")


def knn_classify(train, test, k: int = 1, similarity=None, params: SimilarityParams | None = None):
    """Majority label among the ``k`` most similar training trials.

    ``similarity`` is a ``(len(test), len(train))`` array; when omitted it
    is computed with ``params`` under min-max scaling over the training
    pairs. Neighbour ties go to the lowest trial id, vote ties to the
    lowest label.
    """
    if len(train) == 0:
        raise DataError("cannot classify with an empty training set")
    if not 1 <= k <= len(train):
        raise ConfigError(f"k={k} must lie in [1, {len(train)}]")
    if similarity is None:
        params = params or SimilarityParams()
        norm = pairwise_raw(train, params.q).frechet_norm()
        fre, trd = cross_raw(test, train, params.q)
        similarity = cross_similarity(fre, trd, params, norm)
    sim = np.asarray(similarity, dtype=np.float64)
    if sim.shape != (len(test), len(train)):
        raise DataError(f"similarity shape {sim.shape} != ({len(test)}, {len(train)})")
    ids = np.asarray(train.ids)
    labels = train.labels
    # lexsort: last key is primary; rounding lets noise-level differences tie
    out = np.empty(len(test), dtype=np.int64)
    for r in range(len(test)):
        nearest = np.lexsort((ids, -np.round(sim[r], 12)))[:k]
        votes = np.bincount(labels[nearest])
        out[r] = int(np.argmax(votes))
    return out


@dataclass
class ExperimentConfig:
    """Settings of one hold-out experiment.

    ``dataset`` is ``{"synth": {...}}`` or ``{"path": ..., "format": ...,
    "channel": ..., "n_channels": ...}``. Thresholds come from ``deltas``
    when given, otherwise from the mass targets ``A`` (a scalar is repeated
    once per class). Baseline sizes ``k``/``m`` default to matching the
    clique selection on the same split. ``classifier_scaling`` picks the
    set whose distance range scales the classifier's similarities:
    ``"selected"`` (the trials it is trained on) or ``"train"`` (the whole
    training part, as used for selection).
    """

    dataset: dict = field(default_factory=lambda: {"synth": {}})
    selector: str = "mwc"
    A: float | list | None = 0.5
    deltas: list | None = None
    lam: float = 0.5
    q: int = 1
    interval: float = DEFAULT_INTERVAL
    k_nn: int = 1
    seed: int = 0
    repetitions: int = 3
    ratio: tuple = (2, 1)
    class_order: list | None = None
    rest_as_clique: bool = False
    k: int | None = None
    m: int | None = None
    beta: float = 1.0
    classifier_scaling: str = "selected"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown experiment config keys: {sorted(unknown)}")
        cfg = cls(**d)
        cfg.ratio = tuple(cfg.ratio)
        return cfg

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ratio"] = list(self.ratio)
        return d

    @property
    def params(self) -> SimilarityParams:
        return SimilarityParams(lam=self.lam, q=self.q)

    def validate(self) -> None:
        if self.selector not in SELECTORS:
            raise ConfigError(f"unknown selector {self.selector!r}; choose from {SELECTORS}")
        self.params.validate()
        if self.k_nn < 1:
            raise ConfigError("k_nn must be >= 1")
        if self.deltas is None and self.A is None and self.selector != "none":
            raise ConfigError("either deltas or A must be given")
        if not 0 < self.interval <= 1:
            raise ConfigError(f"interval must lie in (0, 1], got {self.interval}")
        if self.classifier_scaling not in ("selected", "train"):
            raise ConfigError(f"classifier_scaling must be 'selected' or 'train', "
                              f"got {self.classifier_scaling!r}")


def load_dataset(source: dict) -> TrialSet:
    if "synth" in source:
        return synth_trials(SynthConfig(**source["synth"]))
    if "path" in source:
        return load_trials(source["path"], source.get("format", "csv-rows"),
                           source.get("channel"), source.get("n_channels", 1))
    raise ConfigError("dataset needs a 'synth' or a 'path' entry")


@dataclass
class EvalReport:
    config: dict
    splits: list
    mean: dict

    @property
    def method(self) -> str:
        return self.config["selector"]

    def to_json(self) -> dict:
        return {"config": self.config, "splits": self.splits, "mean": self.mean}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


class SplitContext:
    """Everything derived from one train/test split, shared by all selectors.

    The Fréchet scaling is fixed by the training pairs; test-to-train
    similarities reuse it.
    """

    def __init__(self, trials: TrialSet, raw: PairwiseRaw, plan, params: SimilarityParams):
        self.plan = plan
        self.params = params
        self.train = trials.subset(plan.train_ids)
        self.test = trials.subset(plan.test_ids)
        tr = [trials.position(i) for i in self.train.ids]
        te = [trials.position(i) for i in self.test.ids]
        raw_train = raw.subset(tr)
        self.norm: FrechetNorm = raw_train.frechet_norm()
        self.mu = similarity_from_raw(raw_train, params, self.norm)
        self.cross = cross_similarity(raw.frechet[np.ix_(te, tr)], raw.trend[np.ix_(te, tr)],
                                      params, self.norm)
        self.graph = build_graph(self.train, self.mu)
        self._raw = raw
        self._tr, self._te = tr, te
        self._mwc_cache = {}

    def classifier_similarity(self, selected_ids, own_scaling=True):
        """Test-by-selected similarities for the reference classifier."""
        cols = [self.train.position(i) for i in selected_ids]
        if not own_scaling:
            return self.cross[:, cols]
        full = [self._tr[c] for c in cols]
        norm = self._raw.subset(full).frechet_norm()
        te = self._te
        return cross_similarity(self._raw.frechet[np.ix_(te, full)], self._raw.trend[np.ix_(te, full)],
                                self.params, norm)

    def thresholds(self, cfg: ExperimentConfig) -> list[float]:
        m = len(cfg.class_order) if cfg.class_order else len(self.train.classes)
        if cfg.deltas is not None:
            return [float(d) for d in cfg.deltas]
        scalar = not isinstance(cfg.A, (list, tuple))
        A = [cfg.A] * m if scalar else cfg.A
        if cfg.rest_as_clique and len(A) == m:
            A = A[:-1]
        h = similarity_distribution(self.mu, cfg.interval)
        return delta_schedule(h, A, warn=not scalar)

    def mwc(self, cfg: ExperimentConfig) -> SelectionResult:
        deltas = self.thresholds(cfg)
        key = (tuple(deltas), tuple(cfg.class_order or ()), cfg.rest_as_clique)
        if key not in self._mwc_cache:
            self._mwc_cache[key] = mwc_select(
                self.graph, deltas, cfg.class_order, cfg.rest_as_clique,
                params={"lambda": self.params.lam, "q": self.params.q},
            )
        return self._mwc_cache[key]

    def select(self, cfg: ExperimentConfig) -> SelectionResult:
        sel = cfg.selector
        train = self.train
        if sel == "none":
            return SelectionResult((), tuple(train.ids), (), {}, "none")
        if sel == "mwc":
            return self.mwc(cfg)
        ref = None if (cfg.k is not None) else self.mwc(cfg)
        if sel == "lw":
            if cfg.k is not None:
                k = cfg.k
            else:
                # one k for every class, total matched to the reference
                k = max(1, int(round(len(ref.selected_ids) / len(train.classes))))
                k = min(k, min(train.class_sizes().values()))
            return baselines.lw_select(train, self.mu, k)
        if sel == "gw":
            k = cfg.k if cfg.k is not None else len(ref.selected_ids)
            return baselines.gw_select(train, self.mu, k)
        fn = baselines.lrt_select if sel == "lrt" else baselines.grt_select
        cap = min(train.class_sizes().values()) if sel == "lrt" else len(train)
        if cfg.k is not None:
            m = cfg.m if cfg.m is not None else cfg.k
            return fn(train, self.test, self.cross, m, cfg.k)
        return self._matched_test_driven(fn, cap, cfg.m, len(ref.selected_ids))

    def _matched_test_driven(self, fn, cap, m, target):
        best = None
        for k in range(1, cap + 1):
            res = fn(self.train, self.test, self.cross, max(m or k, k), k)
            gap = abs(len(res.selected_ids) - target)
            if best is None or gap < best[0]:
                best = (gap, res)
            if len(res.selected_ids) >= target:
                break
        return best[1]

    def evaluate(self, cfg: ExperimentConfig) -> dict:
        sel = self.select(cfg)
        if not sel.selected_ids:
            raise DataError("selection is empty; nothing to train on")
        chosen = self.train.subset(sel.selected_ids)
        k_nn = min(cfg.k_nn, len(chosen))
        pred = knn_classify(chosen, self.test, k_nn, self.classifier_similarity(chosen.ids, cfg.classifier_scaling == "selected"))
        truth = self.test.labels
        conf = pair_confusion(truth, pred)
        cats = sorted(set(truth.tolist()) | set(pred.tolist()))
        kappa = fleiss_kappa(rating_matrix(np.stack([truth, pred], axis=1), cats))
        return {
            "repetition": self.plan.repetition_index,
            "seed": self.plan.seed,
            "deltas": sel.params.get("deltas"),
            "selected": len(sel.selected_ids),
            "accuracy": float(np.mean(pred == truth)),
            "rand_index": rand_index(conf),
            "f_score": f_score(conf, cfg.beta),
            "kappa": kappa,
            "confusion": conf.to_json(),
        }


def _mean_row(splits) -> dict:
    keys = METRICS + ("accuracy", "selected")
    return {k: float(np.mean([s[k] for s in splits])) for k in keys}


def _contexts(trials, cfg, workers: int = 1):
    plans = holdout_split(trials, cfg.ratio, cfg.repetitions, cfg.seed)
    raw = pairwise_raw(trials, cfg.q, workers)
    return [SplitContext(trials, raw, p, cfg.params) for p in plans]


def run_experiment(cfg: ExperimentConfig, trials: TrialSet | None = None, contexts=None) -> EvalReport:
    """Hold-out evaluation of one selector with a k-NN classifier.

    Each repetition selects on its training part, classifies the test part
    with the selected trials and scores the predictions; the report holds
    every split and their mean.
    """
    cfg.validate()
    if trials is None:
        trials = load_dataset(cfg.dataset)
    if contexts is None:
        contexts = _contexts(trials, cfg)
    splits = []
    for ctx in contexts:
        try:
            splits.append(ctx.evaluate(cfg))
        except MwcselError as exc:
            raise type(exc)(f"split {ctx.plan.repetition_index}: {exc}") from exc
    return EvalReport(cfg.to_dict(), splits, _mean_row(splits))


def run_sweep(cfg: ExperimentConfig, selectors=SELECTORS, points=None, trials=None, workers: int = 1):
    """Evaluate several selectors over a list of threshold settings.

    ``points`` are mass targets (floats or lists) when ``cfg.deltas`` is
    unset, else explicit threshold lists. Returns ``(reports, csv_text)``;
    the CSV has one row per (selector, point), with a single row for
    ``none`` which ignores thresholds. ``workers`` only parallelises the
    pairwise distances.
    """
    if trials is None:
        trials = load_dataset(cfg.dataset)
    contexts = _contexts(trials, cfg, workers)
    if points is None:
        points = [cfg.deltas if cfg.deltas is not None else cfg.A]
    reports = []
    for sel in selectors:
        pts = [None] if sel == "none" else points
        for pt in pts:
            d = cfg.to_dict()
            d["selector"] = sel
            if pt is not None:
                if cfg.deltas is not None:
                    d["deltas"] = list(pt)
                else:
                    d["A"] = pt
            reports.append(run_experiment(ExperimentConfig.from_dict(d), trials, contexts))
    return reports, sweep_csv(reports)


def sweep_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["selector", "A", "deltas", "selected", "accuracy"] + list(METRICS))
    for r in reports:
        c = r.config
        if c["selector"] == "none":
            a, deltas = "", ""
        else:
            a = "" if c["deltas"] is not None else json.dumps(c["A"])
            deltas = json.dumps([s["deltas"] for s in r.splits]) if c["selector"] == "mwc" else \
                json.dumps(c["deltas"]) if c["deltas"] is not None else ""
        m = r.mean
        w.writerow([c["selector"], a, deltas, repr(m["selected"]), repr(m["accuracy"])]
                   + [repr(m[k]) for k in METRICS])
    return buf.getvalue()
