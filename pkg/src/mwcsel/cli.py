"""Command-line entry point: ``mwcsel <subcommand> [options]``.

Every option mirrors a key of an optional JSON config file
(``--config``); options given on the command line win over the file.
Outputs go to ``--out`` (a directory) and are written atomically. Each
run also records its effective configuration as ``run_config.json``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .clique import mwc_select
from .errors import ConfigError, DataError, InvariantViolation, MwcselError
from .experiment import SELECTORS, ExperimentConfig, run_sweep
from .graph import build_graph
from .ingest import SynthConfig, dump_splits, holdout_split, load_trials, synth_trials, trials_to_csv
from .similarity import SimilarityMatrix, SimilarityParams, cross_raw, cross_similarity, pairwise_raw, similarity_from_raw
from .threshold import DEFAULT_INTERVAL, delta_schedule, similarity_distribution

__all__ = ["RunConfig", "main", "build_parser"]

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4

SUBCOMMANDS = ("similarity", "thresholds", "select", "evaluate", "synth")
METHODS = ("mwc",) + baselines.BASELINES

# per-subcommand defaults; the key set is also the set of accepted config keys
_COMMON = {"seed": 0, "workers": 1, "out": "."}
_TRIALS = {"input": None, "format": "csv-rows", "channel": None, "n_channels": 1}
_SIM = {"lam": 0.5, "q": 1}
DEFAULTS = {
    "similarity": {**_COMMON, **_TRIALS, **_SIM},
    "thresholds": {**_COMMON, "matrix": None, "interval": DEFAULT_INTERVAL, "A": [0.5]},
    "select": {
        **_COMMON, **_TRIALS, **_SIM,
        "method": "mwc", "A": 0.5, "deltas": None, "interval": DEFAULT_INTERVAL,
        "class_order": None, "rest_as_clique": False, "k": None, "m": None, "test": None,
    },
    "evaluate": {
        **_COMMON,
        "dataset": {"synth": {"noise_fraction": 0.2}},
        "selectors": list(SELECTORS),
        "points": None,
        **{k: v for k, v in ExperimentConfig().to_dict().items()
           if k not in ("dataset", "selector", "seed")},
        "write_splits": False,
    },
    "synth": {**_COMMON, **{k: v for k, v in SynthConfig().__dict__.items() if k != "seed"}},
}


@dataclass
class RunConfig:
    """Effective settings of one CLI run."""

    subcommand: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        unknown = set(self.params) - set(DEFAULTS[self.subcommand])
        if unknown:
            raise ConfigError(f"unknown {self.subcommand} config keys: {sorted(unknown)}")
        self.params = {**DEFAULTS[self.subcommand], **self.params}

    def __getitem__(self, key):
        return self.params[key]

    @property
    def out(self) -> Path:
        return Path(self.params["out"])

    def to_json(self) -> dict:
        return {"subcommand": self.subcommand, "params": self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "RunConfig":
        return cls(obj["subcommand"], dict(obj.get("params", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary sibling and rename it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _need(cfg: RunConfig, key: str):
    if cfg[key] is None:
        raise ConfigError(f"{cfg.subcommand} needs '{key}' (flag or config key)")
    return cfg[key]


def _as_list(x):
    if x is None:
        return None
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _trials(cfg: RunConfig, key: str = "input"):
    return load_trials(_need(cfg, key), cfg["format"], cfg["channel"], cfg["n_channels"])


def _params(cfg: RunConfig) -> SimilarityParams:
    p = SimilarityParams(lam=float(cfg["lam"]), q=int(cfg["q"]))
    p.validate()
    return p


def _workers(cfg: RunConfig) -> int:
    w = cfg["workers"]
    if int(w) != w or w < 1:
        raise ConfigError(f"workers must be a positive integer, got {w}")
    return int(w)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_similarity(cfg: RunConfig) -> list[Path]:
    trials = _trials(cfg)
    params = _params(cfg)
    params.validate(trials.min_length())
    raw = pairwise_raw(trials, params.q, _workers(cfg))
    mu = similarity_from_raw(raw, params)
    out = cfg.out
    write_atomic(out / "similarity.csv", mu.to_csv())
    write_atomic(out / "similarity.json", mu.dumps() + "\n")
    return [out / "similarity.csv", out / "similarity.json"]


def _read_matrix(path) -> SimilarityMatrix:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read matrix {path}: {exc}") from exc
    if path.suffix == ".csv":
        try:
            values = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise DataError(f"malformed matrix CSV {path}: {exc}") from exc
        return SimilarityMatrix(tuple(range(values.shape[0])), values)
    try:
        return SimilarityMatrix.from_json(json.loads(text))
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed matrix JSON {path}: {exc}") from exc


def cmd_thresholds(cfg: RunConfig) -> list[Path]:
    A = [float(a) for a in _as_list(cfg["A"])]
    interval = float(cfg["interval"])
    mu = _read_matrix(_need(cfg, "matrix"))
    h = similarity_distribution(mu, interval)
    deltas = delta_schedule(h, A)
    cover = [h.mass_from(int(np.flatnonzero(h.lower == d)[0])) for d in deltas]
    schedule = {"interval": interval, "A": A, "deltas": deltas, "coverage": cover}
    out = cfg.out
    write_atomic(out / "histogram.csv", h.to_csv())
    write_atomic(out / "schedule.json", _dump(schedule))
    return [out / "histogram.csv", out / "schedule.json"]


def _mwc(cfg, trials, mu):
    g = build_graph(trials, mu)
    order = cfg["class_order"]
    m = len(order) if order else len(trials.classes)
    if cfg["deltas"] is not None:
        deltas = [float(d) for d in _as_list(cfg["deltas"])]
    else:
        A = _as_list(cfg["A"])
        scalar = len(A) == 1
        if scalar:
            A = A * (m - 1 if cfg["rest_as_clique"] else m)
        deltas = delta_schedule(similarity_distribution(mu, float(cfg["interval"])), A, warn=not scalar)
    params = {"lambda": mu.params.lam, "q": mu.params.q}
    return mwc_select(g, deltas, order, bool(cfg["rest_as_clique"]), params=params)


def cmd_select(cfg: RunConfig) -> list[Path]:
    method = cfg["method"]
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
    trials = _trials(cfg)
    params = _params(cfg)
    params.validate(trials.min_length())
    raw = pairwise_raw(trials, params.q, _workers(cfg))
    mu = similarity_from_raw(raw, params)
    k, m = cfg["k"], cfg["m"]
    if method == "mwc":
        res = _mwc(cfg, trials, mu)
    elif method in ("lw", "gw"):
        if k is None:
            ref = _mwc(cfg, trials, mu)
            k = len(ref.selected_ids)
            if method == "lw":
                k = max(1, min(round(k / len(trials.classes)), min(trials.class_sizes().values())))
        fn = baselines.lw_select if method == "lw" else baselines.gw_select
        res = fn(trials, mu, int(k))
    else:
        test = _trials(cfg, "test")
        if k is None:
            raise ConfigError(f"{method} needs 'k' (and optionally 'm')")
        fre, trd = cross_raw(test, trials, params.q, _workers(cfg))
        sim = cross_similarity(fre, trd, params, mu.norm)
        fn = baselines.lrt_select if method == "lrt" else baselines.grt_select
        res = fn(trials, test, sim, int(m if m is not None else k), int(k))
    path = cfg.out / "selection.json"
    write_atomic(path, res.dumps() + "\n")
    return [path]


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    p = dict(cfg.params)
    selectors = _as_list(p.pop("selectors"))
    points = p.pop("points")
    write_splits = p.pop("write_splits")
    workers = _workers(cfg)
    for key in ("out", "workers"):
        p.pop(key)
    unknown = [s for s in selectors if s not in SELECTORS]
    if unknown:
        raise ConfigError(f"unknown selectors {unknown}; choose from {SELECTORS}")
    p["ratio"] = tuple(p["ratio"])
    if "synth" in p["dataset"] and "seed" not in p["dataset"]["synth"]:
        p["dataset"] = {"synth": {**p["dataset"]["synth"], "seed": p["seed"]}}
    exp = ExperimentConfig.from_dict({**p, "selector": selectors[0]})
    exp.validate()
    reports, csv_text = run_sweep(exp, selectors, points, workers=workers)
    out = cfg.out
    write_atomic(out / "report.json", _dump({"reports": [r.to_json() for r in reports]}))
    write_atomic(out / "sweep.csv", csv_text)
    paths = [out / "report.json", out / "sweep.csv"]
    if write_splits:
        from .experiment import load_dataset
        plans = holdout_split(load_dataset(exp.dataset), exp.ratio, exp.repetitions, exp.seed)
        write_atomic(out / "splits.json", dump_splits(plans) + "\n")
        paths.append(out / "splits.json")
    return paths


def cmd_synth(cfg: RunConfig) -> list[Path]:
    kw = {k: cfg[k] for k in DEFAULTS["synth"] if k not in _COMMON}
    trials = synth_trials(SynthConfig(seed=int(cfg["seed"]), **kw))
    noise = [t.id for t in trials if t.is_noise]
    out = cfg.out
    write_atomic(out / "trials.csv", trials_to_csv(trials))
    write_atomic(out / "noise.json", _dump({"noise_ids": noise}))
    return [out / "trials.csv", out / "noise.json"]


COMMANDS = {
    "similarity": cmd_similarity,
    "thresholds": cmd_thresholds,
    "select": cmd_select,
    "evaluate": cmd_evaluate,
    "synth": cmd_synth,
}


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _opt(p, *flags, **kw):
    p.add_argument(*flags, default=argparse.SUPPRESS, **kw)


def _json_arg(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not valid JSON: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with option values; flags win")
    _opt(common, "--seed", type=int, help="random seed")
    _opt(common, "--workers", type=int, help="threads for pairwise similarity")
    _opt(common, "--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress")

    trials = argparse.ArgumentParser(add_help=False)
    _opt(trials, "input", nargs="?", help="trial file or directory")
    _opt(trials, "--format", choices=("csv-rows", "labeled-dir"))
    _opt(trials, "--channel", type=int)
    _opt(trials, "--n-channels", dest="n_channels", type=int)

    sim = argparse.ArgumentParser(add_help=False)
    _opt(sim, "--lam", type=float, help="Fréchet share of the blended similarity")
    _opt(sim, "--q", type=int, help="lag of the local-trend differences")

    parser = argparse.ArgumentParser(prog="mwcsel", description="Clique-based trial selection.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    sub.add_parser("similarity", parents=[common, trials, sim],
                   help="pairwise similarity matrix (CSV + JSON)")

    p = sub.add_parser("thresholds", parents=[common], help="similarity histogram and thresholds")
    _opt(p, "matrix", nargs="?", help="similarity.json (or a bare CSV matrix)")
    _opt(p, "--interval", type=float)
    _opt(p, "--A", dest="A", type=float, nargs="+", help="mass targets, non-decreasing")

    p = sub.add_parser("select", parents=[common, trials, sim], help="select trials")
    _opt(p, "--method", help=f"one of {', '.join(METHODS)}")
    _opt(p, "--A", dest="A", type=float, nargs="+")
    _opt(p, "--deltas", type=float, nargs="+")
    _opt(p, "--interval", type=float)
    _opt(p, "--class-order", dest="class_order", type=int, nargs="+")
    _opt(p, "--rest-as-clique", dest="rest_as_clique", action="store_true")
    _opt(p, "--k", type=int)
    _opt(p, "--m", type=int)
    _opt(p, "--test", help="test trials (lrt/grt)")

    p = sub.add_parser("evaluate", parents=[common, sim], help="hold-out evaluation and sweep")
    _opt(p, "--dataset", type=_json_arg, help='JSON, e.g. \'{"path": "trials.csv"}\'')
    _opt(p, "--selectors", nargs="+")
    _opt(p, "--points", type=_json_arg, help="JSON list of mass targets or threshold lists")
    _opt(p, "--A", dest="A", type=float)
    _opt(p, "--interval", type=float)
    _opt(p, "--k-nn", dest="k_nn", type=int)
    _opt(p, "--repetitions", type=int)
    _opt(p, "--classifier-scaling", dest="classifier_scaling", choices=("selected", "train"))
    _opt(p, "--write-splits", dest="write_splits", action="store_true")

    p = sub.add_parser("synth", parents=[common], help="synthetic labeled trials")
    for name, default in DEFAULTS["synth"].items():
        if name in _COMMON:
            continue
        _opt(p, "--" + name.replace("_", "-"), dest=name, type=type(default))
    return parser


def _load_config_file(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path} must hold a JSON object")
    return obj.get("params", obj) if "subcommand" in obj else obj


def resolve_config(args: argparse.Namespace) -> RunConfig:
    ns = vars(args).copy()
    sub = ns.pop("subcommand")
    path = ns.pop("config", None)
    ns.pop("verbose", None)
    merged = _load_config_file(path) if path else {}
    merged.update(ns)
    return RunConfig(sub, merged)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        paths = COMMANDS[cfg.subcommand](cfg)
        write_atomic(cfg.out / "run_config.json", cfg.dumps() + "\n")
    except InvariantViolation as exc:
        print(f"mwcsel: invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ConfigError as exc:
        print(f"mwcsel: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"mwcsel: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MwcselError as exc:
        print(f"mwcsel: {exc}", file=sys.stderr)
        return EXIT_DATA
    for p in paths:
        logger.info("wrote %s", p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
