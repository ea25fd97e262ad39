"""Loading, validating, synthesizing and splitting labeled time-series trials."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyInputError,
    ParseError,
    StratificationError,
)

__all__ = [
    "Trial",
    "TrialSet",
    "SplitPlan",
    "SynthConfig",
    "load_trials",
    "save_trials",
    "synth_trials",
    "holdout_split",
]


@dataclass(frozen=True, eq=False)
class Trial:
    """One labeled time series.

    ``samples`` is stored as a read-only float64 array. ``meta`` carries
    non-essential annotations (e.g. ``{"noise": True}`` for injected trials)
    and is ignored by equality.
    """

    id: int
    label: int
    samples: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64).ravel()
        if arr.size < 2:
            raise DataError(f"trial {self.id}: needs at least 2 samples, got {arr.size}")
        if not np.all(np.isfinite(arr)):
            raise DataError(f"trial {self.id}: samples contain NaN or infinite values")
        if int(self.id) < 0:
            raise DataError(f"trial id must be non-negative, got {self.id}")
        if int(self.label) < 0:
            raise DataError(f"trial {self.id}: label must be non-negative, got {self.label}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "id", int(self.id))
        object.__setattr__(self, "label", int(self.label))

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Trial):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @property
    def is_noise(self) -> bool:
        return bool(self.meta.get("noise", False))


class TrialSet(Sequence):
    """Ordered, immutable collection of trials with unique ids."""

    def __init__(self, trials: Iterable[Trial]):
        self._trials = tuple(trials)
        ids = [t.id for t in self._trials]
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise DataError(f"duplicate trial id {dup}")
        self._index = {t.id: k for k, t in enumerate(self._trials)}

    def __getitem__(self, k):
        if isinstance(k, slice):
            return TrialSet(self._trials[k])
        return self._trials[k]

    def __len__(self):
        return len(self._trials)

    def __eq__(self, other):
        if not isinstance(other, TrialSet):
            return NotImplemented
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))

    __hash__ = None

    def __repr__(self):
        return f"TrialSet(n={len(self)}, classes={sorted(self.classes)})"

    @property
    def ids(self) -> list[int]:
        return [t.id for t in self._trials]

    @property
    def labels(self) -> np.ndarray:
        return np.array([t.label for t in self._trials], dtype=np.int64)

    @property
    def classes(self) -> set[int]:
        return {t.label for t in self._trials}

    def class_sizes(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for t in self._trials:
            out[t.label] = out.get(t.label, 0) + 1
        return dict(sorted(out.items()))

    def position(self, trial_id: int) -> int:
        return self._index[trial_id]

    def by_id(self, trial_id: int) -> Trial:
        return self._trials[self._index[trial_id]]

    def subset(self, ids: Iterable[int]) -> "TrialSet":
        """Trials with the given ids, in this set's order."""
        wanted = set(ids)
        missing = wanted - set(self._index)
        if missing:
            raise DataError(f"unknown trial ids: {sorted(missing)[:10]}")
        return TrialSet(t for t in self._trials if t.id in wanted)

    def min_length(self) -> int:
        return min(len(t) for t in self._trials)


@dataclass(frozen=True)
class SplitPlan:
    train_ids: tuple[int, ...]
    test_ids: tuple[int, ...]
    ratio: tuple[int, int]
    seed: int
    repetition_index: int

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "repetition": self.repetition_index,
            "train": list(self.train_ids),
            "test": list(self.test_ids),
        }

    @classmethod
    def from_json(cls, obj: dict, ratio=(2, 1)) -> "SplitPlan":
        return cls(
            train_ids=tuple(int(i) for i in obj["train"]),
            test_ids=tuple(int(i) for i in obj["test"]),
            ratio=tuple(ratio),
            seed=int(obj["seed"]),
            repetition_index=int(obj["repetition"]),
        )


# --------------------------------------------------------------------------
# file formats
# --------------------------------------------------------------------------

_NUM_RE = re.compile(r"^\s*[-+]?(\d+(\.\d*)?|\.\d+)([eE][-+]?\d+)?\s*$|^\s*[-+]?(nan|inf|infinity)\s*$", re.I)


def _is_number(cell: str) -> bool:
    return bool(_NUM_RE.match(cell))


def _parse_float(cell: str, row: int, col: int) -> float:
    try:
        v = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric cell {cell!r}", row=row, column=col) from None
    if not math.isfinite(v):
        raise DataError(f"non-finite amplitude {cell!r} at row {row}, column {col}")
    return v


def _parse_label(cell: str, row: int) -> int:
    try:
        f = float(cell)
    except ValueError:
        raise ParseError(f"non-numeric label {cell!r}", row=row, column=1) from None
    if not f.is_integer() or f < 0:
        raise ParseError(f"label must be a non-negative integer, got {cell!r}", row=row, column=1)
    return int(f)


def _select_channel(values: list[float], n_channels: int, channel: int | None, row: int) -> list[float]:
    if n_channels == 1:
        return values
    if len(values) % n_channels:
        raise ParseError(
            f"{len(values)} samples do not divide into {n_channels} channels", row=row
        )
    width = len(values) // n_channels
    return values[channel * width:(channel + 1) * width]


def _read_rows(text: str):
    rows = [r for r in csv.reader(io.StringIO(text))]
    # 1-based row numbers refer to physical lines, blank lines skipped
    return [(k + 1, r) for k, r in enumerate(rows) if any(c.strip() for c in r)]


def _check_channel(n_channels: int, channel: int | None) -> None:
    if n_channels < 1:
        raise ConfigError(f"n_channels must be >= 1, got {n_channels}")
    if n_channels > 1:
        if channel is None:
            raise ConfigError("multi-channel records need a channel index")
        if not 0 <= channel < n_channels:
            raise ConfigError(f"channel {channel} out of range for {n_channels} channels")
    elif channel not in (None, 0):
        raise ConfigError(f"channel {channel} out of range for single-channel records")


def _load_csv_rows(path: Path, n_channels: int, channel: int | None) -> list[Trial]:
    rows = _read_rows(path.read_text(encoding="utf-8"))
    if rows and not _is_number(rows[0][1][0]):
        rows = rows[1:]  # header
    trials = []
    for row_no, cells in rows:
        if len(cells) < 3:
            raise ParseError(
                f"expected a label and at least 2 samples, got {len(cells)} cells", row=row_no
            )
        label = _parse_label(cells[0], row_no)
        values = [_parse_float(c, row_no, j + 2) for j, c in enumerate(cells[1:])]
        values = _select_channel(values, n_channels, channel, row_no)
        trials.append(_make_trial(len(trials), label, values, row_no))
    return trials


def _label_from_stem(stem: str) -> int:
    m = re.search(r"(\d+)$", stem)
    if m is None:
        raise ParseError(f"cannot derive a class label from file name {stem!r}")
    return int(m.group(1))


def _load_labeled_dir(path: Path, n_channels: int, channel: int | None) -> list[Trial]:
    if not path.is_dir():
        raise DataError(f"{path} is not a directory")
    files = sorted(p for p in path.iterdir() if p.is_file() and not p.name.startswith("."))
    labeled = sorted(((_label_from_stem(p.stem), p) for p in files), key=lambda x: (x[0], x[1].name))
    trials = []
    for label, f in labeled:
        for row_no, cells in _read_rows(f.read_text(encoding="utf-8")):
            try:
                values = [_parse_float(c, row_no, j + 1) for j, c in enumerate(cells)]
            except ParseError as exc:
                raise ParseError(f"{f.name}: {exc}") from None
            values = _select_channel(values, n_channels, channel, row_no)
            trials.append(_make_trial(len(trials), label, values, row_no))
    return trials


def _make_trial(tid, label, values, row_no) -> Trial:
    try:
        return Trial(tid, label, values)
    except DataError as exc:
        raise DataError(f"row {row_no}: {exc}") from None


def load_trials(path, format: str = "csv-rows", channel: int | None = None, n_channels: int = 1) -> TrialSet:
    """Read trials from disk.

    Parameters
    ----------
    path : path-like
        A CSV file (``csv-rows``) or a directory with one file per class
        (``labeled-dir``; the trailing integer of each file stem is the label).
    format : {"csv-rows", "labeled-dir"}
    channel : int, optional
        Channel to keep when records hold ``n_channels`` concatenated,
        equal-width channel blocks.
    n_channels : int
        Number of channel blocks per record.

    Trial ids are assigned in reading order starting at 0.
    """
    path = Path(path)
    _check_channel(n_channels, channel)
    if not path.exists():
        raise DataError(f"no such file or directory: {path}")
    if format == "csv-rows":
        trials = _load_csv_rows(path, n_channels, channel)
    elif format == "labeled-dir":
        trials = _load_labeled_dir(path, n_channels, channel)
    else:
        raise ConfigError(f"unknown trial format {format!r}")
    if not trials:
        raise EmptyInputError(f"{path}: no trials found")
    return TrialSet(trials)


def trials_to_csv(trials: TrialSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for t in trials:
        w.writerow([t.label] + [repr(float(v)) for v in t.samples])
    return buf.getvalue()


def save_trials(trials: TrialSet, path) -> None:
    """Write trials as ``label,v1,...,vL`` rows (full float precision)."""
    Path(path).write_text(trials_to_csv(trials), encoding="utf-8")


# --------------------------------------------------------------------------
# synthetic data
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SynthConfig:
    """Synthetic trial generator settings.

    Each class has a smooth prototype made of two sinusoids with
    class-specific frequencies and phases. Clean trials are the prototype
    under a random amplitude gain and time shift, plus i.i.d. jitter.
    Noise trials are artifact-like: white Gaussian noise smoothed by a
    moving average of width ``noise_smooth`` and scaled to standard
    deviation ``noise_scale``. They carry the label of the class they
    replace but nothing of its shape.
    """

    classes: int = 2
    per_class: int = 20
    length: int = 64
    noise_fraction: float = 0.0
    seed: int = 0
    jitter: float = 0.45
    gain_spread: float = 0.3
    shift_spread: float = 0.1
    noise_scale: float = 4.0
    noise_smooth: int = 4

    def validate(self) -> None:
        if self.classes < 2:
            raise ConfigError(f"classes must be >= 2, got {self.classes}")
        if self.per_class < 2:
            raise ConfigError(f"per_class must be >= 2, got {self.per_class}")
        if self.length < 8:
            raise ConfigError(f"length must be >= 8, got {self.length}")
        if not 0.0 <= self.noise_fraction < 1.0:
            raise ConfigError(f"noise_fraction must lie in [0, 1), got {self.noise_fraction}")
        if self.noise_smooth < 1:
            raise ConfigError("noise_smooth must be >= 1")
        for name in ("jitter", "gain_spread", "shift_spread", "noise_scale"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.gain_spread >= 1:
            raise ConfigError("gain_spread must be < 1")

    @property
    def noise_per_class(self) -> int:
        return int(round(self.noise_fraction * self.per_class))


def _prototype(c: int, t: np.ndarray, shift: float = 0.0) -> np.ndarray:
    # distinct base frequency per class; the golden-ratio phase keeps
    # prototypes of neighbouring classes decorrelated
    f1 = 1.0 + c
    f2 = 2.5 + 1.5 * c
    ph = 2 * np.pi * ((0.618034 * (c + 1)) % 1.0)
    u = t - shift
    return np.sin(2 * np.pi * f1 * u + ph) + 0.5 * np.sin(2 * np.pi * f2 * u + 2 * ph)


def _noise(rng, length, scale, width):
    z = rng.standard_normal(length + width - 1)
    if width > 1:
        z = np.convolve(z, np.ones(width) / width, mode="valid")
        z = (z - z.mean()) / z.std()
    return scale * z


def synth_trials(config: SynthConfig | dict | None = None, **kwargs) -> TrialSet:
    """Generate a labeled synthetic trial set.

    Ids are assigned class by class. Within every class, a
    ``noise_fraction`` share of trials (chosen at random) is replaced by
    unstructured noise and flagged with ``meta["noise"] = True``.
    """
    if config is None:
        config = SynthConfig(**kwargs)
    elif isinstance(config, dict):
        config = SynthConfig(**{**config, **kwargs})
    config.validate()
    rng = np.random.default_rng(config.seed)
    t = np.arange(config.length) / config.length
    n_noise = config.noise_per_class
    trials = []
    for c in range(config.classes):
        noisy = set(rng.choice(config.per_class, size=n_noise, replace=False).tolist())
        for k in range(config.per_class):
            if k in noisy:
                x = _noise(rng, config.length, config.noise_scale, config.noise_smooth)
                meta = {"noise": True}
            else:
                gain = 1.0 + config.gain_spread * rng.uniform(-1, 1)
                shift = config.shift_spread * rng.uniform(-1, 1)
                x = gain * _prototype(c, t, shift) + config.jitter * rng.standard_normal(config.length)
                meta = {"noise": False}
            trials.append(Trial(len(trials), c, x, meta))
    return TrialSet(trials)


# --------------------------------------------------------------------------
# hold-out splitting
# --------------------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def holdout_split(trials: TrialSet, ratio=(2, 1), repetitions: int = 3, seed: int = 0) -> list[SplitPlan]:
    """Stratified train/test hold-out plans.

    Every class is split independently so that its train:test proportion
    matches ``ratio`` up to rounding of one trial; each repetition uses its
    own seed derived from ``seed``.
    """
    n_tr, n_te = (int(r) for r in ratio)
    if n_tr <= 0 or n_te <= 0:
        raise ConfigError(f"ratio parts must be positive, got {ratio}")
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    sizes = trials.class_sizes()
    for c, n in sizes.items():
        if n < 3:
            raise StratificationError(f"class {c} has {n} trials; stratified hold-out needs at least 3")
    by_class = {c: [t.id for t in trials if t.label == c] for c in sizes}
    seeds = np.random.SeedSequence(seed).spawn(repetitions)
    plans = []
    for rep, ss in enumerate(seeds):
        rng = np.random.default_rng(ss)
        train, test = [], []
        for c, ids in by_class.items():
            n = len(ids)
            k_test = _round_half_up(n * n_te / (n_tr + n_te))
            k_test = min(max(k_test, 1), n - 1)
            perm = rng.permutation(n)
            test.extend(ids[i] for i in perm[:k_test])
            train.extend(ids[i] for i in perm[k_test:])
        plans.append(SplitPlan(
            train_ids=tuple(sorted(train)),
            test_ids=tuple(sorted(test)),
            ratio=(n_tr, n_te),
            seed=int(ss.generate_state(1)[0]),
            repetition_index=rep,
        ))
    return plans


def dump_splits(plans: list[SplitPlan]) -> str:
    return json.dumps([p.to_json() for p in plans], indent=2)
