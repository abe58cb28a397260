"""Datasets: synthetic generators, CSV ingestion, rescaling, splitting.

All generators are pure functions of their seed.  The CSV schema is
long-format with a mandatory header::

    series_id,t,f1[,f2[,f3]][,value_usd][,label]

one row per (series, time point); ``label`` is one of normal / anomalous /
unknown (empty means unlabeled) and ``value_usd`` is an optional constant
per-series annotation carried through for reporting.  Floats are written
with full round-trip precision and LF line endings; CRLF is tolerated on
read.
"""

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError

LABELS = ("normal", "anomalous", "unknown")

MAX_FEATURES = 3


@dataclass
class TimeSeries:
    """One d-dimensional series: values[j] observed at times[j]."""

    id: str
    times: np.ndarray
    values: np.ndarray
    label: str | None = None
    value_usd: float | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim == 1:
            self.values = self.values[:, None]
        if self.times.ndim != 1 or self.values.shape[0] != self.times.shape[0]:
            raise DataError(
                f"series {self.id!r}: times {self.times.shape} and values "
                f"{self.values.shape} are inconsistent"
            )
        if np.any(np.diff(self.times) <= 0):
            raise DataError(f"series {self.id!r}: times must be strictly increasing")
        if not (np.all(np.isfinite(self.times)) and np.all(np.isfinite(self.values))):
            raise DataError(f"series {self.id!r}: non-finite entries")
        if self.label is not None and self.label not in LABELS:
            raise DataError(f"series {self.id!r}: unknown label {self.label!r}")

    @property
    def p(self) -> int:
        return self.times.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass
class Dataset:
    """Homogeneous collection of series (common point count and dimension)."""

    series: list
    name: str = ""
    rescaled: bool = False

    def __post_init__(self):
        if not self.series:
            raise DataError(f"dataset {self.name!r} has no series")
        p, d = self.series[0].p, self.series[0].d
        for s in self.series:
            if (s.p, s.d) != (p, d):
                raise DataError(
                    f"dataset {self.name!r}: series {s.id!r} has shape ({s.p}, {s.d}), "
                    f"expected ({p}, {d})"
                )
        ids = [s.id for s in self.series]
        if len(set(ids)) != len(ids):
            raise DataError(f"dataset {self.name!r}: duplicate series ids")

    @property
    def m(self) -> int:
        return len(self.series)

    @property
    def p(self) -> int:
        return self.series[0].p

    @property
    def d(self) -> int:
        return self.series[0].d

    def values_array(self) -> np.ndarray:
        """All values stacked to shape (m, p, d)."""
        return np.stack([s.values for s in self.series])


# ---------------------------------------------------------------------------
# synthetic generators


def _series_list(values, times, prefix, label, start=0):
    return [
        TimeSeries(id=f"{prefix}{start + i:03d}", times=times, values=v, label=label)
        for i, v in enumerate(values)
    ]


def gen_gaussian(
    m: int = 50, p: int = 50, noise_std: float = 0.1, seed: int = 0, name: str = "gaussian"
) -> Dataset:
    """iid zero-centered Gaussian noise series on the integer grid 0..p-1."""
    rng = np.random.default_rng(seed)
    times = np.arange(p, dtype=float)
    values = rng.standard_normal((m, p, 1)) * noise_std
    return Dataset(_series_list(values, times, name[:1], "normal"), name=name)


@dataclass(frozen=True)
class SpikeParams:
    """Rectangular-spike insertion knobs.

    Every series draws a severity u ~ U(0, 1) that scales its spike
    frequency (``rate * (1 - rate_spread + 2 * rate_spread * u)``) and the
    upper ends of its duration and amplitude ranges, so a population of
    series spans mild single-blip cases through heavily spiked ones — this
    per-series spread is what stretches anomaly scores over orders of
    magnitude.  Spike signs are random; ``min_spikes`` forces at least that
    many starts so no nominally anomalous series degenerates to pure noise.
    """

    rate: float = 0.12
    duration: tuple = (1, 10)
    amplitude: tuple = (0.7, 3.0)
    rate_spread: float = 0.8
    min_spikes: int = 1

    def __post_init__(self):
        if not 0.0 <= self.rate < 1.0:
            raise ValueError(f"rate must lie in [0, 1), got {self.rate}")
        if not 0.0 <= self.rate_spread <= 1.0:
            raise ValueError(f"rate_spread must lie in [0, 1], got {self.rate_spread}")
        if self.duration[0] < 1 or self.duration[1] < self.duration[0]:
            raise ValueError(f"bad duration range {self.duration}")
        if self.amplitude[1] < self.amplitude[0]:
            raise ValueError(f"bad amplitude range {self.amplitude}")
        if self.min_spikes < 0:
            raise ValueError("min_spikes must be >= 0")


def gen_spikes(
    m: int = 50,
    p: int = 50,
    noise_std: float = 0.1,
    spike_params: SpikeParams = SpikeParams(),
    seed: int = 0,
    name: str = "spikes",
) -> Dataset:
    """Gaussian base plus randomly placed rectangular spikes.

    With rate 0 no spiking happens at all, reproducing :func:`gen_gaussian`
    for the same seed (the base draw comes first and uses the identical
    call sequence).
    """
    rng = np.random.default_rng(seed)
    times = np.arange(p, dtype=float)
    values = rng.standard_normal((m, p, 1)) * noise_std
    sp = spike_params
    for i in range(m):
        if sp.rate == 0.0:
            continue
        severity = float(rng.random())
        rate_i = sp.rate * (1.0 - sp.rate_spread + 2.0 * sp.rate_spread * severity)
        dur_hi = int(round(sp.duration[0] + severity * (sp.duration[1] - sp.duration[0])))
        amp_hi = sp.amplitude[0] + severity * (sp.amplitude[1] - sp.amplitude[0])
        starts = np.flatnonzero(rng.random(p) < rate_i)
        if starts.size < sp.min_spikes:
            extra = rng.choice(
                np.setdiff1d(np.arange(p), starts), sp.min_spikes - starts.size, replace=False
            )
            starts = np.sort(np.concatenate([starts, extra]))
        for s in starts:
            dur = int(rng.integers(sp.duration[0], dur_hi + 1))
            amp = float(rng.uniform(sp.amplitude[0], amp_hi))
            sign = 1.0 - 2.0 * float(rng.integers(0, 2))
            values[i, s : s + dur, 0] += sign * amp
    return Dataset(_series_list(values, times, name[:1], "anomalous"), name=name)


def gen_sine_added(
    m: int = 50, p: int = 50, noise_std: float = 0.1, seed: int = 0, name: str = "sine"
) -> Dataset:
    """Gaussian base plus sin(t) on the integer grid."""
    rng = np.random.default_rng(seed)
    times = np.arange(p, dtype=float)
    values = rng.standard_normal((m, p, 1)) * noise_std + np.sin(times)[None, :, None]
    return Dataset(_series_list(values, times, name[:1], "anomalous"), name=name)


_SINUSOID_POINTS = 51


def _sinusoid_values(rng, m, wave, offset_mean, offset_std):
    times = np.linspace(0.0, 2.0 * np.pi, _SINUSOID_POINTS)
    offsets = offset_mean + offset_std * rng.standard_normal(m)
    values = wave(times)[None, :, None] + offsets[:, None, None]
    return times, values


def gen_noisy_sinusoids(
    m: int = 100,
    seed: int = 0,
    name: str = "sinusoids",
    offset_mean: float = 0.1,
    offset_std: float = 0.1,
) -> Dataset:
    """Training set: sin over [0, 2pi] (51 points) plus one constant offset
    per series drawn from Normal(offset_mean, offset_std)."""
    rng = np.random.default_rng(seed)
    times, values = _sinusoid_values(rng, m, np.sin, offset_mean, offset_std)
    return Dataset(_series_list(values, times, "s", "normal"), name=name)


def gen_sinusoid_tests(kind: str, seed: int = 0, m: int = 50) -> Dataset:
    """Sinusoid test sets.

    R: fresh draws of the training mechanism (sin, offsets N(0.1, 0.1));
    W: cos with offsets N(0.1, 0.1) — same offsets as R for a given seed;
    Z: sin with wide offsets N(0.1, 0.5).
    """
    rng = np.random.default_rng(seed)
    if kind == "R":
        times, values = _sinusoid_values(rng, m, np.sin, 0.1, 0.1)
        label = "normal"
    elif kind == "W":
        times, values = _sinusoid_values(rng, m, np.cos, 0.1, 0.1)
        label = "normal"
    elif kind == "Z":
        times, values = _sinusoid_values(rng, m, np.sin, 0.1, 0.5)
        label = "anomalous"
    else:
        raise ValueError(f"kind must be one of R, W, Z; got {kind!r}")
    return Dataset(_series_list(values, times, kind.lower(), label), name=kind)


def gen_blobs(
    count: int = 100,
    std: float = np.pi / 4,
    center: tuple = (3 * np.pi / 2, 3 * np.pi / 2),
    seed: int = 0,
    name: str = "blobs",
) -> Dataset:
    """Isotropic 2-D Gaussian cluster as single-time-point series (t = 1)."""
    rng = np.random.default_rng(seed)
    times = np.array([1.0])
    pts = np.asarray(center, dtype=float)[None, :] + std * rng.standard_normal((count, 2))
    values = pts[:, None, :]
    return Dataset(_series_list(values, times, "b", "normal"), name=name)


# ---------------------------------------------------------------------------
# CSV ingestion


def _parse_header(header, path):
    cols = [c.strip() for c in header]
    if len(cols) < 3 or cols[0] != "series_id" or cols[1] != "t":
        raise DataError(
            f"{path}: header must start with 'series_id,t,f1', got {','.join(cols)!r}"
        )
    d = 0
    pos = 2
    while pos < len(cols) and cols[pos] == f"f{d + 1}":
        d += 1
        pos += 1
    if d == 0:
        raise DataError(f"{path}: missing feature column 'f1'")
    if d > MAX_FEATURES:
        raise DataError(f"{path}: at most {MAX_FEATURES} feature columns supported")
    has_value = pos < len(cols) and cols[pos] == "value_usd"
    pos += 1 if has_value else 0
    has_label = pos < len(cols) and cols[pos] == "label"
    pos += 1 if has_label else 0
    if pos != len(cols):
        raise DataError(f"{path}: unexpected column {cols[pos]!r}")
    return d, has_value, has_label


def load_csv(path, allow_empty: bool = False) -> Dataset | None:
    """Read a long-format dataset, grouping rows by series and sorting by t.

    Raises DataError (with the offending row number) for parse failures,
    ragged series, or duplicate time points within a series.  With
    ``allow_empty`` a file holding only a valid header yields None instead
    of an error.
    """
    path = Path(path)
    groups: dict[str, dict] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        d, has_value, has_label = _parse_header(header, path)
        width = 2 + d + int(has_value) + int(has_label)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}:{lineno}: expected {width} fields, got {len(row)}")
            sid = row[0]
            try:
                t = float(row[1])
                feats = [float(v) for v in row[2 : 2 + d]]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            g = groups.setdefault(
                sid, {"t": [], "x": [], "rows": [], "value_usd": None, "label": None}
            )
            g["t"].append(t)
            g["x"].append(feats)
            g["rows"].append(lineno)
            pos = 2 + d
            if has_value:
                raw = row[pos]
                val = None
                if raw != "":
                    try:
                        val = float(raw)
                    except ValueError as exc:
                        raise DataError(f"{path}:{lineno}: {exc}") from None
                if g["rows"][0] == lineno:
                    g["value_usd"] = val
                elif val != g["value_usd"]:
                    raise DataError(
                        f"{path}:{lineno}: value_usd changes within series {sid!r}"
                    )
                pos += 1
            if has_label:
                label = row[pos] or None
                if label is not None and label not in LABELS:
                    raise DataError(f"{path}:{lineno}: unknown label {label!r}")
                if g["rows"][0] == lineno:
                    g["label"] = label
                elif label != g["label"]:
                    raise DataError(f"{path}:{lineno}: label changes within series {sid!r}")

    if not groups:
        if allow_empty:
            return None
        raise DataError(f"{path}: no data rows")
    series = []
    for sid, g in groups.items():
        order = np.argsort(np.asarray(g["t"]), kind="stable")
        times = np.asarray(g["t"])[order]
        dup = np.flatnonzero(np.diff(times) <= 0)
        if dup.size:
            bad_row = np.asarray(g["rows"])[order][dup[0] + 1]
            raise DataError(
                f"{path}:{bad_row}: duplicate or non-increasing t in series {sid!r}"
            )
        values = np.asarray(g["x"])[order]
        series.append(
            TimeSeries(
                id=sid, times=times, values=values, label=g["label"], value_usd=g["value_usd"]
            )
        )
    try:
        return Dataset(series, name=path.stem)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def save_csv(ds: Dataset, path) -> None:
    """Write a dataset in the long-format schema with round-trip precision."""
    path = Path(path)
    has_value = any(s.value_usd is not None for s in ds.series)
    has_label = any(s.label is not None for s in ds.series)
    header = ["series_id", "t"] + [f"f{k + 1}" for k in range(ds.d)]
    if has_value:
        header.append("value_usd")
    if has_label:
        header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for s in ds.series:
            for j in range(s.p):
                row = [s.id, repr(float(s.times[j]))]
                row += [repr(float(v)) for v in s.values[j]]
                if has_value:
                    row.append("" if s.value_usd is None else repr(float(s.value_usd)))
                if has_label:
                    row.append(s.label or "")
                writer.writerow(row)


# ---------------------------------------------------------------------------
# transforms


def minmax_rescale(ds: Dataset) -> Dataset:
    """Per (time point, feature), map the across-series max to pi and min
    to -pi, affinely in between.

    Degenerate slots (max == min) map to 0 with a warning; requires at
    least two series.
    """
    if ds.m < 2:
        raise DataError("minmax_rescale needs at least 2 series")
    stacked = ds.values_array()
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    span = hi - lo
    degenerate = span == 0
    if np.any(degenerate):
        warnings.warn(
            f"dataset {ds.name!r}: {int(degenerate.sum())} constant (t, feature) "
            "slots rescaled to 0",
            stacklevel=2,
        )
        span = np.where(degenerate, 1.0, span)
    # ratio first: the endpoints then map to exactly -pi and pi
    scaled = 2.0 * np.pi * ((stacked - lo[None]) / span[None]) - np.pi
    scaled[:, degenerate] = 0.0
    series = [
        TimeSeries(id=s.id, times=s.times, values=scaled[i], label=s.label, value_usd=s.value_usd)
        for i, s in enumerate(ds.series)
    ]
    return Dataset(series, name=ds.name, rescaled=True)


def split(ds: Dataset, fractions, seed: int = 0):
    """Disjoint, exhaustive (train, validation, test) split by seeded shuffle."""
    fractions = np.asarray(fractions, dtype=float)
    if fractions.shape != (3,) or np.any(fractions < 0) or fractions.sum() == 0:
        raise ValueError(f"fractions must be 3 nonnegative numbers, got {fractions}")
    fractions = fractions / fractions.sum()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(ds.m)
    b1 = int(round(fractions[0] * ds.m))
    b2 = int(round((fractions[0] + fractions[1]) * ds.m))
    parts = (perm[:b1], perm[b1:b2], perm[b2:])
    out = []
    for idx, suffix in zip(parts, ("train", "val", "test")):
        if idx.size == 0:
            out.append(None)
        else:
            out.append(
                Dataset(
                    [ds.series[i] for i in sorted(idx)],
                    name=f"{ds.name}-{suffix}" if ds.name else suffix,
                    rescaled=ds.rescaled,
                )
            )
    return tuple(out)
