"""Column-typed datasets with an explicit missingness mask.

Missing cells are tracked by a boolean ``observed`` array per column, so the
value array can hold anything at a missing position (it is never read).
Columns and datasets are immutable; every operation returns a new object.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
EVENT_TIME = "event-time"
EVENT_INDICATOR = "event-indicator"
ENTRY_TIME = "entry-time"

KINDS = (CONTINUOUS, CATEGORICAL, EVENT_TIME, EVENT_INDICATOR, ENTRY_TIME)
_INTEGER_KINDS = (CATEGORICAL, EVENT_INDICATOR)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Column:
    """One typed column.

    Categorical values are integer codes into ``levels``; event indicators are
    0/1 integers; everything else is float64.
    """

    name: str
    kind: str
    values: np.ndarray
    observed: np.ndarray = None  # type: ignore[assignment]
    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"column {self.name!r}: unknown kind {self.kind!r}")
        dtype = np.int64 if self.kind in _INTEGER_KINDS else np.float64
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ValueError(f"column {self.name!r}: values must be 1-d")
        observed = (
            np.ones(len(values), dtype=bool)
            if self.observed is None
            else np.asarray(self.observed, dtype=bool)
        )
        if observed.shape != values.shape:
            raise ValueError(f"column {self.name!r}: mask length mismatch")
        values = np.where(observed, values, 0).astype(dtype)
        obs = values[observed]
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise ValueError(f"column {self.name!r}: categorical needs levels")
            object.__setattr__(self, "levels", tuple(str(lv) for lv in self.levels))
            if obs.size and (obs.min() < 0 or obs.max() >= len(self.levels)):
                raise ValueError(f"column {self.name!r}: code outside level list")
        elif self.levels is not None:
            raise ValueError(f"column {self.name!r}: levels only for categorical")
        if self.kind == EVENT_INDICATOR and obs.size and not np.isin(obs, (0, 1)).all():
            raise ValueError(f"column {self.name!r}: event indicator must be 0/1")
        if self.kind in (EVENT_TIME, ENTRY_TIME) and obs.size and obs.min() < 0:
            raise ValueError(f"column {self.name!r}: times must be non-negative")
        if dtype is np.float64 and obs.size and not np.isfinite(obs).all():
            raise ValueError(f"column {self.name!r}: non-finite value")
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "observed", _frozen(observed))

    def __len__(self):
        return len(self.values)

    @property
    def n_missing(self) -> int:
        return int(len(self.observed) - self.observed.sum())

    def replace(self, values=None, observed=None) -> "Column":
        return Column(
            self.name,
            self.kind,
            self.values if values is None else values,
            self.observed if observed is None else observed,
            self.levels,
        )

    def take(self, rows) -> "Column":
        return self.replace(self.values[rows], self.observed[rows])

    def same_as(self, other: "Column") -> bool:
        return (
            self.name == other.name
            and self.kind == other.kind
            and self.levels == other.levels
            and np.array_equal(self.observed, other.observed)
            and np.array_equal(self.values[self.observed], other.values[other.observed])
        )


def continuous(name, values, observed=None) -> Column:
    return Column(name, CONTINUOUS, values, observed)


def categorical(name, codes, levels, observed=None) -> Column:
    return Column(name, CATEGORICAL, codes, observed, tuple(levels))


@dataclass(frozen=True, eq=False)
class Dataset:
    columns: tuple[Column, ...]
    _index: dict = field(init=False, repr=False)

    def __init__(self, columns: Iterable[Column]):
        cols = tuple(columns)
        names = [c.name for c in cols]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate column names in {names}")
        if len({len(c) for c in cols}) > 1:
            raise ValueError("columns have unequal row counts")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "_index", {c.name: c for c in cols})
        self._check_entry_before_exit()

    def _check_entry_before_exit(self):
        entries = [c for c in self.columns if c.kind == ENTRY_TIME]
        exits = [c for c in self.columns if c.kind == EVENT_TIME]
        if len(entries) == 1 and len(exits) == 1:
            e, t = entries[0], exits[0]
            both = e.observed & t.observed
            if np.any(e.values[both] >= t.values[both]):
                raise ValueError(f"{e.name!r} must be < {t.name!r} on every row")

    @property
    def row_count(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def __getitem__(self, name: str) -> Column:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"no column named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.names == other.names and all(
            a.same_as(b) for a, b in zip(self.columns, other.columns)
        )

    def with_columns(self, *cols: Column) -> "Dataset":
        """Replace same-named columns in place, append new ones."""
        new = {c.name: c for c in cols}
        out = [new.pop(c.name, c) for c in self.columns]
        out.extend(c for c in cols if c.name in new)
        return Dataset(out)

    def take(self, rows) -> "Dataset":
        return Dataset(c.take(rows) for c in self.columns)

    def select(self, names: Sequence[str]) -> "Dataset":
        return Dataset(self[n] for n in names)

    def observed_matrix(self) -> np.ndarray:
        return np.column_stack([c.observed for c in self.columns])

    def incomplete_columns(self) -> list[str]:
        return [c.name for c in self.columns if c.n_missing]


class RngStream:
    """Deterministic random stream keyed by (seed, stream_id, sub-key path).

    Children are derived from the key path, not from draws, so the values a
    task sees do not depend on what other tasks did or in which order.
    """

    def __init__(self, seed: int, stream_id: int = 0, _path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        self._path = tuple(_path)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id, *self._path))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def child(self, key: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id, (*self._path, int(key)))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, path={self._path})"


def mask_cells(
    ds: Dataset,
    targets: Sequence[str],
    p_observed: float,
    rng: RngStream,
    row_joint: bool = True,
) -> Dataset:
    """MCAR-mask ``targets``: each row kept observed with prob ``p_observed``.

    With ``row_joint`` a single draw per row decides all targets together;
    otherwise each target cell gets its own draw.
    """
    for t in targets:
        ds[t]
    if not 0 < p_observed <= 1:
        raise ValueError(f"p_observed must be in (0, 1], got {p_observed}")
    n = ds.row_count
    if row_joint:
        keep = rng.gen.random(n) < p_observed
        draws = {t: keep for t in targets}
    else:
        draws = {t: rng.gen.random(n) < p_observed for t in targets}
    return ds.with_columns(
        *(ds[t].replace(observed=ds[t].observed & draws[t]) for t in targets)
    )


def complete_rows(ds: Dataset, columns: Sequence[str] | None = None) -> Dataset:
    names = ds.names if columns is None else list(columns)
    keep = np.ones(ds.row_count, dtype=bool)
    for name in names:
        keep &= ds[name].observed
    return ds.take(np.flatnonzero(keep))


def _fmt(col: Column, i: int) -> str:
    if not col.observed[i]:
        return ""
    v = col.values[i]
    if col.kind == CATEGORICAL:
        return col.levels[v]
    if col.kind == EVENT_INDICATOR:
        return str(int(v))
    return repr(float(v))


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(ds.names)
        for i in range(ds.row_count):
            w.writerow([_fmt(c, i) for c in ds.columns])


def read_csv(path, schema: Mapping[str, str | Sequence[str]] | None = None) -> Dataset:
    """Read a CSV written by :func:`write_csv`.

    ``schema`` maps column name to a kind, or to a level list for categorical
    columns.  Unlisted columns are continuous when every non-empty field parses
    as a float, otherwise categorical with levels in order of first appearance.
    """
    schema = dict(schema or {})
    with open(Path(path), newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = []
    for j, name in enumerate(header):
        raw = [r[j] for r in body]
        observed = np.array([s != "" for s in raw], dtype=bool)
        spec = schema.get(name)
        if spec is None:
            try:
                [float(s) for s in raw if s]
                spec = CONTINUOUS
            except ValueError:
                spec = list(dict.fromkeys(s for s in raw if s))
        if isinstance(spec, str):
            vals = np.array([float(s) if s else 0.0 for s in raw])
            cols.append(Column(name, spec, vals, observed))
        else:
            levels = [str(s) for s in spec]
            lookup = {lv: k for k, lv in enumerate(levels)}
            try:
                codes = np.array([lookup[s] if s else 0 for s in raw], dtype=np.int64)
            except KeyError as e:
                raise ValueError(f"column {name!r}: unknown level {e.args[0]!r}") from None
            cols.append(Column(name, CATEGORICAL, codes, observed, levels))
    return Dataset(cols)
