"""Data ingestion, preprocessing and the statistics pipeline used by the CLI."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InputError
from .spectral import (
    SpectralStatistics,
    TimeSeriesPanel,
    aggregate_periodogram,
    bartlett_split,
    daniell_smooth,
    fold_conjugate_pairs,
    piecewise_bin,
)

__all__ = [
    "Smoothing",
    "build_statistics",
    "default_g",
    "ingest_csv",
    "log_return_transform",
    "predictive_statistics",
    "write_csv",
]

MISSING = {"", "na", "nan", "null", "none"}


def _read_one(path: Path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}", module="cli") from exc
    if not rows:
        raise InputError(f"{path}: empty file", module="cli")
    header = [h.strip() for h in rows[0]]
    p = len(header)
    data = np.empty((len(rows) - 1, p))
    for t, row in enumerate(rows[1:]):
        if len(row) != p:
            raise InputError(f"{path}: row {t + 2} has {len(row)} cells, expected {p}", module="cli")
        for j, cell in enumerate(row):
            cell = cell.strip()
            if cell.lower() in MISSING:
                if t == 0:
                    raise InputError(f"{path}: leading missing value in column {header[j]!r}", module="cli")
                data[t, j] = data[t - 1, j]
                continue
            try:
                data[t, j] = float(cell)
            except ValueError:
                raise InputError(f"{path}: non-numeric cell {cell!r} at row {t + 2}, column {header[j]!r}", module="cli") from None
            if not math.isfinite(data[t, j]):
                raise InputError(f"{path}: non-finite cell at row {t + 2}, column {header[j]!r}", module="cli")
    return header, data


def ingest_csv(paths: Sequence[str | Path]) -> TimeSeriesPanel:
    """One CSV per replicate: a header of column names, one row per timepoint.

    A missing cell takes the value from the previous timepoint of the same
    column; a missing first row is an error.
    """
    if not paths:
        raise InputError("no data files given", module="cli")
    header0, first = _read_one(Path(paths[0]))
    blocks = [first]
    for path in paths[1:]:
        header, data = _read_one(Path(path))
        if header != header0:
            raise InputError(f"{path}: header {header} differs from {paths[0]} header {header0}", module="cli")
        if data.shape[0] != first.shape[0]:
            raise InputError(f"{path}: {data.shape[0]} rows but {paths[0]} has {first.shape[0]}", module="cli")
        blocks.append(data)
    return TimeSeriesPanel(np.stack(blocks), columns=tuple(header0))


def write_csv(path: str | Path, data: np.ndarray, columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in data:
            w.writerow([repr(float(v)) for v in row])


def log_return_transform(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """``100 * log(p_t / p_{t-1})`` along time; the output is one row shorter."""
    if np.any(panel.data <= 0):
        raise InputError("log returns need strictly positive prices", module="cli")
    r = 100.0 * np.diff(np.log(panel.data), axis=1)
    return TimeSeriesPanel(r, columns=panel.columns)


@dataclass(frozen=True)
class Smoothing:
    """One of ``none``, ``daniell:m``, ``bartlett:M`` or ``piecewise:M``.

    A missing parameter is filled from ``T``: ``m = floor(sqrt(T)/2)`` for
    Daniell, ``M = floor(sqrt(T))`` otherwise.
    """

    mode: str
    param: int | None = None

    @classmethod
    def parse(cls, text: str) -> Smoothing:
        mode, _, arg = text.strip().lower().partition(":")
        if mode not in {"none", "daniell", "bartlett", "piecewise"}:
            raise ConfigError(f"unknown smoothing {text!r}", module="cli")
        if mode == "none":
            if arg:
                raise ConfigError("smoothing 'none' takes no parameter", module="cli")
            return cls("none")
        if not arg:
            return cls(mode)
        try:
            val = int(arg)
        except ValueError:
            raise ConfigError(f"smoothing parameter must be an integer, got {arg!r}", module="cli") from None
        if val < (0 if mode == "daniell" else 1):
            raise ConfigError(f"smoothing parameter out of range: {text!r}", module="cli")
        return cls(mode, val)

    @classmethod
    def default_for(cls, N: int) -> Smoothing:
        return cls("piecewise") if N == 1 else cls("none")

    def resolve(self, T: int) -> Smoothing:
        if self.mode == "none" or self.param is not None:
            return self
        root = math.isqrt(T)
        return Smoothing(self.mode, root // 2 if self.mode == "daniell" else root)

    def __str__(self) -> str:
        return self.mode if self.param is None else f"{self.mode}:{self.param}"


def build_statistics(panel: TimeSeriesPanel, smoothing: Smoothing, *, keep_dc: bool = False, fold: bool = True) -> SpectralStatistics:
    """Panel to scoring statistics under the chosen smoothing mode."""
    sm = smoothing.resolve(panel.T)
    if sm.mode == "bartlett":
        segments = [bartlett_split(panel.data[n], sm.param).data for n in range(panel.N)]
        panel = TimeSeriesPanel(np.concatenate(segments), columns=panel.columns)
    stats = aggregate_periodogram(panel, keep_dc=keep_dc)
    if sm.mode == "daniell":
        stats = daniell_smooth(stats, sm.param)
    elif sm.mode == "piecewise":
        stats = piecewise_bin(stats, sm.param)
    if fold:
        stats = fold_conjugate_pairs(stats)
    return stats


def default_g(stats: SpectralStatistics) -> float:
    """``4 / n`` where ``n`` is the smallest per-entry count (``N`` without smoothing)."""
    n = float(stats.dof.min())
    g = 4.0 / n
    if not g < 1:
        raise ConfigError(
            f"default fractional parameter 4/{n:g} is not below 1; pass --g or use more replicates/smoothing",
            module="cli",
        )
    return g


def predictive_statistics(train: TimeSeriesPanel, test: TimeSeriesPanel, m: int | None = None) -> tuple[SpectralStatistics, SpectralStatistics]:
    """Daniell-smoothed training statistics (the prior) and raw test periodograms."""
    if train.T != test.T or train.p != test.p:
        raise InputError(f"train (T={train.T}, p={train.p}) and test (T={test.T}, p={test.p}) are misaligned", module="cli")
    sm = Smoothing("daniell", m).resolve(train.T)
    tr = fold_conjugate_pairs(daniell_smooth(aggregate_periodogram(train), sm.param))
    te = aggregate_periodogram(test)
    index = {r: i for i, r in enumerate(te.freq_ranges)}
    te = te.subset([index[r] for r in tr.freq_ranges])
    return tr, replace(te, weights=tr.weights.copy())
