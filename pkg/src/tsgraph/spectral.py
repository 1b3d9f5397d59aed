"""Frequency-domain sufficient statistics for multivariate series.

A :class:`SpectralStatistics` is a list of entries, each holding a Hermitian
``p x p`` sum of periodograms and the number of periodogram terms (or the
smoother's effective sample size) behind it. Entries may also carry a
multiplicity ``weight``: folding conjugate-symmetric frequency pairs keeps one
representative with weight 2.

DFT convention: ``d_k = (1/T) sum_t x_t exp(-2 pi i k t / T)``.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = [
    "SpectralStatistics",
    "TimeSeriesPanel",
    "aggregate_periodogram",
    "bartlett_split",
    "daniell_smooth",
    "dft_coefficients",
    "dft_direct",
    "fold_conjugate_pairs",
    "load_cache",
    "piecewise_bin",
    "save_cache",
]

CACHE_MAGIC = b"TSGRAPH-SPECSTAT"  # 16 bytes
CACHE_VERSION = 1


@dataclass(frozen=True)
class TimeSeriesPanel:
    """``N`` independent replicates of a length-``T``, ``p``-variate series.

    ``data`` has shape ``(N, T, p)``.
    """

    data: np.ndarray
    mean_centered: bool = False
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim == 2:
            data = data[None]
        if data.ndim != 3:
            raise InputError(f"panel data must be (N, T, p), got shape {data.shape}", module="spectral")
        if not np.all(np.isfinite(data)):
            raise InputError("panel contains non-finite values", module="spectral")
        object.__setattr__(self, "data", data)
        if self.columns is not None and len(self.columns) != data.shape[2]:
            raise InputError("column names do not match panel dimension", module="spectral")

    @property
    def N(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    @property
    def p(self) -> int:
        return self.data.shape[2]

    def centered(self) -> TimeSeriesPanel:
        if self.mean_centered:
            return self
        data = self.data - self.data.mean(axis=1, keepdims=True)
        return replace(self, data=data, mean_centered=True)


@dataclass(frozen=True)
class SpectralStatistics:
    """Per-frequency (or per-bin) Hermitian statistics and their counts.

    Attributes
    ----------
    stats
        Complex array ``(K, p, p)``; entry ``k`` is a sum of periodograms.
    dof
        Real array ``(K,)``; periodogram terms (or effective sample size)
        behind each entry.
    freq_ranges
        Inclusive Fourier index range ``(lo, hi)`` covered by each entry.
    weights
        Multiplicity of each entry in a likelihood product (1 unless folded).
    """

    stats: np.ndarray
    dof: np.ndarray
    freq_ranges: tuple[tuple[int, int], ...]
    T: int
    N: int
    excluded_frequencies: tuple[int, ...] = ()
    weights: np.ndarray | None = None
    kind: str = "periodogram"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        stats = np.asarray(self.stats, dtype=complex)
        dof = np.asarray(self.dof, dtype=float).reshape(-1)
        if stats.ndim != 3 or stats.shape[1] != stats.shape[2]:
            raise InputError(f"stats must be (K, p, p), got {stats.shape}", module="spectral")
        if dof.shape[0] != stats.shape[0] or len(self.freq_ranges) != stats.shape[0]:
            raise InputError("stats, dof and freq_ranges disagree on entry count", module="spectral")
        if np.any(dof < 0):
            raise InputError("negative degrees of freedom", module="spectral")
        weights = np.ones(len(dof)) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "stats", stats)
        object.__setattr__(self, "dof", dof)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "freq_ranges", tuple((int(a), int(b)) for a, b in self.freq_ranges))
        object.__setattr__(self, "excluded_frequencies", tuple(int(k) for k in self.excluded_frequencies))

    @property
    def p(self) -> int:
        return self.stats.shape[1]

    @property
    def num_entries(self) -> int:
        return self.stats.shape[0]

    @property
    def total_dof(self) -> float:
        return float(np.dot(self.weights, self.dof))

    def check_hermitian_psd(self, rtol: float = 1e-10) -> None:
        """Raise if any entry is not Hermitian PSD within tolerance."""
        for k, s in enumerate(self.stats):
            scale = max(np.abs(s).max(), 1e-300)
            if np.abs(s - s.conj().T).max() > rtol * scale:
                raise InputError(f"entry {k} is not Hermitian", module="spectral")
            tr = np.trace(s).real
            eig = np.linalg.eigvalsh(0.5 * (s + s.conj().T))
            if eig.min() < -rtol * max(tr, 1e-300) / self.p:
                raise InputError(f"entry {k} is not positive semidefinite", module="spectral")

    def subset(self, index) -> SpectralStatistics:
        idx = np.arange(self.num_entries)[index]
        return replace(
            self,
            stats=self.stats[idx],
            dof=self.dof[idx],
            weights=self.weights[idx],
            freq_ranges=tuple(self.freq_ranges[i] for i in idx),
        )

    def to_json(self) -> dict:
        return {
            "T": self.T,
            "N": self.N,
            "p": self.p,
            "kind": self.kind,
            "excluded_frequencies": list(self.excluded_frequencies),
            "meta": self.meta,
            "entries": [
                {
                    "freq_index_range": list(r),
                    "dof": float(d),
                    "weight": float(w),
                    "stat": [[[float(z.real), float(z.imag)] for z in row] for row in s],
                }
                for r, d, w, s in zip(self.freq_ranges, self.dof, self.weights, self.stats)
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> SpectralStatistics:
        entries = obj["entries"]
        p = int(obj["p"])
        if entries:
            arr = np.array([e["stat"] for e in entries], dtype=float)
            stats = arr[..., 0] + 1j * arr[..., 1]
        else:
            stats = np.zeros((0, p, p), dtype=complex)
        return cls(
            stats=stats,
            dof=[e["dof"] for e in entries],
            weights=[e.get("weight", 1.0) for e in entries],
            freq_ranges=[tuple(e["freq_index_range"]) for e in entries],
            T=int(obj["T"]),
            N=int(obj["N"]),
            excluded_frequencies=obj.get("excluded_frequencies", ()),
            kind=obj.get("kind", "periodogram"),
            meta=obj.get("meta", {}),
        )


def save_cache(stats: SpectralStatistics, path: str | Path) -> None:
    """Binary cache: magic, version byte, little-endian JSON header length,
    JSON header, then ``(K, p, p)`` interleaved re/im float64 row-major."""
    header = stats.to_json()
    header.pop("entries")
    header["K"] = stats.num_entries
    header["dof"] = stats.dof.tolist()
    header["weights"] = stats.weights.tolist()
    header["freq_ranges"] = [list(r) for r in stats.freq_ranges]
    blob = json.dumps(header).encode()
    body = np.ascontiguousarray(stats.stats).astype("<c16").tobytes()
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(bytes([CACHE_VERSION]))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(body)


def load_cache(path: str | Path) -> SpectralStatistics:
    raw = Path(path).read_bytes()
    if raw[:16] != CACHE_MAGIC:
        raise InputError(f"{path}: not a spectral statistics cache", module="spectral")
    if raw[16] != CACHE_VERSION:
        raise InputError(f"{path}: unsupported cache version {raw[16]}", module="spectral")
    (n,) = struct.unpack("<I", raw[17:21])
    header = json.loads(raw[21 : 21 + n])
    K, p = header["K"], header["p"]
    stats = np.frombuffer(raw[21 + n :], dtype="<c16")
    if stats.size != K * p * p:
        raise InputError(f"{path}: truncated cache body", module="spectral")
    return SpectralStatistics(
        stats=stats.reshape(K, p, p).astype(complex),
        dof=header["dof"],
        weights=header["weights"],
        freq_ranges=[tuple(r) for r in header["freq_ranges"]],
        T=header["T"],
        N=header["N"],
        excluded_frequencies=header["excluded_frequencies"],
        kind=header["kind"],
        meta=header["meta"],
    )


def dft_coefficients(series: np.ndarray) -> np.ndarray:
    """FFT along time with 1/T scaling; ``series`` is ``(T, p)`` or ``(N, T, p)``."""
    x = np.asarray(series, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InputError("series contains non-finite values", module="spectral")
    axis = x.ndim - 2 if x.ndim >= 2 else 0
    T = x.shape[axis]
    if T < 2:
        raise InputError(f"need at least 2 timepoints, got {T}", module="spectral")
    return np.fft.fft(x, axis=axis) / T


def dft_direct(series: np.ndarray) -> np.ndarray:
    """O(T^2) reference DFT for a ``(T, p)`` series; used by tests only."""
    x = np.asarray(series, dtype=float)
    T = x.shape[0]
    t = np.arange(T)
    kernel = np.exp(-2j * np.pi * np.outer(t, t) / T)
    return kernel @ x / T


def aggregate_periodogram(panel: TimeSeriesPanel, *, keep_dc: bool = False) -> SpectralStatistics:
    """Sum of periodograms over replicates, one entry per Fourier index.

    The panel is mean-centred and index 0 dropped unless ``keep_dc`` is set,
    in which case the data are used as given and index 0 is retained.
    """
    if panel.N == 0:
        raise InputError("panel has no replicates", module="spectral")
    if panel.T < 2:
        raise InputError(f"need at least 2 timepoints, got {panel.T}", module="spectral")
    if not keep_dc:
        panel = panel.centered()
    d = dft_coefficients(panel.data)  # (N, T, p)
    P = np.einsum("nki,nkj->kij", d, d.conj())
    first = 0 if keep_dc else 1
    ks = range(first, panel.T)
    return SpectralStatistics(
        stats=P[first:],
        dof=np.full(panel.T - first, float(panel.N)),
        freq_ranges=[(k, k) for k in ks],
        T=panel.T,
        N=panel.N,
        excluded_frequencies=() if keep_dc else (0,),
        kind="periodogram",
    )


def _is_per_frequency(stats: SpectralStatistics) -> bool:
    return all(lo == hi for lo, hi in stats.freq_ranges)


def daniell_smooth(stats: SpectralStatistics, m: int) -> SpectralStatistics:
    """Daniell window of half-width ``m``: each entry becomes the sum of its
    ``2m + 1`` neighbours, wrapping around the retained-frequency circle.

    The effective sample size of each entry is ``2m + 1`` times its
    original count.
    """
    if m < 0:
        raise InputError(f"Daniell half-width must be nonnegative, got {m}", module="spectral")
    if not _is_per_frequency(stats) or stats.kind != "periodogram":
        raise InputError("Daniell smoothing needs unsmoothed per-frequency statistics", module="spectral")
    K = stats.num_entries
    if 2 * m + 1 > K:
        raise InputError(f"window 2m+1={2 * m + 1} exceeds {K} retained frequencies", module="spectral")
    P = stats.stats
    out = P.copy()
    dof = stats.dof.copy()
    for j in range(1, m + 1):
        out += np.roll(P, j, axis=0) + np.roll(P, -j, axis=0)
        dof += np.roll(stats.dof, j) + np.roll(stats.dof, -j)
    return replace(stats, stats=out, dof=dof, kind="daniell", meta={**stats.meta, "daniell_m": m})


def bartlett_split(series: np.ndarray, M: int) -> TimeSeriesPanel:
    """Cut one ``(T, p)`` series into ``M`` consecutive segments of length
    ``T // M``; trailing samples are dropped."""
    x = np.asarray(series, dtype=float)
    if x.ndim == 3:
        if x.shape[0] != 1:
            raise InputError("Bartlett splitting expects a single series", module="spectral")
        x = x[0]
    T = x.shape[0]
    if M < 1 or M > T / 2 and M != 1:
        raise InputError(f"Bartlett splits M={M} must satisfy 1 <= M <= T/2 (T={T})", module="spectral")
    L = T // M
    return TimeSeriesPanel(x[: M * L].reshape(M, L, x.shape[1]))


def piecewise_bin(stats: SpectralStatistics, M: int) -> SpectralStatistics:
    """Sum per-frequency entries over ``M`` equal-width intervals of [0, 2 pi).

    Index ``k`` lands in interval ``floor(k M / T)``. Empty intervals are dropped.
    """
    if M < 1:
        raise InputError(f"number of pieces must be >= 1, got {M}", module="spectral")
    if not _is_per_frequency(stats) or stats.kind != "periodogram":
        raise InputError("piecewise binning needs unbinned per-frequency statistics", module="spectral")
    ks = np.array([lo for lo, _ in stats.freq_ranges])
    bins = (ks * M) // stats.T
    stats_out, dof_out, ranges = [], [], []
    for j in range(M):
        sel = np.flatnonzero(bins == j)
        if sel.size == 0:
            continue
        stats_out.append(stats.stats[sel].sum(axis=0))
        dof_out.append(stats.dof[sel].sum())
        ranges.append((int(ks[sel].min()), int(ks[sel].max())))
    p = stats.p
    return replace(
        stats,
        stats=np.array(stats_out).reshape(-1, p, p),
        dof=np.array(dof_out),
        weights=np.ones(len(dof_out)),
        freq_ranges=tuple(ranges),
        kind="piecewise",
        meta={**stats.meta, "pieces": M},
    )


def fold_conjugate_pairs(stats: SpectralStatistics, *, rtol: float = 1e-12) -> SpectralStatistics:
    """Merge each entry with its mirror ``k -> T - k`` into one entry of weight 2.

    For real input the mirror statistic is the elementwise conjugate, so both
    contribute the same determinant terms. Entries without a conjugate-equal
    mirror (Nyquist, or asymmetric bins) keep their weight.
    """
    T = stats.T
    lookup = {r: i for i, r in enumerate(stats.freq_ranges)}
    keep, weights = [], []
    used = set()
    for i, (lo, hi) in enumerate(stats.freq_ranges):
        if i in used:
            continue
        mirror = lookup.get(((T - hi) % T, (T - lo) % T))
        paired = (
            mirror is not None
            and mirror != i
            and mirror not in used
            and stats.dof[mirror] == stats.dof[i]
            and np.allclose(stats.stats[mirror], stats.stats[i].conj(), rtol=rtol, atol=rtol * np.abs(stats.stats[i]).max())
        )
        keep.append(i)
        used.add(i)
        if paired:
            used.add(mirror)
            weights.append(stats.weights[i] + stats.weights[mirror])
        else:
            weights.append(stats.weights[i])
    out = stats.subset(keep)
    return replace(out, weights=np.array(weights))
