"""VAR(1) benchmarks with known conditional-independence graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, InputError
from .graphs import Edge, is_decomposable, num_pairs
from .spectral import TimeSeriesPanel

__all__ = [
    "SimConfig",
    "VarModel",
    "generate_panel",
    "inverse_spectral_density",
    "recovery_metrics",
    "sample_var_model",
    "var1_true_graph",
]


@dataclass(frozen=True)
class SimConfig:
    p: int = 20
    T: int = 500
    N: int = 1
    rho: float = 0.2
    diag_value: float = 0.5
    offdiag_value: float = 0.5
    seed: int = 0
    require_decomposable: bool = True
    burn_in: int = 500
    max_attempts: int = 10_000

    def __post_init__(self):
        if self.p < 1 or self.T < 1 or self.N < 1:
            raise InputError("p, T and N must be positive", module="simulate")
        if not 0 <= self.rho <= 1:
            raise InputError(f"rho must lie in [0, 1], got {self.rho}", module="simulate")
        if not abs(self.diag_value) < 1:
            raise InputError(f"|diag_value| must be < 1 for stationarity, got {self.diag_value}", module="simulate")
        if self.burn_in < 0 or self.max_attempts < 1:
            raise InputError("burn_in must be >= 0 and max_attempts >= 1", module="simulate")


@dataclass(frozen=True)
class VarModel:
    A: np.ndarray
    true_graph_edges: frozenset[Edge]

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def spectral_radius(self) -> float:
        return float(np.abs(np.linalg.eigvals(self.A)).max()) if self.p else 0.0

    def to_json(self, seed: int | None = None) -> dict:
        return {
            "A": self.A.tolist(),
            "true_edges": [list(e) for e in sorted(self.true_graph_edges)],
            "seed": seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> VarModel:
        A = np.asarray(obj["A"], dtype=float)
        return cls(A, frozenset((min(i, j), max(i, j)) for i, j in obj["true_edges"]))


def var1_true_graph(A: np.ndarray) -> frozenset[Edge]:
    """Edges of the inverse spectral density ``I + A'A - e^{-il}A - e^{il}A'``.

    Decided on the sparsity pattern: ``(i, j)`` is an edge iff ``A_ij``,
    ``A_ji`` or ``(A'A)_ij`` is structurally nonzero, where ``(A'A)_ij`` is
    nonzero iff some row ``r`` has both ``A_ri`` and ``A_rj`` nonzero.
    The constant and the two oscillating terms multiply independent
    functions of the frequency, so they cannot cancel.
    """
    nz = np.asarray(A) != 0
    p = nz.shape[0]
    cooc = (nz.T.astype(np.int64) @ nz.astype(np.int64)) > 0
    pattern = nz | nz.T | cooc
    return frozenset((i, j) for i in range(p) for j in range(i + 1, p) if pattern[i, j])


def inverse_spectral_density(A: np.ndarray, lam: float | np.ndarray) -> np.ndarray:
    """``S(lambda)^{-1} = (I - A e^{-il})^H (I - A e^{-il})`` of a VAR(1) with
    identity noise covariance, for DFT kernel ``e^{-ilt}``; stacks over ``lam``.
    """
    A = np.asarray(A, dtype=float)
    lam = np.atleast_1d(lam)
    base = np.eye(A.shape[0]) + A.T @ A
    e = np.exp(-1j * lam)[:, None, None]
    return base[None] - e * A[None] - e.conj() * A.T[None]


def sample_var_model(config: SimConfig, rng: np.random.Generator) -> VarModel:
    """Rejection-sample an upper-triangular coefficient matrix.

    Diagonal fixed at ``diag_value``; each upper entry is ``offdiag_value``
    with probability ``rho``. Draws are kept when stationary and, if
    requested, when the implied graph is decomposable.
    """
    p = config.p
    iu = np.triu_indices(p, 1)
    for _ in range(config.max_attempts):
        A = np.diag(np.full(p, config.diag_value))
        A[iu] = config.offdiag_value * (rng.random(len(iu[0])) < config.rho)
        if not np.abs(np.linalg.eigvals(A)).max() < 1:
            continue
        edges = var1_true_graph(A)
        if config.require_decomposable and not is_decomposable(p, edges):
            continue
        return VarModel(A, edges)
    raise GenerationError(
        f"no acceptable VAR(1) model in {config.max_attempts} attempts (p={p}, rho={config.rho})",
        module="simulate",
    )


def generate_panel(model: VarModel, T: int, N: int, rng: np.random.Generator, burn_in: int = 500) -> TimeSeriesPanel:
    """``N`` independent replicates of ``x_t = A x_{t-1} + e_t`` started at zero."""
    if T < 1 or N < 1:
        raise InputError("T and N must be positive", module="simulate")
    A = model.A
    p = model.p
    total = T + burn_in
    eps = rng.standard_normal((N, total, p))
    x = np.empty_like(eps)
    prev = np.zeros((N, p))
    At = A.T
    for t in range(total):
        prev = prev @ At + eps[:, t]
        x[:, t] = prev
    return TimeSeriesPanel(x[:, burn_in:])


def recovery_metrics(estimated_edges, true_edges, p: int) -> dict:
    """True/false positive counts and rates over the ``p(p-1)/2`` pairs."""
    est = {(min(i, j), max(i, j)) for i, j in estimated_edges}
    tru = {(min(i, j), max(i, j)) for i, j in true_edges}
    m = num_pairs(p)
    tp = len(est & tru)
    fp = len(est - tru)
    fn = len(tru - est)
    tn = m - tp - fp - fn
    return {
        "tpr": tp / (tp + fn) if tp + fn else 1.0,
        "fpr": fp / (fp + tn) if fp + tn else 0.0,
        "tp": tp,
        "fp": fp,
        "fn": fn,
        "tn": tn,
    }
