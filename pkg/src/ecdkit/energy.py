"""Discrete energy observables, constrained states and the energy-cutoff channel."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .matcore import (
    DimensionError,
    as_cmat,
    haar_vector,
    hermitize,
    is_hermitian,
    partial_trace,
    proj,
    trace_norm,
)

STATE_TRACE_TOL = 1e-12


class InfeasibleBudget(ValueError):
    pass


@dataclass(frozen=True)
class EnergyObservable:
    """Energy observable stored in its own eigenbasis.

    ``levels[k]`` is the energy of the k-th basis vector. Levels must be
    nonnegative and nondecreasing; ``grounded`` asserts the lowest level is 0.
    """

    levels: np.ndarray
    grounded: bool = field(default=None)

    def __post_init__(self):
        lv = np.asarray(self.levels, dtype=float).ravel()
        if lv.size == 0:
            raise ValueError("an energy observable needs at least one level")
        if np.any(~np.isfinite(lv)) or lv[0] < 0:
            raise ValueError("levels must be finite and nonnegative")
        if np.any(np.diff(lv) < 0):
            raise ValueError("levels must be nondecreasing")
        lv.setflags(write=False)
        object.__setattr__(self, "levels", lv)
        if self.grounded is None:
            object.__setattr__(self, "grounded", bool(lv[0] == 0.0))
        elif self.grounded and lv[0] != 0.0:
            raise ValueError("grounded observable must have lowest level 0")

    @property
    def dim(self) -> int:
        return int(self.levels.size)

    @property
    def matrix(self) -> np.ndarray:
        return np.diag(self.levels).astype(complex)

    def tensor_identity(self, d_r: int) -> "EnergyObservable":
        """The observable ``G ⊗ I_R`` (still diagonal and nondecreasing)."""
        return EnergyObservable(np.repeat(self.levels, d_r), grounded=self.grounded)

    def to_dict(self) -> dict:
        return {"levels": [float(x) for x in self.levels], "grounded": bool(self.grounded)}

    @classmethod
    def from_dict(cls, d: dict) -> "EnergyObservable":
        if "levels" not in d:
            raise KeyError("levels")
        return cls(np.asarray(d["levels"], dtype=float), grounded=d.get("grounded"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "EnergyObservable":
        return cls.from_dict(json.loads(s))


def number_observable(d: int) -> EnergyObservable:
    """Truncated number operator, levels ``0, 1, ..., d-1``."""
    return EnergyObservable(np.arange(d, dtype=float), grounded=True)


@dataclass(frozen=True)
class DensityOperator:
    """Positive trace-class operator with trace at most one.

    ``energy`` caches ``Tr(G rho)`` when the state was produced against an
    observable; it is ``None`` otherwise.
    """

    mat: np.ndarray
    energy: float | None = None

    def __post_init__(self):
        m = as_cmat(self.mat)
        if not is_hermitian(m, tol=1e-10):
            raise ValueError("density operator must be Hermitian")
        m = hermitize(m)
        w = np.linalg.eigvalsh(m)
        scale = max(1.0, float(np.max(np.abs(w))))
        if w[0] < -1e-10 * scale:
            raise ValueError(f"density operator has negative eigenvalue {w[0]:.3e}")
        tr = float(np.trace(m).real)
        if not (0.0 < tr <= 1.0 + STATE_TRACE_TOL):
            raise ValueError(f"trace {tr!r} outside (0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "mat", m)

    @classmethod
    def pure(cls, vec, g: EnergyObservable | None = None) -> "DensityOperator":
        v = np.asarray(vec, dtype=complex).ravel()
        rho = proj(v)
        return cls(rho, energy_of(rho, g) if g is not None else None)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def rank(self, tol: float = 1e-10) -> int:
        return int(np.sum(np.linalg.eigvalsh(self.mat) > tol))

    def is_member(self, g: EnergyObservable, budget: float, tol: float = 1e-9) -> bool:
        """Membership in the set of operators with ``Tr rho <= 1`` and ``Tr G rho <= E``."""
        return self.trace <= 1.0 + STATE_TRACE_TOL and energy_of(self, g) <= budget + tol


def _mat(rho) -> np.ndarray:
    return rho.mat if isinstance(rho, DensityOperator) else as_cmat(rho)


def spectral_projector(g: EnergyObservable, cutoff: float) -> np.ndarray:
    """Projector onto the levels in the closed interval ``[0, cutoff]``."""
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    return np.diag((g.levels <= cutoff).astype(float)).astype(complex)


def energy_of(rho, g: EnergyObservable) -> float:
    m = _mat(rho)
    if m.shape != (g.dim, g.dim):
        raise DimensionError(f"state of shape {m.shape} vs observable of dimension {g.dim}")
    return float(np.dot(g.levels, np.diag(m).real))


def vector_energy(vec: np.ndarray, levels: np.ndarray) -> float:
    return float(np.dot(levels, np.abs(vec) ** 2))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_constrained_vector(
    g: EnergyObservable,
    budget: float,
    rng: np.random.Generator,
    boundary: bool | None = None,
    boundary_prob: float = 0.35,
) -> np.ndarray:
    """Unit vector with energy at most ``budget``.

    A Haar-random vector from the excited part is blended with a Haar-random
    ground-space vector so that the energy hits a target. Boundary draws target
    ``budget`` itself; interior draws target a uniform value in ``[E_0, budget]``.
    """
    lv = g.levels
    e0 = lv[0]
    if budget < e0:
        raise InfeasibleBudget(f"budget {budget} below the lowest level {e0}")
    if boundary is None:
        boundary = bool(rng.random() < boundary_prob)
    target = budget if boundary else rng.uniform(e0, budget)
    ground = np.flatnonzero(lv == e0)
    gamma = np.zeros(g.dim, dtype=complex)
    gamma[ground] = haar_vector(ground.size, rng)
    excited = np.flatnonzero(lv > e0)
    if excited.size == 0 or target <= e0:
        return gamma
    pool = excited
    if boundary:
        high = np.flatnonzero(lv >= target)
        if high.size == 0:
            pool = np.flatnonzero(lv == lv[-1])
        else:
            pool = high
    chi = np.zeros(g.dim, dtype=complex)
    chi[pool] = haar_vector(pool.size, rng)
    e_chi = vector_energy(chi, lv)
    if e_chi <= target:
        return chi
    s = (target - e0) / (e_chi - e0)
    return np.sqrt(1.0 - s) * gamma + np.sqrt(s) * chi


def sample_constrained(
    g: EnergyObservable,
    budget: float,
    mode: Literal["pure", "mixed"] = "pure",
    seed=None,
) -> DensityOperator:
    """Random unit-trace state with ``Tr(G rho) <= budget``.

    Pure mode returns a rank-one state; mixed mode mixes 2-4 pure draws with
    Dirichlet weights. Deterministic for a fixed integer ``seed``.
    """
    rng = _rng(seed)
    if mode == "pure":
        v = sample_constrained_vector(g, budget, rng)
        rho = proj(v)
    elif mode == "mixed":
        k = int(rng.integers(2, 5))
        boundary = bool(rng.random() < 0.35)
        w = rng.dirichlet(np.ones(k))
        rho = sum(wi * proj(sample_constrained_vector(g, budget, rng, boundary=boundary)) for wi in w)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    rho = rho / np.trace(rho).real
    return DensityOperator(rho, energy_of(rho, g))


def pinch_channel(g: EnergyObservable, cutoff: float):
    """Channel ``rho -> P rho P + Tr((I-P) rho) |tau_0><tau_0|``.

    ``P`` projects onto levels in ``[0, cutoff]``; every output has energy at
    most ``cutoff``.
    """
    from .channel import KrausMap

    if not g.grounded:
        raise ValueError("the cutoff channel needs a grounded observable")
    d = g.dim
    p = spectral_projector(g, cutoff)
    ops = [p]
    for k in np.flatnonzero(g.levels > cutoff):
        op = np.zeros((d, d), dtype=complex)
        op[0, k] = 1.0
        ops.append(op)
    return KrausMap(ops, channel=True)


def pinch_deviation(omega, g: EnergyObservable, cutoff: float, budget: float | None = None) -> tuple[float, float]:
    """Return ``(||omega - (Pi ⊗ Id)(omega)||_1, 4 sqrt(E / cutoff))``.

    ``omega`` lives on ``A ⊗ R`` with ``A`` carrying the observable. ``budget``
    defaults to the actual energy of the A-marginal.
    """
    m = _mat(omega)
    n = m.shape[0]
    if n % g.dim:
        raise DimensionError(f"state dimension {n} is not a multiple of {g.dim}")
    d_r = n // g.dim
    if cutoff <= 0:
        raise ValueError("cutoff must be positive")
    e_marg = energy_of(partial_trace(m, (g.dim, d_r), 0), g)
    if budget is None:
        budget = e_marg
    elif e_marg > budget + 1e-9:
        raise ValueError(f"marginal energy {e_marg} exceeds the stated budget {budget}")
    out = pinch_channel(g, cutoff).extend(d_r).apply(m)
    return trace_norm(m - out), 4.0 * np.sqrt(budget / cutoff)
