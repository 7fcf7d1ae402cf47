"""Energy-cutoff truncations ``V -> V P_n`` of a dilation and their error bounds."""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import Dilation, KrausMap, kraus_from_stinespring
from .distance import AscentConfig, ecd_distance, ecd_norm_cp
from .energy import EnergyObservable, spectral_projector
from .enorm import e_norm
from .matcore import as_cmat

# Test-only hook: set to -1 to flip the sign of the distance bound (sabotage check).
_RHS30_SIGN = 1.0

STUDY_COLUMNS = ("E_n", "lhs_estimate", "rhs_bound", "tail_lhs", "tail_rhs", "enorm_V_at_En", "converged")
LARGE_DIM = 16
LARGE_DIM_REF = 2
STUDY_CONFIG = AscentConfig(restarts=4, max_iter=100, polish=2)


class ScheduleError(ValueError):
    """A cutoff below the energy budget (the bounds need ``E_n >= E``)."""


def _operator(v) -> np.ndarray:
    return v.v if isinstance(v, Dilation) else as_cmat(v)


def truncate_map(v: Dilation, g: EnergyObservable, cutoff: float) -> Dilation:
    """Dilation with representing operator ``V P_n``."""
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    p = spectral_projector(g, cutoff)
    return Dilation(v.v @ p, v.env_dim)


def _require_schedule(budget: float, cutoff: float) -> None:
    if cutoff < budget:
        raise ScheduleError(f"cutoff E_n = {cutoff} is below the budget E = {budget}; the bounds need E_n >= E")


def tail_norm_check(v, g: EnergyObservable, budget: float, cutoff: float) -> tuple[float, float]:
    """``(||V - V P_n||_E, sqrt(E / E_n) ||V||_{E_n})``, both exact."""
    _require_schedule(budget, cutoff)
    op = _operator(v)
    tail = op - op @ spectral_projector(g, cutoff)
    lhs = e_norm(tail, g, budget).value
    rhs = np.sqrt(budget / cutoff) * e_norm(op, g, cutoff).value
    return lhs, rhs


@dataclass(frozen=True)
class StudyRow:
    E_n: float
    lhs_estimate: float
    rhs_bound: float
    tail_lhs: float
    tail_rhs: float
    enorm_V_at_En: float
    converged: bool

    def ok(self) -> bool:
        return self.tail_lhs <= self.tail_rhs + 1e-8 and self.lhs_estimate <= self.rhs_bound + 1e-6

    def as_csv_fields(self) -> list[str]:
        nums = [self.E_n, self.lhs_estimate, self.rhs_bound, self.tail_lhs, self.tail_rhs, self.enorm_V_at_En]
        return [f"{x:.12g}" for x in nums] + ["true" if self.converged else "false"]


def study_config(g: EnergyObservable, cfg: AscentConfig | None) -> AscentConfig:
    """Study defaults: a light restart budget, and reference dimension 2 once ``d_A > 16``."""
    cfg = cfg or STUDY_CONFIG
    if cfg.ref_dim is None and g.dim > LARGE_DIM:
        cfg = replace(cfg, ref_dim=LARGE_DIM_REF)
    return cfg


def bound30_check(v: Dilation, g: EnergyObservable, budget: float, cutoff: float,
                  cfg: AscentConfig | None = None) -> StudyRow:
    """One row: estimated ``D_E(Phi_n, Phi)`` against ``2 sqrt(E/E_n) ||V||_{E_n} ||V||_E``."""
    _require_schedule(budget, cutoff)
    cfg = study_config(g, cfg)
    norm_en = e_norm(v.v, g, cutoff).value
    norm_e = e_norm(v.v, g, budget).value
    rhs = _RHS30_SIGN * 2.0 * np.sqrt(budget / cutoff) * norm_en * norm_e
    vn = truncate_map(v, g, cutoff)
    rep = ecd_distance(kraus_from_stinespring(vn), kraus_from_stinespring(v), g, budget, cfg)
    tail_lhs, tail_rhs = tail_norm_check(v, g, budget, cutoff)
    return StudyRow(float(cutoff), rep.estimate, float(rhs), tail_lhs, tail_rhs, norm_en, rep.converged)


def default_schedule(g: EnergyObservable, budget: float) -> list[float]:
    """Cutoffs ``2E, 4E, ...`` below the top level, then the top level itself."""
    top = float(g.levels[-1])
    sched, c = [], 2.0 * budget
    while c < top:
        sched.append(c)
        c *= 2.0
    sched.append(max(top, budget))
    return sched


def _threads() -> int:
    env = os.environ.get("ECDKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"ECDKIT_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


@dataclass
class TruncationStudy:
    """Distance bound and tail bound along an ascending cutoff schedule."""

    dilation: Dilation
    observable: EnergyObservable
    budget: float
    schedule: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def __post_init__(self):
        if not self.schedule:
            self.schedule = default_schedule(self.observable, self.budget)
        sched = [float(c) for c in self.schedule]
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ValueError("schedule must be strictly ascending")
        for c in sched:
            _require_schedule(self.budget, c)
        self.schedule = sched

    def run(self, cfg: AscentConfig | None = None, threads: int | None = None) -> list[StudyRow]:
        threads = threads or _threads()

        def one(c):
            return bound30_check(self.dilation, self.observable, self.budget, c, cfg)

        if threads > 1 and len(self.schedule) > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows = list(pool.map(one, self.schedule))
        else:
            rows = [one(c) for c in self.schedule]
        self.rows = sorted(rows, key=lambda r: r.E_n)
        return self.rows

    def violations(self) -> list[StudyRow]:
        return [r for r in self.rows if not r.ok()]

    def to_csv(self) -> str:
        return write_csv(STUDY_COLUMNS, [r.as_csv_fields() for r in self.rows])


def write_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([f"{x:.12g}" if isinstance(x, float) else x for x in r])
    return buf.getvalue()


@dataclass(frozen=True)
class ScalingProfile:
    """Ratio profile ``||A||_E / sqrt(E)`` (operators) or ``||Phi||_E / E`` (CP maps)."""

    energies: np.ndarray
    ratios: np.ndarray
    kind: str
    knee: float

    def to_csv(self) -> str:
        return write_csv(("E", "ratio"), [(float(e), float(r)) for e, r in zip(self.energies, self.ratios)])


def scaling_profile(a, g: EnergyObservable, energies) -> ScalingProfile:
    """Ratio profile along an ascending grid; the knee is the largest ``E`` with ratio >= 0.99 max."""
    es = np.asarray(energies, dtype=float)
    if es.ndim != 1 or es.size == 0 or np.any(es <= 0) or np.any(np.diff(es) <= 0):
        raise ValueError("energy grid must be positive and strictly ascending")
    if isinstance(a, (KrausMap, Dilation)):
        kind = "ecd/E"
        ratios = np.array([ecd_norm_cp(a, g, e).value / e for e in es])
    else:
        kind = "enorm/sqrtE"
        ratios = np.array([e_norm(a, g, e).value / np.sqrt(e) for e in es])
    knee = float(es[np.flatnonzero(ratios >= 0.99 * ratios.max())[-1]])
    return ScalingProfile(es, ratios, kind, knee)
