"""Operator E-norms for a discrete energy observable.

The central routine :func:`constrained_max` solves

    sup { Tr(W rho) : rho >= 0, Tr rho <= 1, Tr(G rho) <= E }

through its Lagrangian dual ``min_{mu >= 0} [lambda_max(W - mu G)]_+ + mu E``
and rebuilds an optimal state of rank one. Strong duality holds because the
joint numerical range of two Hermitian forms is convex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .energy import DensityOperator, EnergyObservable, InfeasibleBudget, vector_energy
from .matcore import DimensionError, as_cmat, hermitize, proj, trace_norm

log = logging.getLogger(__name__)

T_RANGE = (1e-3, 1e3)
T_POINTS = 400
MIN_T_POINTS = 50


@dataclass(frozen=True)
class DualSolution:
    """Raw output of :func:`constrained_max` (objective on the linear scale)."""

    primal: float
    dual: float
    mu: float
    vec: np.ndarray  # optimal rho = |vec><vec|, ||vec||^2 <= 1
    energy: float

    @property
    def gap(self) -> float:
        return abs(self.dual - self.primal)


@dataclass(frozen=True)
class ENormCertificate:
    """Optimal value with its dual multiplier and an achieving state.

    ``value`` and ``dual_value`` are on the reported scale (the norm for
    :func:`e_norm`, the supremum itself for CP-map norms); ``gap`` is the
    duality gap of the underlying linear problem ``sup Tr(W rho)``.
    """

    value: float
    mu: float
    primal_state: DensityOperator
    dual_value: float
    gap: float
    budget: float

    @property
    def witness(self) -> np.ndarray:
        """Vector ``x`` with ``primal_state = |x><x|``."""
        w, u = np.linalg.eigh(self.primal_state.mat)
        return u[:, -1] * np.sqrt(max(w[-1], 0.0))

    def to_dict(self) -> dict:
        x = self.witness
        return {
            "value": self.value,
            "mu": self.mu,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "budget": self.budget,
            "witness": [[float(z.real), float(z.imag)] for z in x],
        }


# --------------------------------------------------------------------------
# dual solver


def _top(m: np.ndarray) -> tuple[float, np.ndarray]:
    w, u = np.linalg.eigh(m)
    return float(w[-1]), u[:, -1]


def _bloch(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Coefficients with ``Tr(m rho) = a0 + a . r`` for ``rho = (I + r.sigma) / 2``."""
    a0 = 0.5 * float(np.trace(m).real)
    a = np.array([m[0, 1].real, -m[0, 1].imag, 0.5 * float((m[0, 0] - m[1, 1]).real)])
    return a0, a


def _bloch_to_vec(r: np.ndarray) -> np.ndarray:
    r = r / np.linalg.norm(r)
    theta = np.arccos(np.clip(r[2], -1.0, 1.0))
    phi = np.arctan2(r[1], r[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def _best_pure_in_span(w: np.ndarray, levels: np.ndarray, budget: float, basis: np.ndarray):
    """Exact maximizer of ``<x|W|x>`` over unit ``x`` in a 2-d span with energy <= budget."""
    wm = basis.conj().T @ w @ basis
    gm = basis.conj().T @ (levels[:, None] * basis)
    w0, wv = _bloch(wm)
    g0, gv = _bloch(gm)
    nw, ng = np.linalg.norm(wv), np.linalg.norm(gv)
    if nw > 0 and g0 + gv @ wv / nw <= budget:
        r = wv / nw
    else:
        if ng == 0:
            if g0 > budget:
                return None
            r = wv / nw if nw > 0 else np.array([0.0, 0.0, 1.0])
        else:
            c = (budget - g0) / ng  # plane n.r = c with n = g/|g|
            if c < -1.0:
                return None
            n = gv / ng
            if c >= 1.0:
                r = n
            else:
                p = wv - (wv @ n) * n
                if np.linalg.norm(p) < 1e-300:
                    p = np.cross(n, [1.0, 0.0, 0.0])
                    if np.linalg.norm(p) < 1e-8:
                        p = np.cross(n, [0.0, 1.0, 0.0])
                p = p / np.linalg.norm(p)
                r = c * n + np.sqrt(max(0.0, 1.0 - c * c)) * p
    return basis @ _bloch_to_vec(r)


def _restricted(w, levels, budget, trace_eq, mask):
    """Solve on the ground space, the only support allowed when ``E = E_0``."""
    idx = np.flatnonzero(mask)
    lam, v = _top(hermitize(w[np.ix_(idx, idx)]))
    x = np.zeros(len(levels), dtype=complex)
    x[idx] = v
    if not trace_eq and lam < 0:
        # the empty state is optimal; keep a witness of negligible weight
        x, lam = x * 1e-150, 0.0
    return DualSolution(lam, lam, 0.0, x, vector_energy(x, levels))


def constrained_max(w, levels, budget: float, trace_eq: bool = False, tol: float = 1e-12) -> DualSolution:
    """Maximize ``Tr(W rho)`` over the energy-constrained states.

    Parameters
    ----------
    w : (d, d) Hermitian array
    levels : (d,) nonnegative array
        Diagonal of ``G``.
    budget : float
        Energy bound ``E >= 0``.
    trace_eq : bool
        Require ``Tr rho = 1`` instead of ``Tr rho <= 1`` (drops the ``[.]_+``
        clamp in the dual; needed when ``W`` is indefinite).
    """
    w = hermitize(as_cmat(w))
    levels = np.asarray(levels, dtype=float)
    d = levels.size
    if w.shape != (d, d):
        raise DimensionError(f"operator of shape {w.shape} vs observable of dimension {d}")
    e0 = float(levels.min())
    if budget < e0 and trace_eq:
        raise InfeasibleBudget(f"no unit-trace state has energy {budget} < {e0}")
    if budget == e0 and (trace_eq or e0 == 0.0):
        return _restricted(w, levels, budget, trace_eq, levels == e0)

    def dual(mu: float) -> tuple[float, np.ndarray]:
        lam, v = _top(w - mu * np.diag(levels))
        if not trace_eq:
            lam = max(lam, 0.0)
        return lam + mu * budget, v

    def slope(mu: float) -> float:
        lam, v = _top(w - mu * np.diag(levels))
        if not trace_eq and lam <= 0:
            return budget
        return budget - vector_energy(v, levels)

    # the slope of the convex dual is nondecreasing; its sign change is mu*
    if slope(0.0) >= 0:
        mu = 0.0
    else:
        excited = levels[levels > e0]
        spread = np.linalg.eigvalsh(w)
        width = max(spread[-1] - min(spread[0], 0.0), 1e-300)
        mu_hi = max(width / (excited[0] - e0) if excited.size else 1.0, 1e-12)
        for _ in range(2000):
            if slope(mu_hi) >= 0:
                break
            mu_hi *= 2.0
        mu = brentq(slope, 0.0, mu_hi, xtol=tol * (1.0 + mu_hi), rtol=4 * np.finfo(float).eps)
    dval = dual(mu)[0]

    # primal recovery: on the top eigenspace of W - mu* G the objective is affine
    # in the energy, so the lowest- and highest-energy directions there span an
    # optimal pure state; perturbed eigenvectors cover a loosely resolved crossing
    diag_g = np.diag(levels)
    ev, eu = np.linalg.eigh(w - mu * diag_g)
    cluster = eu[:, ev >= ev[-1] - 1e-9 * (1.0 + abs(ev[-1]) + mu * levels[-1])]
    gq, gv = np.linalg.eigh(cluster.conj().T @ (levels[:, None] * cluster))
    low, high = cluster @ gv[:, 0], cluster @ gv[:, -1]
    pairs = [(low, high)]
    if d > 1:
        pairs.append((eu[:, -1], eu[:, -2]))
    for delta in (1e-6, 1e-9):
        step = delta * (1.0 + mu)
        pairs.append((_top(w - (mu + step) * diag_g)[1], _top(w - max(mu - step, 0.0) * diag_g)[1]))
    ground = np.zeros(d, dtype=complex)
    ground[int(np.argmin(levels))] = 1.0
    pairs.append((low, ground))

    best_val, best_x = -np.inf, None

    def consider(x):
        nonlocal best_val, best_x
        val = float(np.vdot(x, w @ x).real)
        e = vector_energy(x, levels)
        if trace_eq:
            if e > budget * (1 + 1e-13) + 1e-15:
                return
        elif e > budget:
            s = budget / e
            x, val = x * np.sqrt(s), val * s
        if not trace_eq and val < 0:
            return
        if val > best_val:
            best_val, best_x = val, x

    for u, v in pairs:
        consider(u)
        consider(v)
        q, r = np.linalg.qr(np.stack([u, v], axis=1))
        if abs(r[1, 1]) < 1e-14:
            continue
        x = _best_pure_in_span(w, levels, budget, q)
        if x is not None:
            consider(x)
    if best_x is None:
        # only reachable when W <= 0 without the trace equality: the empty state is optimal
        best_val, best_x = 0.0, ground * 1e-150
    return DualSolution(best_val, dval, mu, best_x, vector_energy(best_x, levels))


# --------------------------------------------------------------------------
# public norms


def _check(a, g: EnergyObservable, budget: float, allow_zero: bool = False) -> np.ndarray:
    a = as_cmat(a)
    if a.shape[1] != g.dim:
        raise DimensionError(f"operator with {a.shape[1]} columns vs observable of dimension {g.dim}")
    if not np.isfinite(budget) or budget < 0 or (budget == 0 and not allow_zero):
        raise ValueError(f"energy budget must be positive, got {budget}")
    return a


def certificate_from_solution(sol: DualSolution, budget: float, sqrt_scale: bool) -> ENormCertificate:
    primal, dual = max(sol.primal, 0.0), max(sol.dual, 0.0)
    state = DensityOperator(proj(sol.vec), sol.energy)
    if sqrt_scale:
        return ENormCertificate(np.sqrt(primal), sol.mu, state, np.sqrt(dual), sol.gap, budget)
    return ENormCertificate(primal, sol.mu, state, dual, sol.gap, budget)


def e_norm(a, g: EnergyObservable, budget: float, _allow_zero: bool = False) -> ENormCertificate:
    """``||A||_E = sup { sqrt(Tr(A rho A^*)) : Tr rho <= 1, Tr(G rho) <= E }``."""
    a = _check(a, g, budget, allow_zero=_allow_zero)
    sol = constrained_max(a.conj().T @ a, g.levels, budget)
    return certificate_from_solution(sol, budget, sqrt_scale=True)


def e_norm_value(a, g: EnergyObservable, budget: float) -> float:
    return e_norm(a, g, budget).value


def e_norm_graded(a, g: EnergyObservable, budget: float) -> float:
    """Largest singular value of ``A (I + G/E)^{-1/2}``."""
    a = _check(a, g, budget)
    weights = 1.0 / np.sqrt(1.0 + g.levels / budget)
    return float(np.linalg.norm(a * weights[None, :], 2))


# --------------------------------------------------------------------------
# interconversion between the two norms


def t_grid(points: int = T_POINTS, t_range: tuple[float, float] = T_RANGE) -> np.ndarray:
    if points < MIN_T_POINTS:
        raise ValueError(f"t-grid with {points} points is too coarse (need at least {MIN_T_POINTS})")
    return np.geomspace(t_range[0], t_range[1], points)


def _as_function(f) -> tuple[Callable[[float], float], bool]:
    """Accept a callable or a table of ``(E, value)`` pairs (log-linear interpolation)."""
    if callable(f):
        return f, True
    tab = np.asarray(f, dtype=float)
    if tab.ndim != 2 or tab.shape[1] != 2:
        raise ValueError("expected a callable or an (n, 2) table of (E, value) pairs")
    tab = tab[np.argsort(tab[:, 0])]
    if tab.shape[0] < MIN_T_POINTS:
        raise ValueError(f"table with {tab.shape[0]} rows is too coarse (need at least {MIN_T_POINTS})")
    log_e = np.log(tab[:, 0])

    def interp(e: float) -> float:
        le = np.log(e)
        if le < log_e[0] - 1e-12 or le > log_e[-1] + 1e-12:
            raise ValueError(f"energy {e} outside the tabulated range")
        return float(np.interp(le, log_e, tab[:, 1]))

    return interp, False


def _optimize_t(h: Callable[[float], float], ts: np.ndarray, maximize: bool, refine: bool):
    vals = np.array([h(t) for t in ts])
    i = int(np.argmax(vals) if maximize else np.argmin(vals))
    best_t, best = float(ts[i]), float(vals[i])
    if refine:
        lo, hi = ts[max(i - 1, 0)], ts[min(i + 1, ts.size - 1)]
        if hi > lo:
            sign = -1.0 if maximize else 1.0
            res = minimize_scalar(
                lambda s: sign * h(np.exp(s)),
                bounds=(np.log(lo), np.log(hi)),
                method="bounded",
                options={"xatol": 1e-10},
            )
            cand = float(h(np.exp(res.x)))
            if (cand > best) if maximize else (cand < best):
                best_t, best = float(np.exp(res.x)), cand
    return best, best_t


def transform_graded_from_enorm(f, budget: float, points: int = T_POINTS, t_range=T_RANGE) -> tuple[float, float]:
    """``|||A|||_E = sup_t ||A||_{tE} / sqrt(1 + t)``, returned as ``(value, t*)``.

    ``f`` maps an energy to ``||A||``; it may be a callable or a table of
    ``(E, value)`` pairs covering ``[t_min E, t_max E]``.
    """
    fn, exact = _as_function(f)
    ts = t_grid(points, t_range)
    return _optimize_t(lambda t: fn(t * budget) / np.sqrt(1.0 + t), ts, True, exact)


def transform_enorm_from_graded(f, budget: float, points: int = T_POINTS, t_range=T_RANGE) -> tuple[float, float]:
    """``||A||_E = inf_t |||A|||_{tE} sqrt(1 + 1/t)``, returned as ``(value, t*)``."""
    fn, exact = _as_function(f)
    ts = t_grid(points, t_range)
    return _optimize_t(lambda t: fn(t * budget) * np.sqrt(1.0 + 1.0 / t), ts, False, exact)


# --------------------------------------------------------------------------
# derived quantities


def g_bound(a, g: EnergyObservable, energies: Sequence[float]) -> np.ndarray:
    """Rows ``(E, ||A||_E / sqrt(E))`` along an ascending grid."""
    es = np.asarray(energies, dtype=float)
    if es.ndim != 1 or np.any(es <= 0) or np.any(np.diff(es) <= 0):
        raise ValueError("energy grid must be positive and strictly ascending")
    return np.array([(e, e_norm(a, g, e).value / np.sqrt(e)) for e in es])


def modulus_f(a, g: EnergyObservable, budget: float, eps: float) -> float:
    """Continuity modulus ``eps * ||A||_{4E/eps^2}``."""
    if budget <= 0:
        raise ValueError("energy budget must be positive")
    if not 0 < eps <= 2:
        raise ValueError("eps must lie in (0, 2]")
    return eps * e_norm(a, g, 4.0 * budget / eps**2).value


def sandwich_product_bound(a, b, rho, g: EnergyObservable) -> tuple[float, float]:
    """``(||A rho B^*||_1, ||A||_{E_rho} ||B||_{E_rho})`` with ``E_rho = Tr(G rho)``."""
    m = rho.mat if isinstance(rho, DensityOperator) else hermitize(as_cmat(rho))
    a, b = as_cmat(a), as_cmat(b)
    if m.shape != (g.dim, g.dim):
        raise DimensionError(f"state of shape {m.shape} vs observable of dimension {g.dim}")
    tr = float(np.trace(m).real)
    if tr > 1 + 1e-12:
        raise ValueError(f"state trace {tr} exceeds 1")
    e_rho = max(float(np.dot(g.levels, np.diag(m).real)), 0.0)
    lhs = trace_norm(a @ m @ b.conj().T)
    rhs = e_norm(a, g, e_rho, _allow_zero=True).value * e_norm(b, g, e_rho, _allow_zero=True).value
    return lhs, rhs
