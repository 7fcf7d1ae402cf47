"""Fidelity, Bures distance and energy-constrained distances between maps.

Maps act on ``A`` (dimension ``d_A``) and the reference system ``R`` has
dimension ``d_R`` (``d_A`` unless configured otherwise); extended states are
vectors on ``A ⊗ R`` with the ``A`` index varying slowest.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize

from .channel import (
    Dilation,
    KrausMap,
    TwoOperatorMap,
    as_dilation,
    as_kraus,
    doubled_env_pair,
    extend,
    pad_env,
)
from .energy import DensityOperator, EnergyObservable, sample_constrained, sample_constrained_vector
from .enorm import ENormCertificate, certificate_from_solution, constrained_max, e_norm
from .matcore import (
    DimensionError,
    as_cmat,
    haar_vector,
    hermitize,
    proj,
    psd_sqrt,
    sign_hermitian,
    trace_norm,
)

log = logging.getLogger(__name__)

WITNESS_TOL = 1e-9
SCREEN_TOL = 1e-7


@dataclass(frozen=True)
class AscentConfig:
    """Knobs shared by the distance estimators.

    ``restarts`` and ``max_iter`` drive the trace-norm ascent; ``polish`` is how
    many of the best restarts get a final gradient refinement. ``bures_restarts``
    counts starts for the (concave) fidelity-side problem. ``ref_dim`` overrides
    the reference dimension, which otherwise equals ``d_A``.
    """

    restarts: int = 32
    max_iter: int = 200
    tol: float = 1e-12
    seed: int = 0
    polish: int = 4
    bures_restarts: int = 4
    ref_dim: int | None = None
    match_tol: float = 1e-3
    cut_iter: int = 200

    def __post_init__(self):
        if self.restarts < 1 or self.bures_restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass(frozen=True)
class DistanceReport:
    """Estimate of a supremum with its witness and a certified bracket.

    ``lower`` equals ``estimate`` (a feasible witness bounds a supremum from
    below); ``upper`` comes from an inequality chain named by ``upper_provenance``.
    """

    estimate: float
    witness: DensityOperator
    witness_vector: np.ndarray
    lower: float
    upper: float
    upper_provenance: str
    restarts: int
    iterations: int
    converged: bool
    extras: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "lower": self.lower,
            "upper": self.upper,
            "upper_provenance": self.upper_provenance,
            "witness": [[float(z.real), float(z.imag)] for z in self.witness_vector],
            "restarts": self.restarts,
            "iterations": self.iterations,
            "converged": self.converged,
        }


# --------------------------------------------------------------------------
# state distances


def _psd(m) -> np.ndarray:
    return m.mat if isinstance(m, DensityOperator) else hermitize(as_cmat(m))


def fidelity(rho, sigma) -> float:
    """``F = ||sqrt(rho) sqrt(sigma)||_1^2`` for positive operators."""
    a, b = _psd(rho), _psd(sigma)
    if a.shape != b.shape:
        raise DimensionError(f"shapes differ: {a.shape} vs {b.shape}")
    for m in (a, b):
        w = np.linalg.eigvalsh(m)
        if w[0] < 1e-10:
            log.debug("fidelity input is near-singular (min eigenvalue %.3e)", w[0])
    return trace_norm(psd_sqrt(a) @ psd_sqrt(b)) ** 2


def bures(rho, sigma) -> float:
    """``sqrt(||rho||_1 + ||sigma||_1 - 2 sqrt(F))`` for positive operators."""
    a, b = _psd(rho), _psd(sigma)
    f = fidelity(a, b)
    val = np.trace(a).real + np.trace(b).real - 2.0 * np.sqrt(f)
    return float(np.sqrt(max(val, 0.0)))


# --------------------------------------------------------------------------
# norms of CP maps


def _check_observable(phi, g: EnergyObservable) -> None:
    if phi.dims[0] != g.dim:
        raise DimensionError(f"map input dimension {phi.dims[0]} vs observable dimension {g.dim}")


def ecd_norm_cp(phi, g: EnergyObservable, budget: float) -> ENormCertificate:
    """Energy-constrained diamond norm of a CP map (exact).

    For CP maps the output trace is ``Tr(W rho_A)`` with ``W = sum V_k^* V_k``, so
    the norm is the linear supremum solved by the dual; ``value`` is that
    supremum itself.
    """
    if isinstance(phi, TwoOperatorMap):
        raise TypeError("a two-operator map is not CP; polarize it first")
    if not isinstance(phi, (KrausMap, Dilation)):
        raise TypeError(f"expected a KrausMap or Dilation, got {type(phi).__name__}")
    _check_observable(phi, g)
    if not budget > 0:
        raise ValueError(f"energy budget must be positive, got {budget}")
    k = as_kraus(phi)
    sol = constrained_max(k.kraus_sum(), g.levels, budget)
    return certificate_from_solution(sol, budget, sqrt_scale=False)


# --------------------------------------------------------------------------
# trace-norm distance between two maps


class _Difference:
    """``(Phi - Psi) ⊗ Id_R`` and its adjoint on ``A ⊗ R``."""

    def __init__(self, phi: KrausMap, psi: KrausMap, d_r: int):
        self.plus = extend(phi, d_r).ops
        self.minus = extend(psi, d_r).ops
        self.d_r = d_r

    def output(self, x: np.ndarray) -> np.ndarray:
        p = sum(np.outer(k @ x, (k @ x).conj()) for k in self.plus)
        m = sum(np.outer(k @ x, (k @ x).conj()) for k in self.minus)
        return p - m

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        p = sum(k.conj().T @ y @ k for k in self.plus)
        m = sum(k.conj().T @ y @ k for k in self.minus)
        return hermitize(p - m)

    def value(self, x: np.ndarray) -> float:
        return trace_norm(self.output(x))


def _pair(phi, psi, g: EnergyObservable) -> tuple[KrausMap, KrausMap]:
    phi, psi = as_kraus(phi), as_kraus(psi)
    if phi.dims != psi.dims:
        raise DimensionError(f"maps have different dimensions: {phi.dims} vs {psi.dims}")
    _check_observable(phi, g)
    return phi, psi


def _sign_ascent(diff: _Difference, levels: np.ndarray, budget: float, x: np.ndarray, max_iter: int, tol: float,
                 feasible_start: bool = True):
    """Alternate ``U = sign(output)`` with the exact constrained maximizer of ``<x|Delta^*(U)|x>``.

    Each step cannot decrease the objective, since ``||X||_1 >= Tr(U X)`` for
    any Hermitian unitary ``U`` with equality at the sign. When the start may
    violate the budget slightly, the first (feasible) step is always taken.
    """
    f = diff.value(x) if feasible_start else -np.inf
    for it in range(1, max_iter + 1):
        h = diff.adjoint(sign_hermitian(diff.output(x)))
        sol = constrained_max(h, levels, budget, trace_eq=True)
        cand = sol.vec / np.linalg.norm(sol.vec)
        fc = diff.value(cand)
        if fc < f:
            return x, f, it, True
        done = fc - f <= tol * (1.0 + f)
        x, f = cand, fc
        if done:
            return x, f, it, True
    return x, f, max_iter, False


def _polish(diff: _Difference, levels: np.ndarray, budget: float, x0: np.ndarray) -> np.ndarray:
    """Local SLSQP refinement of the trace norm over unit vectors in the budget."""
    n = x0.size
    lv2 = np.concatenate([levels, levels])

    def unpack(p):
        return p[:n] + 1j * p[n:]

    def obj(p):
        x = unpack(p)
        out = diff.output(x)
        w, u = np.linalg.eigh(out)
        grad = 2.0 * diff.adjoint((u * np.sign(w)) @ u.conj().T) @ x
        return -float(np.sum(np.abs(w))), -np.concatenate([grad.real, grad.imag])

    cons = [
        {"type": "eq", "fun": lambda p: p @ p - 1.0, "jac": lambda p: 2.0 * p},
        {"type": "ineq", "fun": lambda p: budget - lv2 @ (p * p), "jac": lambda p: -2.0 * lv2 * p},
    ]
    res = minimize(
        obj,
        np.concatenate([x0.real, x0.imag]),
        jac=True,
        method="SLSQP",
        constraints=cons,
        options={"ftol": 1e-15, "maxiter": 300},
    )
    x = unpack(res.x)
    return x / np.linalg.norm(x)


def _witness_state(x: np.ndarray, levels: np.ndarray) -> DensityOperator:
    return DensityOperator(proj(x), float(np.dot(levels, np.abs(x) ** 2)))


def _stacked_common(phi: KrausMap, psi: KrausMap) -> tuple[Dilation, Dilation]:
    a, b = as_dilation(phi), as_dilation(psi)
    e = max(a.env_dim, b.env_dim)
    return pad_env(a, e), pad_env(b, e)


def dilation_difference_rhs(vphi: Dilation, vpsi: Dilation, g: EnergyObservable, budget: float) -> float:
    """``||V_phi - V_psi||_E (||V_phi||_E + ||V_psi||_E)`` for a common environment."""
    if vphi.v.shape != vpsi.v.shape or vphi.env_dim != vpsi.env_dim:
        raise DimensionError("dilations must have identical shapes and environment dimension")
    diff = e_norm(vphi.v - vpsi.v, g, budget).value
    return diff * (e_norm(vphi.v, g, budget).value + e_norm(vpsi.v, g, budget).value)


def ecd_distance(phi, psi, g: EnergyObservable, budget: float, cfg: AscentConfig | None = None,
                 dilations: tuple[Dilation, Dilation] | None = None, chain: float | None = None) -> DistanceReport:
    """Energy-constrained diamond-norm distance ``||(Phi - Psi) ⊗ Id_R (omega)||_1`` maximized.

    The estimate is a certified lower bound. The upper bound is the smallest of
    the triangle bound ``||Phi|| + ||Psi||``, the dilation-difference bound on
    the stacked Kraus dilations (or on ``dilations`` when given) and, when
    ``chain`` carries a certified upper bound on the Bures distance, the chain
    ``(sqrt||Phi|| + sqrt||Psi||) * chain``.
    """
    cfg = cfg or AscentConfig()
    phi, psi = _pair(phi, psi, g)
    if not budget > 0:
        raise ValueError(f"energy budget must be positive, got {budget}")
    d_r = cfg.ref_dim or g.dim
    diff = _Difference(phi, psi, d_r)
    gx = g.tensor_identity(d_r)
    rng = np.random.default_rng(cfg.seed)

    runs = []
    total_iter = 0
    for _ in range(cfg.restarts):
        x0 = sample_constrained_vector(gx, budget, rng)
        # restarts only need to rank basins; the best few are refined to cfg.tol below
        x, f, it, ok = _sign_ascent(diff, gx.levels, budget, x0, cfg.max_iter, max(cfg.tol, SCREEN_TOL))
        total_iter += it
        runs.append((f, x, ok))
    runs.sort(key=lambda r: -r[0])
    best_f, best_x, converged = runs[0]
    for f, x, ok in runs[: cfg.polish]:
        if f <= 0:
            continue
        xp = _polish(diff, gx.levels, budget, x)
        # a final ascent pass restores exact feasibility and cannot lose value
        xp, fp, it, okp = _sign_ascent(diff, gx.levels, budget, xp, cfg.max_iter, cfg.tol, feasible_start=False)
        total_iter += it
        if fp > best_f:
            best_f, best_x, converged = fp, xp, okp
    if not converged:
        log.info("trace-norm ascent hit max_iter=%d without meeting tol", cfg.max_iter)
    witness = _witness_state(best_x, gx.levels)
    estimate = diff.value(best_x)

    nphi = ecd_norm_cp(phi, g, budget)
    npsi = ecd_norm_cp(psi, g, budget)
    bounds = [(nphi.dual_value + npsi.dual_value, "triangle")]
    if dilations is None:
        bounds.append((dilation_difference_rhs(*_stacked_common(phi, psi), g, budget), "dilation-difference:stacked"))
    else:
        bounds.append((dilation_difference_rhs(*dilations, g, budget), "dilation-difference:supplied"))
    if chain is not None:
        bounds.append(((np.sqrt(nphi.dual_value) + np.sqrt(npsi.dual_value)) * chain, "bures-chain"))
    upper, prov = min(bounds, key=lambda b: b[0])
    return DistanceReport(
        estimate=estimate,
        witness=witness,
        witness_vector=best_x,
        lower=estimate,
        upper=float(upper),
        upper_provenance=prov,
        restarts=cfg.restarts,
        iterations=total_iter,
        converged=converged,
        extras={"ref_dim": d_r, "norm_phi": nphi.value, "norm_psi": npsi.value},
    )


# --------------------------------------------------------------------------
# energy-constrained Bures distance


class _Overlap:
    """Quantities of the fidelity-side problem for two dilations on a common environment.

    ``M(rho) = Tr_B(V_psi rho V_phi^*)`` and, for a contraction ``C``,
    ``H_C = W_phi + W_psi - K_C - K_C^*`` with ``K_C = V_phi^* (I_B ⊗ C) V_psi``.
    ``h(rho) = Tr((W_phi + W_psi) rho) - 2 ||M(rho)||_1 = min_C Tr(H_C rho)`` is
    concave and its maximum over the budget is the squared Bures distance.
    """

    def __init__(self, vphi: Dilation, vpsi: Dilation):
        if vphi.dims != vpsi.dims:
            raise DimensionError(f"dilations have different dimensions: {vphi.dims} vs {vpsi.dims}")
        e = max(vphi.env_dim, vpsi.env_dim)
        self.vphi, self.vpsi = pad_env(vphi, e), pad_env(vpsi, e)
        self.d_b, self.d_e = self.vphi.d_out, e
        self.wsum = hermitize(self.vphi.v.conj().T @ self.vphi.v + self.vpsi.v.conj().T @ self.vpsi.v)

    def overlap(self, rho: np.ndarray) -> np.ndarray:
        x = self.vpsi.v @ rho @ self.vphi.v.conj().T
        return np.einsum("bebf->ef", x.reshape(self.d_b, self.d_e, self.d_b, self.d_e))

    def h_matrix(self, c: np.ndarray) -> np.ndarray:
        k = self.vphi.v.conj().T @ np.kron(np.eye(self.d_b), c) @ self.vpsi.v
        return hermitize(self.wsum - k - k.conj().T)

    def h_value(self, rho: np.ndarray) -> float:
        return float(np.trace(self.wsum @ rho).real) - 2.0 * trace_norm(self.overlap(rho))

    def cut_matrix(self, x: np.ndarray) -> np.ndarray:
        """``N`` with ``<x|K_C|x> = sum_ef C_ef N_ef``."""
        a = (self.vphi.v @ x).reshape(self.d_b, self.d_e)
        b = (self.vpsi.v @ x).reshape(self.d_b, self.d_e)
        return a.conj().T @ b


def _repair_energy(rho: np.ndarray, levels: np.ndarray, budget: float) -> np.ndarray:
    """Mix in the lowest level until ``Tr(G rho) <= budget`` (tiny solver overshoot)."""
    e = float(np.dot(levels, np.diag(rho).real))
    if e <= budget:
        return rho
    e0 = levels[0]
    t = min(1.0, (e - budget) / (e - e0) * (1 + 1e-12))
    ground = np.zeros_like(rho)
    ground[0, 0] = 1.0
    return (1 - t) * rho + t * ground


def _maximize_overlap_objective(ov: _Overlap, g: EnergyObservable, budget: float, cfg: AscentConfig, rng):
    """Maximize the concave ``h`` over ``rho = X X^*`` with SLSQP from several starts."""
    d = g.dim
    lv = g.levels
    lvx = np.concatenate([np.repeat(lv, d)] * 2)

    def unpack(p):
        return (p[: d * d] + 1j * p[d * d:]).reshape(d, d)

    def obj(p):
        xm = unpack(p)
        rho = xm @ xm.conj().T
        m = ov.overlap(rho)
        u, s, vh = np.linalg.svd(m)
        val = float(np.trace(ov.wsum @ rho).real) - 2.0 * float(np.sum(s))
        grad = 2.0 * ov.h_matrix((u @ vh).conj().T) @ xm
        return -val, -np.concatenate([grad.real.ravel(), grad.imag.ravel()])

    cons = [
        {"type": "eq", "fun": lambda p: p @ p - 1.0, "jac": lambda p: 2.0 * p},
        {"type": "ineq", "fun": lambda p: budget - lvx @ (p * p), "jac": lambda p: -2.0 * lvx * p},
    ]
    best_val, best_rho, iters = -np.inf, None, 0
    for _ in range(cfg.bures_restarts):
        x0 = psd_sqrt(sample_constrained(g, budget, "mixed", rng).mat)
        res = minimize(
            obj,
            np.concatenate([x0.real.ravel(), x0.imag.ravel()]),
            jac=True,
            method="SLSQP",
            constraints=cons,
            options={"ftol": 1e-15, "maxiter": 1000},
        )
        iters += int(res.nit)
        xm = unpack(res.x)
        rho = hermitize(xm @ xm.conj().T)
        rho = _repair_energy(rho / np.trace(rho).real, lv, budget)
        val = ov.h_value(rho)
        if val > best_val:
            best_val, best_rho = val, rho
    return best_val, best_rho, iters


def _clip_contraction(c: np.ndarray) -> np.ndarray:
    u, s, vh = np.linalg.svd(c)
    return (u * np.minimum(s, 1.0)) @ vh


def optimal_contraction(ov: _Overlap, g: EnergyObservable, budget: float, rho: np.ndarray,
                        max_iter: int = 200, tol: float = 1e-9) -> tuple[np.ndarray, float, bool]:
    """Contraction ``C`` minimizing ``max_rho Tr(H_C rho)`` near a maximizer ``rho`` of ``h``.

    At a saddle point ``C`` equals ``V U^*`` on the range of ``M(rho) = U S V^*``;
    only the block acting on the kernel is free. That block is found by a
    box-stabilized cutting-plane LP whose cuts are linear in ``(C, mu, t)``.
    Returns ``(C, Lambda(C), converged)`` where ``Lambda(C)`` is computed exactly
    and is a certified upper bound on the squared Bures distance.
    """
    lv = g.levels
    m = ov.overlap(rho)
    u, s, vh = np.linalg.svd(m)
    r = int(np.sum(s > 1e-7 * s[0])) if s[0] > 1e-9 else 0
    v = vh.conj().T
    c0 = v[:, :r] @ u[:, :r].conj().T
    k = ov.d_e - r
    vk, uk = v[:, r:], u[:, r:]

    def contraction(blk):
        return c0 + vk @ blk @ uk.conj().T

    def lam(blk):
        return constrained_max(ov.h_matrix(contraction(blk)), lv, budget).dual

    if k == 0:
        return c0, lam(np.zeros((0, 0))), True

    n = k * k
    rows, rhs = [], []

    def value_cut(x):
        x = x / np.linalg.norm(x)
        nmat = ov.cut_matrix(x)
        nk = vk.T @ nmat @ uk.conj()
        base = float(np.sum(c0 * nmat).real)
        wx = float(np.vdot(x, ov.wsum @ x).real)
        gx = float(np.dot(lv, np.abs(x) ** 2))
        rows.append(np.concatenate([-2 * nk.real.ravel(), 2 * nk.imag.ravel(), [-gx, -1.0]]))
        rhs.append(-wx + 2 * base)

    def norm_cut(z, y):
        p = np.outer(z.conj(), y)
        rows.append(np.concatenate([p.real.ravel(), -p.imag.ravel(), [0.0, 0.0]]))
        rhs.append(1.0)

    crng = np.random.default_rng(0)
    for _ in range(4 * k):
        norm_cut(haar_vector(k, crng), haar_vector(k, crng))
    center = np.zeros((k, k), dtype=complex)
    f_center = lam(center)
    best = (f_center, center)
    diag_g = np.diag(lv)
    for mu in (0.0, 1.0, 10.0):
        for x in np.linalg.eigh(ov.h_matrix(contraction(center)) - mu * diag_g)[1].T:
            value_cut(x)
    positive = lv[lv > 0]
    mu_max = 1e3 * (1.0 + np.linalg.eigvalsh(ov.wsum)[-1]) / (positive.min() if positive.size else 1.0)
    cost = np.zeros(2 * n + 2)
    cost[-2], cost[-1] = budget, 1.0
    radius = 0.5
    converged = False
    for _ in range(max_iter):
        cz = np.concatenate([center.real.ravel(), center.imag.ravel()])
        bounds = [(max(-1.0, a - radius), min(1.0, a + radius)) for a in cz] + [(0.0, mu_max), (None, None)]
        res = linprog(cost, A_ub=np.array(rows), b_ub=np.array(rhs), bounds=bounds, method="highs")
        if res.status != 0:
            break
        z = res.x
        blk = (z[:n] + 1j * z[n: 2 * n]).reshape(k, k)
        model = float(res.fun)
        clipped = _clip_contraction(blk)
        f_blk = lam(clipped)
        if f_blk < best[0]:
            best = (f_blk, clipped)
        if f_center - model <= tol * (1.0 + f_center):
            if radius >= 0.5:
                converged = True
                break
        if f_blk <= f_center - 0.1 * (f_center - model):
            center, f_center = clipped, f_blk
            radius = min(1.0, 2 * radius)
        else:
            radius *= 0.5
        hm = ov.h_matrix(contraction(blk))
        value_cut(np.linalg.eigh(hm - z[-2] * diag_g)[1][:, -1])
        value_cut(constrained_max(hm, lv, budget).vec)
        uu, ss, vvh = np.linalg.svd(blk)
        if ss[0] > 1 + 1e-12:
            norm_cut(uu[:, 0], vvh[0].conj())
        if radius < 1e-12:
            break
    return contraction(best[1]), best[0], converged


@dataclass(frozen=True)
class _BuresSolution:
    beta_sq: float
    rho: np.ndarray
    contraction: np.ndarray
    lam: float
    iterations: int
    converged: bool


def _bures_core(ov: _Overlap, g: EnergyObservable, budget: float, cfg: AscentConfig) -> _BuresSolution:
    rng = np.random.default_rng(cfg.seed)
    val, rho, iters = _maximize_overlap_objective(ov, g, budget, cfg, rng)
    c, lam, conv = optimal_contraction(ov, g, budget, rho, max_iter=cfg.cut_iter)
    return _BuresSolution(val, rho, c, lam, iters, conv)


def canonical_purification(rho: np.ndarray) -> np.ndarray:
    """Vector ``sum_ij (sqrt rho)_ij |i>|j>`` on ``A ⊗ A`` whose ``A``-marginal is ``rho``."""
    return psd_sqrt(hermitize(rho)).reshape(-1)


def bures_e_distance(phi, psi, g: EnergyObservable, budget: float, cfg: AscentConfig | None = None,
                     dilations: tuple[Dilation, Dilation] | None = None) -> DistanceReport:
    """Energy-constrained Bures distance between two CP maps.

    The marginal ``rho_A`` maximizing the concave overlap objective is found by
    SLSQP; the estimate is then the Bures distance of the two outputs on the
    canonical purification of ``rho_A``, evaluated through :func:`fidelity`.
    The upper bound ``sqrt(Lambda(C))`` holds for every contraction ``C``.
    """
    cfg = cfg or AscentConfig()
    phi, psi = _pair(phi, psi, g)
    if not budget > 0:
        raise ValueError(f"energy budget must be positive, got {budget}")
    vphi, vpsi = dilations if dilations is not None else (as_dilation(phi), as_dilation(psi))
    ov = _Overlap(vphi, vpsi)
    sol = _bures_core(ov, g, budget, cfg)
    d = g.dim
    x = canonical_purification(sol.rho)
    omega = proj(x)
    out_phi = extend(phi, d).apply(omega)
    out_psi = extend(psi, d).apply(omega)
    estimate = bures(out_phi, out_psi)
    gx = g.tensor_identity(d)
    nphi = ecd_norm_cp(phi, g, budget).dual_value
    npsi = ecd_norm_cp(psi, g, budget).dual_value
    bounds = [(np.sqrt(max(sol.lam, 0.0)), "common-dilation"), (np.sqrt(nphi + npsi), "trace")]
    upper, prov = min(bounds, key=lambda b: b[0])
    return DistanceReport(
        estimate=estimate,
        witness=_witness_state(x, gx.levels),
        witness_vector=x,
        lower=estimate,
        upper=float(upper),
        upper_provenance=prov,
        restarts=cfg.bures_restarts,
        iterations=sol.iterations,
        converged=sol.converged,
        extras={"contraction": sol.contraction, "marginal": sol.rho, "beta_sq_objective": sol.beta_sq},
    )


# --------------------------------------------------------------------------
# dilation constructions


def dilation_difference_bound(vphi: Dilation, vpsi: Dilation, g: EnergyObservable, budget: float,
                              cfg: AscentConfig | None = None) -> tuple[float, float]:
    """``(estimated D_E(Phi, Psi), ||V_phi - V_psi||_E (||V_phi||_E + ||V_psi||_E))``."""
    if vphi.v.shape != vpsi.v.shape or vphi.env_dim != vpsi.env_dim:
        raise DimensionError("dilations must have identical shapes and environment dimension")
    rhs = dilation_difference_rhs(vphi, vpsi, g, budget)
    rep = ecd_distance(vphi, vpsi, g, budget, cfg, dilations=(vphi, vpsi))
    return rep.estimate, rhs


@dataclass(frozen=True)
class CommonDilation:
    contraction: np.ndarray
    achieved: float
    beta_reference: float
    converged: bool
    iterations: int
    v_phi: Dilation
    v_psi: Dilation

    def within(self, match_tol: float, tol: float = 1e-6) -> bool:
        """Contract ``beta - tol <= achieved <= beta + match_tol``."""
        return self.beta_reference - tol <= self.achieved <= self.beta_reference + match_tol


def common_dilation_optimize(vphi: Dilation, vpsi: Dilation, g: EnergyObservable, budget: float,
                             cfg: AscentConfig | None = None) -> CommonDilation:
    """Contraction ``C`` making ``||V~_phi - V~_psi^C||_E`` as small as possible.

    The state side maximizes the concave overlap objective (the contraction is
    eliminated in closed form by trace-norm duality); the contraction side takes
    the polar factor on the range of the overlap and a cutting-plane solve on
    its kernel. ``achieved`` is the exact E-norm of the assembled doubled-
    environment difference; ``beta_reference`` is the Bures estimate evaluated
    through fidelities of the two outputs.
    """
    cfg = cfg or AscentConfig()
    ov = _Overlap(vphi, vpsi)
    _check_observable(ov.vphi, g)
    sol = _bures_core(ov, g, budget, cfg)
    tphi, tpsi = doubled_env_pair(ov.vphi, ov.vpsi, sol.contraction)
    achieved = e_norm(tphi.v - tpsi.v, g, budget).value
    d = g.dim
    omega = proj(canonical_purification(sol.rho))
    beta = bures(extend(ov.vphi, d).apply(omega), extend(ov.vpsi, d).apply(omega))
    return CommonDilation(sol.contraction, achieved, beta, sol.converged, sol.iterations, tphi, tpsi)


@dataclass(frozen=True)
class ChainTerm:
    name: str
    value: float
    provenance: str


@dataclass(frozen=True)
class ChainReport:
    terms: tuple
    slack: float
    holds: bool
    margins: tuple

    def to_dict(self) -> dict:
        return {
            "terms": [{"name": t.name, "value": t.value, "provenance": t.provenance} for t in self.terms],
            "slack": self.slack,
            "holds": self.holds,
            "margins": list(self.margins),
        }


def ksw_chain(phi, psi, g: EnergyObservable, budget: float, cfg: AscentConfig | None = None,
              dilations: tuple[Dilation, Dilation] | None = None, slack: float = 1e-4) -> ChainReport:
    """Evaluate ``D/(sqrt||Phi|| + sqrt||Psi||) <= inf ||V_phi - V_psi|| <= beta <= sqrt(D)``.

    The infimum over dilations is represented by the optimized common dilation
    (an upper estimate of the infimum). ``margins[i]`` is ``term[i+1] - term[i]``;
    the ordering holds when every margin is at least ``-slack``.
    """
    cfg = cfg or AscentConfig()
    phi, psi = _pair(phi, psi, g)
    vphi, vpsi = dilations if dilations is not None else (as_dilation(phi), as_dilation(psi))
    nphi = ecd_norm_cp(phi, g, budget).value
    npsi = ecd_norm_cp(psi, g, budget).value
    cd = common_dilation_optimize(vphi, vpsi, g, budget, cfg)
    dist = ecd_distance(phi, psi, g, budget, cfg, chain=cd.achieved)
    denom = np.sqrt(nphi) + np.sqrt(npsi)
    t1 = dist.estimate / denom if denom > 0 else 0.0
    terms = (
        ChainTerm("distance_over_norms", float(t1), "ascent lower bound / exact CP norms"),
        ChainTerm("dilation_infimum", float(cd.achieved), "optimized common dilation, exact E-norm"),
        ChainTerm("bures", float(cd.beta_reference), "fidelity of outputs at the optimized marginal"),
        ChainTerm("sqrt_distance", float(np.sqrt(dist.estimate)), "ascent lower bound"),
    )
    margins = tuple(terms[i + 1].value - terms[i].value for i in range(3))
    return ChainReport(terms, slack, all(m >= -slack for m in margins), margins)


# --------------------------------------------------------------------------
# continuity of Phi ⊗ Id on constrained states


@dataclass(frozen=True)
class ContinuityReport:
    passed: bool
    trials: int
    violations: int
    rhs: float
    max_lhs: float
    worst_pair: tuple | None = None


def continuity_rhs(phi, g: EnergyObservable, budget: float, eps: float) -> float:
    """``2 sqrt(eps ||Phi||_E ||Phi||_{4E/eps})`` with exact CP norms."""
    n1 = ecd_norm_cp(phi, g, budget).dual_value
    n2 = ecd_norm_cp(phi, g, 4.0 * budget / eps).dual_value
    return 2.0 * np.sqrt(eps * n1 * n2)


def continuity_bound_check(phi, g: EnergyObservable, budget: float, eps: float, trials: int, seed=0) -> ContinuityReport:
    """Sample pairs of constrained states on ``A ⊗ R`` at trace distance at most ``eps``.

    ``omega_2 = (1 - t) omega_1 + t sigma`` stays in the constrained set by
    convexity, with ``t`` chosen so that ``||omega_1 - omega_2||_1 <= eps``.
    """
    phi = as_kraus(phi)
    _check_observable(phi, g)
    if not 0 < eps <= 2:
        raise ValueError("eps must lie in (0, 2]")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    d = g.dim
    gx = g.tensor_identity(d)
    ext = extend(phi, d)
    rhs = continuity_rhs(phi, g, budget, eps)
    violations, max_lhs, worst = 0, 0.0, None
    for _ in range(trials):
        mode = "pure" if rng.random() < 0.5 else "mixed"
        w1 = sample_constrained(gx, budget, mode, rng).mat
        sigma = sample_constrained(gx, budget, "mixed", rng).mat
        dist = trace_norm(w1 - sigma)
        t = 1.0 if dist == 0 else min(1.0, eps / dist) * rng.uniform(0.05, 1.0)
        w2 = (1 - t) * w1 + t * sigma
        lhs = trace_norm(ext.apply(w1) - ext.apply(w2))
        if lhs > max_lhs:
            max_lhs, worst = lhs, (w1, w2)
        if lhs > rhs + 1e-12:
            violations += 1
    return ContinuityReport(violations == 0, trials, violations, rhs, max_lhs, worst)
