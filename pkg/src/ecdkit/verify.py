"""Property checks behind ``ecdkit verify``.

Every check draws its instances from its own child seed, so results do not
depend on which checks run or on how they are scheduled. A check returns a
:class:`CheckResult`; failing results carry the first offending instance as
JSON-ready data together with the seed and trial index that reproduce it.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import truncate
from .channel import (
    Dilation,
    _complex_to_pairs,
    amplitude_damping,
    dephasing_channel,
    extend,
    identity_channel,
    kraus_from_stinespring,
    random_kraus,
    reset_channel,
    stinespring_from_kraus,
)
from .distance import (
    AscentConfig,
    bures,
    continuity_bound_check,
    ecd_distance,
    ecd_norm_cp,
    ksw_chain,
)
from .energy import (
    EnergyObservable,
    energy_of,
    pinch_channel,
    pinch_deviation,
    sample_constrained,
    sample_constrained_vector,
    spectral_projector,
)
from .enorm import e_norm, e_norm_graded, sandwich_product_bound
from .matcore import ginibre, partial_trace, random_psd, trace_norm

SUITES = ("enorm", "channel", "distance", "truncate")

# ascent settings for the sampled distance checks (small dimensions only)
CHECK_CONFIG = AscentConfig(restarts=6, max_iter=150, polish=2, bures_restarts=2)
# the slower checks run on a fraction of the requested trials
HEAVY_DIVISOR = 5


@dataclass
class CheckResult:
    name: str
    passed: bool
    trials: int
    worst: float
    instance: dict | None = field(default=None)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} {self.name} trials={self.trials} worst_margin={self.worst:.3e}"


class _Tracker:
    """Track the smallest margin ``rhs - lhs`` and the first failing instance."""

    def __init__(self, name: str, seed: int):
        self.name, self.seed = name, seed
        self.worst = np.inf
        self.trials = 0
        self.instance = None

    def record(self, margin: float, tol: float, trial: int, data: Callable[[], dict]) -> None:
        self.trials = max(self.trials, trial + 1)
        self.worst = min(self.worst, margin)
        if margin < -tol and self.instance is None:
            self.instance = {"check": self.name, "seed": self.seed, "trial": trial, "margin": margin, **data()}

    def result(self) -> CheckResult:
        worst = 0.0 if not np.isfinite(self.worst) else float(self.worst)
        return CheckResult(self.name, self.instance is None, self.trials, worst, self.instance)


def _mat(m) -> list:
    return _complex_to_pairs(np.asarray(m))


def _observable(rng, d: int, grounded: bool | None = None) -> EnergyObservable:
    levels = np.sort(rng.exponential(1.0, d))
    if grounded is None:
        grounded = rng.random() < 0.7
    if grounded:
        levels = levels - levels[0]
    return EnergyObservable(levels)


def _budget(rng, g: EnergyObservable) -> float:
    lo = max(g.levels[0], 1e-3)
    return float(rng.uniform(lo, g.levels[-1] + lo) + 1e-3)


def _operator_instance(rng, max_dim: int = 8):
    d = int(rng.integers(2, max_dim + 1))
    g = _observable(rng, d)
    a = ginibre(int(rng.integers(1, d + 1)), d, rng)
    return a, g, _budget(rng, g)


def _cp_instance(rng, max_dim: int = 4, channel: bool | None = None):
    d = int(rng.integers(2, max_dim + 1))
    g = _observable(rng, d, grounded=True)
    if channel is None:
        channel = rng.random() < 0.5
    d_out = int(rng.integers(2, max_dim + 1))
    # a channel needs sum_k V_k^* V_k invertible, so at least d_in / d_out operators
    n_ops = max(int(rng.integers(1, 4)), -(-d // d_out))
    phi = random_kraus(d, d_out, n_ops, rng, channel=channel)
    return phi, g, _budget(rng, g)


# --------------------------------------------------------------------------
# enorm suite


def check_duality_gap(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e = _operator_instance(rng, 16)
        cert = e_norm(a, g, e)
        ok_state = cert.primal_state.trace <= 1 + 1e-12 and energy_of(cert.primal_state, g) <= e + 1e-9
        margin = 1e-8 - cert.gap if ok_state else -1.0
        t.record(margin, 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E": e, "gap": cert.gap})


def check_sampled_lower_bound(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e = _operator_instance(rng)
        val = e_norm(a, g, e).value
        k = int(rng.integers(1, 5))
        gk = g.tensor_identity(k)
        ak = np.kron(a, np.eye(k))
        best = 0.0
        for _ in range(20):
            phi = sample_constrained_vector(gk, e, rng)
            best = max(best, float(np.linalg.norm(ak @ phi)))
            # a sub-normalized collection: split one constrained vector into weighted pieces
            w = rng.dirichlet(np.ones(3))
            parts = [np.sqrt(wj) * sample_constrained_vector(g, e, rng) for wj in w]
            best = max(best, float(np.sqrt(sum(np.linalg.norm(a @ p) ** 2 for p in parts))))
        t.record(val + 1e-8 - best, 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E": e, "sampled": best})


def check_graded_sandwich(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e = _operator_instance(rng)
        n = e_norm(a, g, e).value
        m = e_norm_graded(a, g, e)
        margin = min(m - np.sqrt(0.5) * n, n - m) + 1e-8
        t.record(margin, 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E": e})


def check_energy_scaling(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e1 = _operator_instance(rng)
        e2 = e1 * float(rng.uniform(1.01, 5.0))
        n1, n2 = e_norm(a, g, e1).value, e_norm(a, g, e2).value
        margin = min(n2 - n1, np.sqrt(e2 / e1) * n1 - n2) + 1e-8
        t.record(margin, 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E1": e1, "E2": e2})


def check_concavity(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e1 = _operator_instance(rng)
        e2 = e1 * float(rng.uniform(1.01, 5.0))
        sq = [e_norm(a, g, e).value ** 2 for e in (e1, 0.5 * (e1 + e2), e2)]
        margin = sq[1] - 0.5 * (sq[0] + sq[2]) + 1e-7
        t.record(margin, 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E1": e1, "E2": e2})


def check_tensor_stability(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e = _operator_instance(rng, 6)
        k = int(rng.integers(2, 4))
        v1 = e_norm(a, g, e).value
        v2 = e_norm(np.kron(a, np.eye(k)), g.tensor_identity(k), e).value
        t.record(1e-8 - abs(v1 - v2), 0.0, i, lambda: {"a": _mat(a), "levels": list(g.levels), "E": e, "K": k})


# --------------------------------------------------------------------------
# channel suite


def _units(d: int):
    for j in range(d):
        for k in range(d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = 1.0
            yield m


def check_round_trip(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, _, _ = _cp_instance(rng)
        back = kraus_from_stinespring(stinespring_from_kraus(phi))
        err = max(np.max(np.abs(phi.apply(u) - back.apply(u))) for u in _units(phi.d_in))
        t.record(1e-12 - err, 0.0, i, lambda: {"phi": phi.to_dict(), "error": float(err)})


def check_trace_flags(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, _, _ = _cp_instance(rng, channel=True)
        rho = random_psd(phi.d_in, rng)
        margin = 1e-12 - abs(np.trace(phi.apply(rho)).real - 1.0)
        t.record(margin, 0.0, i, lambda: {"phi": phi.to_dict(), "rho": _mat(rho)})


def check_extend_partial_trace(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, _, _ = _cp_instance(rng)
        d_r = int(rng.integers(1, 4))
        omega = random_psd(phi.d_in * d_r, rng)
        lhs = partial_trace(extend(phi, d_r).apply(omega), (phi.d_out, d_r), 0)
        rhs = phi.apply(partial_trace(omega, (phi.d_in, d_r), 0))
        err = float(np.max(np.abs(lhs - rhs)))
        t.record(1e-11 - err, 0.0, i, lambda: {"phi": phi.to_dict(), "omega": _mat(omega), "d_r": d_r})


def check_slice_norms(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, g, e = _cp_instance(rng)
        v = stinespring_from_kraus(phi)
        top = e_norm(v.v, g, e).value
        margin = min(top + 1e-9 - e_norm(k, g, e).value for k in kraus_from_stinespring(v).ops)
        t.record(margin, 0.0, i, lambda: {"phi": phi.to_dict(), "levels": list(g.levels), "E": e})


def check_pinch(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        d = int(rng.integers(2, 6))
        g = _observable(rng, d, grounded=True)
        e = _budget(rng, g)
        cutoff = e * float(rng.uniform(1.0, 8.0))
        d_r = int(rng.integers(1, 3))
        omega = sample_constrained(g.tensor_identity(d_r), e, "mixed", rng).mat
        lhs, rhs = pinch_deviation(omega, g, cutoff, e)
        pi = pinch_channel(g, cutoff)
        tp_err = float(np.max(np.abs(pi.kraus_sum() - np.eye(d))))
        rho = partial_trace(omega, (d, d_r), 0)
        energy_margin = cutoff - energy_of(pi.apply(rho), g)
        margin = min(rhs - lhs, 1e-12 - tp_err, energy_margin + 1e-12)
        t.record(margin, 0.0, i, lambda: {"levels": list(g.levels), "E": e, "cutoff": cutoff, "omega": _mat(omega)})


# --------------------------------------------------------------------------
# distance suite


def check_cp_norm_identity(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, g, e = _cp_instance(rng)
        n = ecd_norm_cp(phi, g, e).value
        target = 1.0 if phi.channel else e_norm(stinespring_from_kraus(phi).v, g, e).value ** 2
        t.record(1e-8 - abs(n - target), 0.0, i, lambda: {"phi": phi.to_dict(), "levels": list(g.levels), "E": e})


def check_cp_scaling(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, g, e1 = _cp_instance(rng, channel=False)
        e2 = e1 * float(rng.uniform(1.01, 5.0))
        n = [ecd_norm_cp(phi, g, e).value for e in (e1, 0.5 * (e1 + e2), e2)]
        margin = min(n[2] - n[0], (e2 / e1) * n[0] - n[2], n[1] - 0.5 * (n[0] + n[2])) + 1e-8
        t.record(margin, 0.0, i, lambda: {"phi": phi.to_dict(), "levels": list(g.levels), "E1": e1, "E2": e2})


def _canonical_pair(rng, i: int):
    pairs = [
        (identity_channel(2), dephasing_channel(2)),
        (identity_channel(2), reset_channel(2)),
        (identity_channel(2), amplitude_damping(float(rng.uniform(0.1, 0.9)))),
    ]
    if i < len(pairs):
        return pairs[i]
    return random_kraus(2, 2, 2, rng), random_kraus(2, 2, 2, rng)


def check_distance_witness(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, psi = _canonical_pair(rng, i)
        g = _observable(rng, 2, grounded=True)
        e = _budget(rng, g)
        rep = ecd_distance(phi, psi, g, e, CHECK_CONFIG)
        x = rep.witness_vector
        d_r = rep.extras["ref_dim"]
        omega = np.outer(x, x.conj())
        val = trace_norm(extend(phi, d_r).apply(omega) - extend(psi, d_r).apply(omega))
        feas = e + 1e-9 - energy_of(omega, g.tensor_identity(d_r))
        margin = min(1e-8 - abs(val - rep.estimate), rep.upper + 1e-8 - rep.lower, feas)
        t.record(margin, 0.0, i, lambda: {"phi": phi.to_dict(), "psi": psi.to_dict(), "levels": list(g.levels), "E": e})


def check_ksw_chain(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, psi = _canonical_pair(rng, i)
        g = _observable(rng, 2, grounded=True)
        e = _budget(rng, g)
        rep = ksw_chain(phi, psi, g, e, CHECK_CONFIG)
        t.record(min(rep.margins) + rep.slack, 0.0, i,
                 lambda: {"phi": phi.to_dict(), "psi": psi.to_dict(), "levels": list(g.levels), "E": e})


def check_bures_monotone(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        da, db = int(rng.integers(2, 4)), int(rng.integers(2, 4))
        rho = random_psd(da * db, rng, trace=float(rng.uniform(0.2, 1.0)))
        sigma = random_psd(da * db, rng, trace=float(rng.uniform(0.2, 1.0)))
        full = bures(rho, sigma)
        part = bures(partial_trace(rho, (da, db), 0), partial_trace(sigma, (da, db), 0))
        t.record(full - part + 1e-9, 0.0, i, lambda: {"rho": _mat(rho), "sigma": _mat(sigma), "split": [da, db]})


def check_bures_trace_sandwich(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        d = int(rng.integers(2, 6))
        rank = int(rng.integers(1, d + 1))
        rho = random_psd(d, rng, rank=rank, trace=float(rng.uniform(0.1, 1.0)))
        sigma = random_psd(d, rng, trace=float(rng.uniform(0.1, 1.0)))
        b = bures(rho, sigma)
        dist = trace_norm(rho - sigma)
        low = dist / (np.sqrt(np.trace(rho).real) + np.sqrt(np.trace(sigma).real))
        margin = min(b - low, np.sqrt(dist) - b) + 1e-9
        t.record(margin, 0.0, i, lambda: {"rho": _mat(rho), "sigma": _mat(sigma)})


def check_continuity(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, g, e = _cp_instance(rng, 3)
        eps = float(rng.uniform(0.05, 1.0))
        rep = continuity_bound_check(phi, g, e, eps, trials=10, seed=int(rng.integers(2**31)))
        t.record(rep.rhs - rep.max_lhs, 1e-12, i,
                 lambda: {"phi": phi.to_dict(), "levels": list(g.levels), "E": e, "eps": eps})


def check_product_bound(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        a, g, e = _operator_instance(rng)
        b = ginibre(a.shape[0], a.shape[1], rng)
        rho = sample_constrained(g, e, "mixed" if rng.random() < 0.5 else "pure", rng)
        lhs, rhs = sandwich_product_bound(a, b, rho, g)
        t.record(rhs - lhs + 1e-9, 0.0, i, lambda: {"a": _mat(a), "b": _mat(b), "rho": _mat(rho.mat),
                                                    "levels": list(g.levels)})


# --------------------------------------------------------------------------
# truncate suite


def _dilation_instance(rng, max_dim: int = 5):
    d = int(rng.integers(2, max_dim + 1))
    g = _observable(rng, d, grounded=True)
    env = int(rng.integers(1, 3))
    v = Dilation(ginibre(int(rng.integers(1, 3)) * env, d, rng) / np.sqrt(d), env)
    e = _budget(rng, g)
    return v, g, e


def check_tail_bound(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        v, g, e = _dilation_instance(rng, 8)
        cutoff = e * float(rng.uniform(1.0, 6.0))
        lhs, rhs = truncate.tail_norm_check(v, g, e, cutoff)
        t.record(rhs - lhs + 1e-9, 0.0, i, lambda: {"v": v.to_dict(), "levels": list(g.levels), "E": e, "E_n": cutoff})


def check_bound30(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        v, g, e = _dilation_instance(rng, 3)
        cutoff = e * float(rng.uniform(1.0, 4.0))
        row = truncate.bound30_check(v, g, e, cutoff, CHECK_CONFIG)
        t.record(row.rhs_bound - row.lhs_estimate, 0.0, i,
                 lambda: {"v": v.to_dict(), "levels": list(g.levels), "E": e, "E_n": cutoff,
                          "lhs_estimate": row.lhs_estimate, "rhs_bound": row.rhs_bound})


def check_truncated_isometry(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        phi, g, _ = _cp_instance(rng, channel=True)
        v = stinespring_from_kraus(phi)
        cutoff = float(rng.uniform(0.0, g.levels[-1] + 1.0))
        kn = kraus_from_stinespring(truncate.truncate_map(v, g, cutoff))
        top = float(np.linalg.eigvalsh(kn.kraus_sum())[-1])
        exact = spectral_projector(g, cutoff)
        err = float(np.max(np.abs(kn.kraus_sum() - exact)))
        t.record(min(1.0 + 1e-12 - top, 1e-12 - err), 0.0, i,
                 lambda: {"phi": phi.to_dict(), "levels": list(g.levels), "E_n": cutoff})


def check_cauchy(t: _Tracker, rng, trials: int) -> None:
    for i in range(trials):
        v, g, e = _dilation_instance(rng, 3)
        sched = sorted({float(x) for x in e * rng.uniform(1.0, 4.0, 2)})
        if len(sched) < 2:
            continue
        full = kraus_from_stinespring(v)
        maps = [kraus_from_stinespring(truncate.truncate_map(v, g, c)) for c in sched]
        dm = ecd_distance(maps[0], maps[1], g, e, CHECK_CONFIG).estimate
        d0 = ecd_distance(maps[0], full, g, e, CHECK_CONFIG).estimate
        d1 = ecd_distance(maps[1], full, g, e, CHECK_CONFIG).estimate
        # the distance is 0 once the cutoff covers the whole spectrum
        top = ecd_distance(kraus_from_stinespring(truncate.truncate_map(v, g, g.levels[-1])), full,
                           g, e, CHECK_CONFIG).estimate
        margin = min(d0 + d1 + 1e-6 - dm, 1e-12 - top)
        t.record(margin, 0.0, i, lambda: {"v": v.to_dict(), "levels": list(g.levels), "E": e, "schedule": sched})


# name -> (function, heavy)
CHECKS: dict[str, dict[str, tuple[Callable, bool]]] = {
    "enorm": {
        "enorm.duality_gap": (check_duality_gap, False),
        "enorm.sampled_lower_bound": (check_sampled_lower_bound, False),
        "enorm.graded_sandwich": (check_graded_sandwich, False),
        "enorm.energy_scaling": (check_energy_scaling, False),
        "enorm.concavity": (check_concavity, False),
        "enorm.tensor_stability": (check_tensor_stability, False),
    },
    "channel": {
        "channel.round_trip": (check_round_trip, False),
        "channel.trace_preserving": (check_trace_flags, False),
        "channel.extend_partial_trace": (check_extend_partial_trace, False),
        "channel.slice_norms": (check_slice_norms, False),
        "channel.pinch": (check_pinch, False),
    },
    "distance": {
        "distance.cp_norm_identity": (check_cp_norm_identity, False),
        "distance.cp_scaling_concavity": (check_cp_scaling, False),
        "distance.bures_monotone": (check_bures_monotone, False),
        "distance.bures_trace_sandwich": (check_bures_trace_sandwich, False),
        "distance.product_bound": (check_product_bound, False),
        "distance.continuity": (check_continuity, True),
        "distance.witness": (check_distance_witness, True),
        "distance.ksw_chain": (check_ksw_chain, True),
    },
    "truncate": {
        "truncate.tail_bound": (check_tail_bound, False),
        "truncate.truncated_isometry": (check_truncated_isometry, False),
        "truncate.bound30": (check_bound30, True),
        "truncate.cauchy": (check_cauchy, True),
    },
}


def selected(suite: str) -> list[str]:
    if suite == "all":
        return [name for s in SUITES for name in CHECKS[s]]
    if suite not in CHECKS:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)} or all")
    return list(CHECKS[suite])


def _registry() -> dict[str, tuple[Callable, bool]]:
    return {name: entry for s in SUITES for name, entry in CHECKS[s].items()}


def run_check(name: str, seed: int, trials: int) -> CheckResult:
    fn, heavy = _registry()[name]
    # a child seed per check name keeps results independent of suite selection
    child = int(np.random.SeedSequence([seed, *name.encode()]).generate_state(1)[0])
    n = max(1, trials // HEAVY_DIVISOR) if heavy else trials
    tracker = _Tracker(name, child)
    try:
        fn(tracker, np.random.default_rng(child), n)
    except Exception as exc:  # a crash inside a check counts as a failed property
        tracker.instance = {"check": name, "seed": child, "error": f"{type(exc).__name__}: {exc}"}
    return tracker.result()


def run_suite(suite: str, seed: int, trials: int, threads: int = 1) -> list[CheckResult]:
    """Run the named suite; results come back in registry order whatever ``threads`` is."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    names = selected(suite)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda n: run_check(n, seed, trials), names))
    else:
        results = [run_check(n, seed, trials) for n in names]
    order = {n: k for k, n in enumerate(names)}
    return sorted(results, key=lambda r: order[r.name])
