"""Independent reference computations used by the tests.

None of these call the optimizers under test: they sample, enumerate or use
closed forms.
"""

import numpy as np


def dual_upper(a, levels, budget, mu):
    """Weak-duality bound ``[lambda_max(A*A - mu G)]_+ + mu E`` on ``||A||_E^2``."""
    w = a.conj().T @ a - mu * np.diag(levels)
    return max(np.linalg.eigvalsh(w)[-1], 0.0) + mu * budget


def _feasible_scale(u, levels, budget):
    """Largest ``s <= 1`` with ``s <u|G|u> <= E`` for unit rows ``u``."""
    e = (np.abs(u) ** 2) @ levels
    with np.errstate(divide="ignore"):
        return np.where(e > budget, budget / np.maximum(e, 1e-300), 1.0)


def _to_energy_surface(u, levels, budget):
    """Re-weight ground and excited parts of over-budget unit rows to energy ``E``.

    Rows at or below budget, or without a ground component, are returned as is.
    """
    ground = levels == levels[0]
    p_ground = (np.abs(u[:, ground]) ** 2).sum(axis=1)
    p_exc = 1.0 - p_ground
    e = (np.abs(u) ** 2) @ levels
    mean_exc = np.where(p_exc > 0, (e - levels[0] * p_ground) / np.maximum(p_exc, 1e-300), levels[0])
    move = (e > budget) & (p_ground > 1e-12) & (mean_exc > budget)
    q = np.where(move, (budget - levels[0]) / np.maximum(mean_exc - levels[0], 1e-300), p_exc)
    c_exc = np.sqrt(q / np.maximum(p_exc, 1e-300))
    c_gnd = np.sqrt((1.0 - q) / np.maximum(p_ground, 1e-300))
    out = u.copy()
    out[np.ix_(move, ground)] = u[np.ix_(move, ground)] * c_gnd[move, None]
    out[np.ix_(move, ~ground)] = u[np.ix_(move, ~ground)] * c_exc[move, None]
    return out


def sampled_enorm_sq(a, levels, budget, rng, total=10_000, batch=10):
    """Sampled ``sup Tr(A rho A*)`` over ``Tr rho <= 1``, ``Tr G rho <= E``.

    Extreme points of the feasible set are ``s |u><u|`` with ``u`` a unit
    vector and ``s = min(1, E / <u|G|u>)``. Each proposal ``u`` is evaluated
    both scaled that way and moved onto the energy surface by re-weighting
    its ground and excited parts; both are feasible states, so the result
    never exceeds the true supremum. The first batch is uniform; later
    batches perturb the best state so far with an adaptive step size (a
    (1, lambda) evolution strategy), mutating coordinate ``k`` on the scale
    ``1 / sqrt(1 + E_k / E)``.
    """
    d = a.shape[1]
    ata = a.conj().T @ a

    def quad(u):
        return np.einsum("ni,ij,nj->n", u.conj(), ata, u).real

    def best_of(u):
        on_surface = _to_energy_surface(u, levels, budget)
        cand = np.concatenate([u, on_surface])
        vals = _feasible_scale(cand, levels, budget) * quad(cand)
        k = int(np.argmax(vals))
        return cand[k], float(vals[k])

    def unit(x):
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    # high-energy coordinates matter at scale sqrt(E / E_k): shrink their mutations
    precond = 1.0 / np.sqrt(1.0 + levels / budget)
    precond /= np.linalg.norm(precond) / np.sqrt(d)

    best_u, best = best_of(unit(rng.standard_normal((batch, d)) + 1j * rng.standard_normal((batch, d))))
    step = 0.5
    for _ in range(total // batch - 1):
        noise = rng.standard_normal((batch, d)) + 1j * rng.standard_normal((batch, d))
        u, val = best_of(unit(best_u[None, :] + step * precond * noise / np.sqrt(2 * d)))
        if val > best:
            best_u, best = u, val
            step *= 2.0
        else:
            step *= 0.8
        step = max(step, 1e-7)
    return best


def choi_outputs(kraus_ops, sqrt_rho):
    """``(Phi ⊗ Id)(|x><x|)`` for ``x = vec(S)`` (row-major), batched over ``S``.

    With row-major ``vec``, ``(K ⊗ I) vec(S) = vec(K S)``.
    """
    out = 0
    for k in kraus_ops:
        y = np.einsum("ij,njk->nik", k, sqrt_rho).reshape(sqrt_rho.shape[0], -1)
        out = out + np.einsum("ni,nj->nij", y, y.conj())
    return out


def qubit_marginals(budget, n, rng, level1=1.0):
    """States on a qubit with levels (0, level1) and energy at most ``budget``.

    A third of the draws fill the feasible part of the Bloch ball, a third
    lie on the pure-state sphere and a third on the energy plane (including
    its boundary circle), so that boundary optima are resolved finely.
    Returns the batch of square roots.
    """
    zmin = 1.0 - 2.0 * min(budget / level1, 1.0)
    m = n // 3
    r = []
    # volume
    v = rng.standard_normal((m, 3))
    v *= (rng.random(m) ** (1 / 3) / np.linalg.norm(v, axis=1))[:, None]
    r.append(v)
    # sphere
    s = rng.standard_normal((m, 3))
    r.append(s / np.linalg.norm(s, axis=1, keepdims=True))
    # energy plane z = zmin, radius up to the boundary circle (half the draws on it)
    k = n - 2 * m
    rad = np.sqrt(max(1.0 - zmin**2, 0.0)) * np.where(rng.random(k) < 0.5, 1.0, np.sqrt(rng.random(k)))
    ang = rng.uniform(0, 2 * np.pi, k)
    r.append(np.stack([rad * np.cos(ang), rad * np.sin(ang), np.full(k, zmin)], axis=1))
    r = np.concatenate(r)
    # reflect volume and sphere draws into the feasible cap z >= zmin
    bad = r[:, 2] < zmin
    r[bad, 2] = np.minimum(-r[bad, 2], 1.0)
    r = r[r[:, 2] >= zmin - 1e-15]
    x, y, z = r.T
    rho = 0.5 * np.stack([np.stack([1 + z, x - 1j * y], -1), np.stack([x + 1j * y, 1 - z], -1)], -2)
    w, u = np.linalg.eigh(rho)
    return np.einsum("nij,nj,nkj->nik", u, np.sqrt(np.clip(w, 0, None)), u.conj())


def sampled_ecd_qubit(phi_ops, psi_ops, budget, n, rng, chunk=100_000):
    """Max of ``||(Phi - Psi) ⊗ Id (|x><x|)||_1`` over sampled constrained pure ``x`` on ``C^2 ⊗ C^2``.

    A pure witness is determined up to a unitary on the reference by its
    marginal ``rho``; ``x = vec(sqrt(rho))`` represents that class.
    """
    best = 0.0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        s = qubit_marginals(budget, k, rng)
        diff = choi_outputs(phi_ops, s) - choi_outputs(psi_ops, s)
        vals = np.abs(np.linalg.eigvalsh(diff)).sum(axis=1)
        best = max(best, float(vals.max()))
        done += k
    return best


def _batched_psd_sqrt(m):
    w, u = np.linalg.eigh(m)
    return np.einsum("nij,nj,nkj->nik", u, np.sqrt(np.clip(w, 0, None)), u.conj())


def sampled_bures_qubit(phi_ops, psi_ops, budget, n, rng, chunk=100_000):
    """Max of ``beta((Phi ⊗ Id)(|x><x|), (Psi ⊗ Id)(|x><x|))`` over sampled constrained ``x``.

    Fidelity is evaluated as ``(Tr sqrt(sqrt(X) Y sqrt(X)))^2`` per sample.
    """
    best = 0.0
    done = 0
    while done < n:
        k = min(chunk, n - done)
        s = qubit_marginals(budget, k, rng)
        x = choi_outputs(phi_ops, s)
        y = choi_outputs(psi_ops, s)
        sx = _batched_psd_sqrt(x)
        root_f = np.sqrt(np.clip(np.linalg.eigvalsh(sx @ y @ sx), 0, None)).sum(axis=1)
        tr = np.einsum("nii->n", x).real + np.einsum("nii->n", y).real
        vals = np.sqrt(np.clip(tr - 2 * root_f, 0, None))
        best = max(best, float(vals.max()))
        done += k
    return best
