"""Kraus, Stinespring and two-operator representations of maps.

Index convention for dilations: a representing operator ``V`` has shape
``(d_B * d_E, d_A)`` and output row ``i_B * d_E + i_E`` (environment index
varies fastest). Every map acts on ``(d_A, d_A)`` matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matcore import DimensionError, as_cmat, hermitize, psd_sqrt

ISOMETRY_TOL = 1e-10


def _complex_to_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)]


def _pairs_to_complex(rows, where: str) -> np.ndarray:
    try:
        a = np.asarray(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{where}: entries must be [re, im] pairs") from exc
    if a.ndim != 3 or a.shape[-1] != 2:
        raise ValueError(f"{where}: expected a matrix of [re, im] pairs, got shape {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


@dataclass(frozen=True)
class KrausMap:
    """CP map ``rho -> sum_k V_k rho V_k^*``.

    ``channel`` asserts trace preservation and ``operation`` asserts the map is
    trace-nonincreasing; both are checked at construction.
    """

    ops: tuple
    channel: bool = False
    operation: bool = False
    dims: tuple = field(init=False)

    def __post_init__(self):
        ops = [as_cmat(v) for v in self.ops]
        if not ops:
            raise ValueError("a Kraus map needs at least one operator")
        shape = ops[0].shape
        if any(v.shape != shape for v in ops):
            raise DimensionError("Kraus operators must share their shape")
        for v in ops:
            v.setflags(write=False)
        object.__setattr__(self, "ops", tuple(ops))
        object.__setattr__(self, "dims", (shape[1], shape[0]))
        w = self.kraus_sum()
        eye = np.eye(shape[1])
        if self.channel and np.max(np.abs(w - eye)) > ISOMETRY_TOL:
            raise ValueError("channel flag set but sum V_k^* V_k != I")
        if self.operation or self.channel:
            top = np.linalg.eigvalsh(w)[-1]
            if top > 1 + ISOMETRY_TOL:
                raise ValueError("operation flag set but sum V_k^* V_k exceeds I")

    @property
    def d_in(self) -> int:
        return self.dims[0]

    @property
    def d_out(self) -> int:
        return self.dims[1]

    def kraus_sum(self) -> np.ndarray:
        """``W = sum_k V_k^* V_k``; the map is trace-preserving iff ``W = I``."""
        return hermitize(sum(v.conj().T @ v for v in self.ops))

    def apply(self, rho) -> np.ndarray:
        return apply(self, rho)

    def extend(self, d_r: int) -> "KrausMap":
        return extend(self, d_r)

    def adjoint_apply(self, y) -> np.ndarray:
        """Heisenberg-picture action ``Y -> sum_k V_k^* Y V_k``."""
        y = as_cmat(y)
        return sum(v.conj().T @ y @ v for v in self.ops)

    def to_dict(self) -> dict:
        return {
            "type": "kraus",
            "dims": list(self.dims),
            "channel": self.channel,
            "operation": self.operation,
            "ops": [_complex_to_pairs(v) for v in self.ops],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KrausMap":
        ops = [_pairs_to_complex(v, f"ops[{i}]") for i, v in enumerate(d["ops"])]
        km = cls(ops, channel=bool(d.get("channel", False)), operation=bool(d.get("operation", False)))
        if "dims" in d and tuple(d["dims"]) != km.dims:
            raise DimensionError(f"dims field {d['dims']} disagrees with operator shape {km.dims}")
        return km


@dataclass(frozen=True)
class Dilation:
    """Representing operator ``V`` of ``rho -> Tr_E V rho V^*``."""

    v: np.ndarray
    env_dim: int
    isometry: bool = False

    def __post_init__(self):
        v = as_cmat(self.v)
        if self.env_dim < 1 or v.shape[0] % self.env_dim:
            raise DimensionError(f"rows {v.shape[0]} not divisible by env_dim {self.env_dim}")
        v.setflags(write=False)
        object.__setattr__(self, "v", v)
        if self.isometry:
            if np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))) > ISOMETRY_TOL:
                raise ValueError("isometry flag set but V^* V != I")

    @property
    def d_in(self) -> int:
        return self.v.shape[1]

    @property
    def d_out(self) -> int:
        return self.v.shape[0] // self.env_dim

    @property
    def dims(self) -> tuple[int, int]:
        return (self.d_in, self.d_out)

    def blocks(self) -> np.ndarray:
        """``V`` viewed as an array of shape ``(d_B, d_E, d_A)``."""
        return self.v.reshape(self.d_out, self.env_dim, self.d_in)

    def apply(self, rho) -> np.ndarray:
        return apply_dilation(self, rho)

    def to_dict(self) -> dict:
        return {
            "type": "dilation",
            "dims": list(self.dims),
            "env_dim": self.env_dim,
            "isometry": self.isometry,
            "v": _complex_to_pairs(self.v),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Dilation":
        v = _pairs_to_complex(d["v"], "v")
        dl = cls(v, int(d["env_dim"]), isometry=bool(d.get("isometry", False)))
        if "dims" in d and tuple(d["dims"]) != dl.dims:
            raise DimensionError(f"dims field {d['dims']} disagrees with operator shape {dl.dims}")
        return dl


@dataclass(frozen=True)
class TwoOperatorMap:
    """Map ``rho -> Tr_E V1 rho V2^*`` (not positive in general)."""

    v1: np.ndarray
    v2: np.ndarray
    env_dim: int

    def __post_init__(self):
        v1, v2 = as_cmat(self.v1), as_cmat(self.v2)
        if v1.shape != v2.shape:
            raise DimensionError(f"operator shapes differ: {v1.shape} vs {v2.shape}")
        if v1.shape[0] % self.env_dim:
            raise DimensionError(f"rows {v1.shape[0]} not divisible by env_dim {self.env_dim}")
        object.__setattr__(self, "v1", v1)
        object.__setattr__(self, "v2", v2)

    @property
    def dims(self) -> tuple[int, int]:
        return (self.v1.shape[1], self.v1.shape[0] // self.env_dim)


def _check_input(rho, d_in: int) -> np.ndarray:
    rho = as_cmat(rho)
    if rho.shape != (d_in, d_in):
        raise DimensionError(f"input of shape {rho.shape}, map expects ({d_in}, {d_in})")
    return rho


def apply(phi: KrausMap, rho) -> np.ndarray:
    rho = _check_input(rho, phi.d_in)
    return sum(v @ rho @ v.conj().T for v in phi.ops)


def _trace_env(x: np.ndarray, d_b: int, d_e: int) -> np.ndarray:
    """Partial trace over the fast (environment) index of a ``(d_B d_E)``-square matrix."""
    return np.einsum("aebe->ab", x.reshape(d_b, d_e, d_b, d_e))


def apply_dilation(d: Dilation, rho) -> np.ndarray:
    rho = _check_input(rho, d.d_in)
    return _trace_env(d.v @ rho @ d.v.conj().T, d.d_out, d.env_dim)


def stinespring_from_kraus(k: KrausMap) -> Dilation:
    """Stack the Kraus operators: ``V|phi> = sum_k V_k|phi> ⊗ |k>``."""
    blocks = np.stack(k.ops, axis=1)  # (d_B, n_ops, d_A)
    v = blocks.reshape(k.d_out * len(k.ops), k.d_in)
    w = v.conj().T @ v
    iso = bool(np.max(np.abs(w - np.eye(k.d_in))) <= ISOMETRY_TOL)
    return Dilation(v, len(k.ops), isometry=iso)


def kraus_from_stinespring(d: Dilation, env_basis=None, channel: bool | None = None) -> KrausMap:
    """Slices ``V_k = (I_B ⊗ <e_k|) V`` for an orthonormal environment basis.

    ``env_basis`` holds the basis vectors as columns (standard basis when
    omitted); it may span a proper subspace only if it is still orthonormal,
    in which case the result represents the compressed map.
    """
    blocks = d.blocks()
    if env_basis is None:
        ops = [blocks[:, k, :] for k in range(d.env_dim)]
    else:
        b = as_cmat(env_basis)
        if b.shape[0] != d.env_dim:
            raise DimensionError(f"basis vectors of length {b.shape[0]}, environment is {d.env_dim}")
        if np.max(np.abs(b.conj().T @ b - np.eye(b.shape[1]))) > 1e-10:
            raise ValueError("environment basis is not orthonormal")
        ops = list(np.einsum("bea,ek->kba", blocks, b.conj()))
    if channel is None:
        channel = d.isometry and (env_basis is None or as_cmat(env_basis).shape[1] == d.env_dim)
    return KrausMap(ops, channel=channel)


def extend(phi, d_r: int) -> KrausMap:
    """``Phi ⊗ Id_R`` as the Kraus family ``{V_k ⊗ I_R}`` on ``A ⊗ R``."""
    if isinstance(phi, Dilation):
        phi = kraus_from_stinespring(phi)
    if d_r < 1:
        raise ValueError("reference dimension must be positive")
    eye = np.eye(d_r)
    return KrausMap([np.kron(v, eye) for v in phi.ops], channel=phi.channel, operation=phi.operation)


def two_op_apply(t: TwoOperatorMap, rho) -> np.ndarray:
    rho = _check_input(rho, t.dims[0])
    d_b = t.dims[1]
    return _trace_env(t.v1 @ rho @ t.v2.conj().T, d_b, t.env_dim)


def two_op_apply_jordan(t: TwoOperatorMap, rho) -> np.ndarray:
    """Same map evaluated through the decomposition ``rho = rho_+ - rho_-``.

    Each positive part is split into rank-one terms ``|phi_i><phi_i|`` and the
    map is applied as ``sum_i |V1 phi_i><V2 phi_i|``. Agrees with
    :func:`two_op_apply` for Hermitian input.
    """
    rho = hermitize(_check_input(rho, t.dims[0]))
    w, u = np.linalg.eigh(rho)
    d_b = t.dims[1]
    out = np.zeros((d_b, d_b), dtype=complex)
    for lam, phi in zip(w, u.T):
        if lam == 0:
            continue
        a, b = t.v1 @ phi, t.v2 @ phi
        out += lam * _trace_env(np.outer(a, b.conj()), d_b, t.env_dim)
    return out


def polarize(t: TwoOperatorMap) -> tuple[Dilation, Dilation, Dilation, Dilation]:
    """CP maps with ``Psi = (Phi_1 - Phi_2 + i Phi_3 - i Phi_4) / 4``.

    The representing operators are ``V1 + V2``, ``V1 - V2``, ``V1 + iV2`` and
    ``V1 - iV2``.
    """
    v1, v2, e = t.v1, t.v2, t.env_dim
    return (
        Dilation(v1 + v2, e),
        Dilation(v1 - v2, e),
        Dilation(v1 + 1j * v2, e),
        Dilation(v1 - 1j * v2, e),
    )


def recombine_polarization(parts, rho) -> np.ndarray:
    """Recombine the four polarization pieces on ``rho``."""
    f1, f2, f3, f4 = (apply_dilation(p, rho) for p in parts)
    return 0.25 * (f1 - f2 + 1j * f3 - 1j * f4)


def pad_env(d: Dilation, env_dim: int) -> Dilation:
    """Embed the environment into a larger one (zero rows for the new levels)."""
    if env_dim < d.env_dim:
        raise DimensionError("cannot shrink the environment")
    blocks = np.zeros((d.d_out, env_dim, d.d_in), dtype=complex)
    blocks[:, : d.env_dim, :] = d.blocks()
    return Dilation(blocks.reshape(-1, d.d_in), env_dim, isometry=d.isometry)


def doubled_env_pair(vphi: Dilation, vpsi: Dilation, contraction) -> tuple[Dilation, Dilation]:
    """Common dilation on the doubled environment ``E ⊕ E``.

    Returns ``(V~_phi, V~_psi^C)`` with ``V~_phi = V_phi ⊕ 0`` and
    ``V~_psi^C = (I ⊗ C) V_psi ⊕ (I ⊗ sqrt(I - C^*C)) V_psi``. ``C`` must be a
    contraction on the (common) environment.
    """
    if vphi.dims != vpsi.dims or vphi.env_dim != vpsi.env_dim:
        raise DimensionError("dilations must share input, output and environment dimensions")
    c = as_cmat(contraction)
    e = vphi.env_dim
    if c.shape != (e, e):
        raise DimensionError(f"contraction of shape {c.shape} for environment {e}")
    defect = psd_sqrt(hermitize(np.eye(e) - c.conj().T @ c))
    d_b, d_a = vphi.d_out, vphi.d_in
    bphi = np.zeros((d_b, 2 * e, d_a), dtype=complex)
    bphi[:, :e, :] = vphi.blocks()
    bpsi = np.zeros((d_b, 2 * e, d_a), dtype=complex)
    src = vpsi.blocks()
    bpsi[:, :e, :] = np.einsum("fe,bea->bfa", c, src)
    bpsi[:, e:, :] = np.einsum("fe,bea->bfa", defect, src)
    return Dilation(bphi.reshape(-1, d_a), 2 * e), Dilation(bpsi.reshape(-1, d_a), 2 * e)


def map_from_dict(d: dict):
    """Deserialize a ``KrausMap`` or ``Dilation`` from its JSON form."""
    kind = d.get("type", "kraus")
    if kind == "kraus":
        return KrausMap.from_dict(d)
    if kind == "dilation":
        return Dilation.from_dict(d)
    raise ValueError(f"unknown map type {kind!r}")


def as_kraus(phi) -> KrausMap:
    return kraus_from_stinespring(phi) if isinstance(phi, Dilation) else phi


def as_dilation(phi) -> Dilation:
    return stinespring_from_kraus(phi) if isinstance(phi, KrausMap) else phi


# a few fixed maps used by tests, demos and the CLI scenarios

def identity_channel(d: int) -> KrausMap:
    return KrausMap([np.eye(d)], channel=True)


def dephasing_channel(d: int) -> KrausMap:
    """Complete dephasing in the energy eigenbasis."""
    ops = []
    for k in range(d):
        p = np.zeros((d, d))
        p[k, k] = 1.0
        ops.append(p)
    return KrausMap(ops, channel=True)


def reset_channel(d: int) -> KrausMap:
    """``rho -> Tr(rho) |tau_0><tau_0|``."""
    ops = []
    for k in range(d):
        op = np.zeros((d, d))
        op[0, k] = 1.0
        ops.append(op)
    return KrausMap(ops, channel=True)


def amplitude_damping(gamma: float) -> KrausMap:
    k0 = np.array([[1.0, 0.0], [0.0, np.sqrt(1 - gamma)]])
    k1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]])
    return KrausMap([k0, k1], channel=True)


def random_kraus(d_in: int, d_out: int, n_ops: int, rng: np.random.Generator, channel: bool = True) -> KrausMap:
    """Random CP map; normalized to a channel when ``channel`` is set."""
    from .matcore import ginibre

    ops = [ginibre(d_out, d_in, rng) for _ in range(n_ops)]
    w = sum(v.conj().T @ v for v in ops)
    if channel:
        ev, u = np.linalg.eigh(w)
        inv_sqrt = (u / np.sqrt(ev)) @ u.conj().T
        ops = [v @ inv_sqrt for v in ops]
    else:
        ops = [v / np.sqrt(np.linalg.eigvalsh(w)[-1]) * rng.uniform(0.3, 1.5) for v in ops]
    return KrausMap(ops, channel=channel)


def annihilation(d: int) -> np.ndarray:
    """Truncated annihilation operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, d)), k=1).astype(complex)
