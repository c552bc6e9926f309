"""Quantum channels in Kraus form and the constructors used by the checks."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ArityMismatch, DimensionMismatch, TooManyOutcomes
from .fisher import POVM, ParametricFamily, derivative
from .qmat import (
    DEFAULT_TOL,
    DensityMatrix,
    ToleranceConfig,
    as_matrix,
    dagger,
    eig_hermitian,
    ket,
    psd_sqrt,
    tensor,
)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """ρ -> Σ_k K_k ρ K_k†. Trace preservation is checked by :func:`is_cptp`."""

    kraus: tuple[np.ndarray, ...]
    dims_in: tuple[int, ...]
    dims_out: tuple[int, ...]
    name: str = "channel"

    def __post_init__(self):
        dims_in = tuple(int(d) for d in self.dims_in)
        dims_out = tuple(int(d) for d in self.dims_out)
        d_in, d_out = int(np.prod(dims_in)), int(np.prod(dims_out))
        ks = []
        for k in self.kraus:
            k = np.array(k, dtype=complex)
            if k.shape != (d_out, d_in):
                raise DimensionMismatch(f"Kraus operator of shape {k.shape}, expected {(d_out, d_in)}")
            k.setflags(write=False)
            ks.append(k)
        object.__setattr__(self, "kraus", tuple(ks))
        object.__setattr__(self, "dims_in", dims_in)
        object.__setattr__(self, "dims_out", dims_out)

    @property
    def d_in(self) -> int:
        return int(np.prod(self.dims_in))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.dims_out))

    def __call__(self, rho: DensityMatrix) -> DensityMatrix:
        return apply(self, rho)


def apply_map(ch: KrausChannel, x) -> np.ndarray:
    """Linear action Σ_k K_k X K_k† on an arbitrary operator."""
    x = as_matrix(x)
    if x.shape != (ch.d_in, ch.d_in):
        raise DimensionMismatch(f"channel input dim {ch.d_in} vs operator {x.shape}")
    if not ch.kraus:
        return np.zeros((ch.d_out, ch.d_out), dtype=complex)
    K = np.stack(ch.kraus)
    return np.einsum("kab,bc,kdc->ad", K, x, K.conj())


def apply(ch: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if tuple(rho.dims) != ch.dims_in and rho.dim != ch.d_in:
        raise DimensionMismatch(f"channel expects dims {ch.dims_in}, got {rho.dims}")
    out = apply_map(ch, rho.mat)
    return DensityMatrix((out + dagger(out)) / 2, ch.dims_out, rho.tol)


def adjoint_apply(ch: KrausChannel, effect) -> np.ndarray:
    """Heisenberg picture Σ_k K_k† M K_k."""
    m = as_matrix(effect)
    if m.shape != (ch.d_out, ch.d_out):
        raise DimensionMismatch(f"channel output dim {ch.d_out} vs effect {m.shape}")
    if not ch.kraus:
        return np.zeros((ch.d_in, ch.d_in), dtype=complex)
    K = np.stack(ch.kraus)
    return np.einsum("kba,bc,kcd->ad", K.conj(), m, K)


def pullback(ch: KrausChannel, m: POVM, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    """The measurement Λ†(M) on the channel input."""
    return POVM(tuple(adjoint_apply(ch, e) for e in m.effects), m.labels, tol)


def cptp_residual(ch: KrausChannel) -> float:
    total = sum((dagger(k) @ k for k in ch.kraus), np.zeros((ch.d_in, ch.d_in), dtype=complex))
    return float(np.linalg.norm(total - np.eye(ch.d_in)))


def is_cptp(ch: KrausChannel, tol: ToleranceConfig = DEFAULT_TOL) -> tuple[bool, float]:
    """(trace preserving?, ‖Σ K†K − I‖_F). Complete positivity is automatic."""
    r = cptp_residual(ch)
    return bool(ch.kraus) and r <= tol.povm, r


def pushforward(ch: KrausChannel, f: ParametricFamily, tol: ToleranceConfig = DEFAULT_TOL) -> ParametricFamily:
    """The family θ -> Λ(ρ_θ), with derivative Λ(∂ρ_θ) by linearity."""
    if ch.d_in != f.dim:
        raise DimensionMismatch(f"channel input dim {ch.d_in} vs family dim {f.dim}")

    def state_at(theta):
        out = apply_map(ch, f.state_at(theta).mat)
        return DensityMatrix((out + dagger(out)) / 2, ch.dims_out, tol)

    def d_at(theta):
        out = apply_map(ch, derivative(f, theta, tol))
        return (out + dagger(out)) / 2

    return ParametricFamily(
        state_at=state_at, analytic_derivative=d_at, domain=f.domain, dims=ch.dims_out,
        smooth_pieces=f.smooth_pieces, singular_points=f.singular_points,
        name=f"{ch.name}({f.name})",
    )


# --------------------------------------------------------------------------
# constructors


def identity_channel(dims: Sequence[int]) -> KrausChannel:
    d = int(np.prod(dims))
    return KrausChannel((np.eye(d),), tuple(dims), tuple(dims), name="identity")


def unitary_channel(u, dims: Sequence[int] | None = None) -> KrausChannel:
    u = as_matrix(u)
    dims = tuple(dims) if dims else (u.shape[0],)
    return KrausChannel((u,), dims, dims, name="unitary")


def depolarizing_channel(p: float, d: int = 2) -> KrausChannel:
    """ρ -> (1 − p) ρ + p I/d."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing probability must lie in [0, 1]")
    ks = [np.sqrt(1 - p) * np.eye(d)]
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = np.sqrt(p / d)
            ks.append(e)
    return KrausChannel(tuple(ks), (d,), (d,), name=f"depolarizing({p:g})")


def dephasing_channel(d: int = 2) -> KrausChannel:
    ks = tuple(np.outer(ket(j, dim=d), ket(j, dim=d)) for j in range(d))
    return KrausChannel(ks, (d,), (d,), name="dephasing")


def _state_kets(rho: DensityMatrix, tol: ToleranceConfig) -> list[np.ndarray]:
    """Vectors |v_k> with ρ = Σ_k |v_k><v_k|."""
    eig = eig_hermitian(rho.mat, tol)
    return [np.sqrt(max(w, 0.0)) * eig.eigenvectors[:, i]
            for i, w in enumerate(eig.eigenvalues) if w > tol.spectral_floor]


def append_state_channel(tau: DensityMatrix, dims_in: Sequence[int], position: str = "after",
                         tol: ToleranceConfig = DEFAULT_TOL) -> KrausChannel:
    """ρ -> ρ ⊗ τ (``position="after"``) or τ ⊗ ρ (``"before"``)."""
    dims_in = tuple(dims_in)
    d = int(np.prod(dims_in))
    ks = []
    for v in _state_kets(tau, tol):
        col = v.reshape(-1, 1)
        ks.append(tensor(np.eye(d), col) if position == "after" else tensor(col, np.eye(d)))
    dims_out = dims_in + tau.dims if position == "after" else tau.dims + dims_in
    return KrausChannel(tuple(ks), dims_in, dims_out, name=f"append_{position}")


def constant_channel(tau: DensityMatrix, dims_in: Sequence[int], tol: ToleranceConfig = DEFAULT_TOL) -> KrausChannel:
    """ρ -> τ for every input."""
    dims_in = tuple(dims_in)
    d = int(np.prod(dims_in))
    ks = [np.outer(v, ket(b, dim=d)) for v in _state_kets(tau, tol) for b in range(d)]
    return KrausChannel(tuple(ks), dims_in, tau.dims, name="constant")


def compose(outer: KrausChannel, inner: KrausChannel) -> KrausChannel:
    """outer ∘ inner."""
    if outer.d_in != inner.d_out:
        raise DimensionMismatch(f"cannot compose: {inner.d_out} -> {outer.d_in}")
    ks = tuple(a @ b for a in outer.kraus for b in inner.kraus)
    return KrausChannel(ks, inner.dims_in, outer.dims_out, name=f"{outer.name}∘{inner.name}")


def channel_tensor(ch1: KrausChannel, ch2: KrausChannel) -> KrausChannel:
    ks = tuple(np.kron(a, b) for a in ch1.kraus for b in ch2.kraus)
    return KrausChannel(ks, ch1.dims_in + ch2.dims_in, ch1.dims_out + ch2.dims_out,
                        name=f"{ch1.name}⊗{ch2.name}")


def outcome_broadcast_channel(m: POVM, n_parties: int, pointer_dim: int | None = None,
                              tol: ToleranceConfig = DEFAULT_TOL) -> KrausChannel:
    """σ -> Σ_j tr(σ M_j) (|j><j|)^{⊗n}.

    Kraus operators are |j>^{⊗n} <b| M_j^{1/2} over outcomes j and input
    basis vectors b. Rank-deficient effects keep their zero columns.
    """
    if n_parties < 1:
        raise ValueError("n_parties must be >= 1")
    pointer_dim = len(m) if pointer_dim is None else int(pointer_dim)
    if len(m) > pointer_dim:
        raise TooManyOutcomes(f"{len(m)} outcomes do not fit a pointer of dimension {pointer_dim}")
    d = m.dim
    ks = []
    for j, e in enumerate(m.effects):
        root = psd_sqrt(e, tol)
        pointer = ket(*([j] * n_parties), dim=pointer_dim).reshape(-1, 1)
        for b in range(d):
            ks.append(pointer @ root[b:b + 1, :])
    return KrausChannel(tuple(ks), (d,), (pointer_dim,) * n_parties,
                        name=f"outcome_broadcast(n={n_parties})")


HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def hadamard_cnot_broadcaster() -> KrausChannel:
    """Isometry |ψ> -> CNOT (H ⊗ I) (|ψ> ⊗ |0>), qubit to two qubits."""
    embed_zero = np.kron(np.eye(2), ket(0).reshape(-1, 1))
    v = CNOT @ np.kron(HADAMARD, np.eye(2)) @ embed_zero
    return KrausChannel((v,), (2,), (2, 2), name="hadamard_cnot")


def measure_prepare_channel(m: POVM, preparations: Sequence[DensityMatrix],
                            tol: ToleranceConfig = DEFAULT_TOL) -> KrausChannel:
    """ρ -> Σ_j tr(ρ M_j) prep_j."""
    preparations = list(preparations)
    if len(preparations) != len(m):
        raise ArityMismatch(f"{len(m)} outcomes but {len(preparations)} preparations")
    dims_out = preparations[0].dims
    if any(p.dims != dims_out for p in preparations):
        raise DimensionMismatch("all preparations must share subsystem dims")
    d = m.dim
    ks = []
    for e, prep in zip(m.effects, preparations):
        root = psd_sqrt(e, tol)
        for v in _state_kets(prep, tol):
            for b in range(d):
                ks.append(v.reshape(-1, 1) @ root[b:b + 1, :])
    return KrausChannel(tuple(ks), (d,), dims_out, name="measure_prepare")
