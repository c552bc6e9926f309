"""Dense complex linear algebra with multipartite bookkeeping.

Matrices are plain ``numpy`` arrays of complex dtype. Subsystem 0 is the
leftmost tensor factor everywhere in the package.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidState, InvalidSubsystem, NotHermitian, NotPSD


@dataclass(frozen=True)
class ToleranceConfig:
    """Every numerical threshold used by the toolkit, in one place.

    ``herm`` is scaled by the matrix dimension; ``eig`` is relative to the
    Frobenius norm of the decomposed matrix. ``spectral_floor`` is relative to
    the largest eigenvalue magnitude and marks eigenvalues that are pure
    round-off.
    """

    herm: float = 1e-10
    trace: float = 1e-10
    psd: float = 1e-10
    eig: float = 1e-9
    spectral_floor: float = 1e-13
    rank: float = 1e-10
    sld: float = 1e-8
    povm: float = 1e-9
    prob: float = 1e-12
    opt: float = 1e-8
    bcast: float = 1e-6
    unif: float = 1e-4
    prod: float = 1e-8
    zero_info: float = 1e-12
    fd_step: float = 1e-5
    max_parties: int = 6

    def replace(self, **changes) -> "ToleranceConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ToleranceConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise KeyError(f"unknown tolerance fields: {sorted(unknown)}")
        return cls(**data)


DEFAULT_TOL = ToleranceConfig()


def as_matrix(a) -> np.ndarray:
    """Return ``a`` as a 2-D complex array (accepts DensityMatrix too)."""
    if isinstance(a, DensityMatrix):
        return a.mat
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def hermiticity_residual(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - dagger(a)))


def is_hermitian(a, tol: ToleranceConfig = DEFAULT_TOL) -> bool:
    m = as_matrix(a)
    return m.shape[0] == m.shape[1] and hermiticity_residual(m) <= tol.herm * m.shape[0]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite matrix with subsystem dims."""

    mat: np.ndarray
    dims: tuple[int, ...] = ()
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        m = as_matrix(self.mat)
        d = m.shape[0]
        if m.shape != (d, d):
            raise InvalidState(f"density matrix must be square, got {m.shape}")
        dims = tuple(int(x) for x in self.dims) if self.dims else (d,)
        if any(x < 1 for x in dims) or int(np.prod(dims)) != d:
            raise DimensionMismatch(f"subsystem dims {dims} do not multiply to {d}")
        herm = hermiticity_residual(m)
        if herm > self.tol.herm * d:
            raise NotHermitian(f"density matrix not Hermitian (residual {herm:.3e})")
        tr = np.trace(m)
        if abs(tr - 1) > self.tol.trace:
            raise InvalidState(f"density matrix trace {tr:.12g} != 1")
        lmin = np.linalg.eigvalsh((m + dagger(m)) / 2)[0]
        if lmin < -self.tol.psd:
            raise NotPSD(f"density matrix has eigenvalue {lmin:.3e}")
        object.__setattr__(self, "mat", _frozen(m))
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.mat, dtype=dtype)

    def __repr__(self):
        return f"DensityMatrix(dims={self.dims})"

    def allclose(self, other: "DensityMatrix", atol: float = 1e-10) -> bool:
        return self.dims == other.dims and bool(np.allclose(self.mat, other.mat, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    dims: tuple[int, ...] = ()
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        v = np.array(self.amplitudes, dtype=complex).reshape(-1)
        dims = tuple(int(x) for x in self.dims) if self.dims else (v.size,)
        if int(np.prod(dims)) != v.size:
            raise DimensionMismatch(f"subsystem dims {dims} do not multiply to {v.size}")
        if abs(np.linalg.norm(v) - 1) > self.tol.trace:
            raise InvalidState(f"state vector norm {np.linalg.norm(v):.12g} != 1")
        v.setflags(write=False)
        object.__setattr__(self, "amplitudes", v)
        object.__setattr__(self, "dims", dims)

    def density(self) -> DensityMatrix:
        v = self.amplitudes
        return DensityMatrix(np.outer(v, v.conj()), self.dims, self.tol)


@dataclass(frozen=True, eq=False)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def tensor(*ops) -> np.ndarray:
    """Kronecker product; entry (i*d_b + k, j*d_b + l) is a[i, j] * b[k, l]."""
    if not ops:
        raise ValueError("tensor() needs at least one operand")
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def tensor_states(*states: DensityMatrix) -> DensityMatrix:
    dims = tuple(d for s in states for d in s.dims)
    return DensityMatrix(tensor(*(s.mat for s in states)), dims, states[0].tol)


def _check_keep(dims: Sequence[int], keep: Iterable[int]) -> list[int]:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise InvalidSubsystem("keep must name at least one subsystem")
    for k in keep:
        if not 0 <= k < len(dims):
            raise InvalidSubsystem(f"subsystem {k} out of range for dims {tuple(dims)}")
    return keep


def ptrace(a: np.ndarray, dims: Sequence[int], keep: Iterable[int]) -> np.ndarray:
    """Partial trace of an arbitrary operator, keeping ``keep`` in original order."""
    a = as_matrix(a)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != a.shape[0] or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"operator of shape {a.shape} does not match dims {dims}")
    keep = _check_keep(dims, keep)
    t = a.reshape(dims + dims)
    row = list(range(n))
    col = [i + n if i in keep else i for i in range(n)]
    out_idx = keep + [k + n for k in keep]
    dk = int(np.prod([dims[k] for k in keep]))
    return np.einsum(t, row + col, out_idx).reshape(dk, dk)


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    keep = _check_keep(rho.dims, keep)
    red = ptrace(rho.mat, rho.dims, keep)
    return DensityMatrix(red, tuple(rho.dims[k] for k in keep), rho.tol)


def embed(op: np.ndarray, dims: Sequence[int], party: int) -> np.ndarray:
    """``op`` acting on subsystem ``party``, identity on the rest."""
    dims = list(dims)
    if not 0 <= party < len(dims):
        raise InvalidSubsystem(f"subsystem {party} out of range for dims {tuple(dims)}")
    op = as_matrix(op)
    if op.shape[0] != dims[party]:
        raise DimensionMismatch(f"operator dim {op.shape[0]} != subsystem dim {dims[party]}")
    left = int(np.prod(dims[:party]))
    right = int(np.prod(dims[party + 1:]))
    return tensor(np.eye(left), op, np.eye(right))


def eig_hermitian(a, tol: ToleranceConfig = DEFAULT_TOL) -> Spectrum:
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"eig_hermitian needs a square matrix, got {m.shape}")
    res = hermiticity_residual(m)
    if res > tol.herm * m.shape[0] * max(1.0, float(np.linalg.norm(m))):
        raise NotHermitian(f"matrix not Hermitian (residual {res:.3e})")
    w, v = np.linalg.eigh((m + dagger(m)) / 2)
    return Spectrum(w, v)


def _clamped_eigenvalues(w: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    if w.size and w[0] < -tol.psd:
        raise NotPSD(f"matrix has eigenvalue {w[0]:.3e} below -{tol.psd:g}")
    scale = max(float(np.max(np.abs(w))), 1e-300) if w.size else 1.0
    return np.where(w <= tol.spectral_floor * scale, 0.0, w)


def psd_sqrt(a, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """Principal square root of a PSD matrix.

    Eigenvalues in ``(-tol.psd, 0)`` and round-off-sized positive ones are
    set to zero before taking roots.
    """
    eig = eig_hermitian(a, tol)
    w = _clamped_eigenvalues(eig.eigenvalues, tol)
    v = eig.eigenvectors
    return (v * np.sqrt(w)) @ dagger(v)


def fidelity(r1: DensityMatrix, r2: DensityMatrix, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Root fidelity tr|sqrt(r1) sqrt(r2)|, clamped to [0, 1]."""
    a, b = as_matrix(r1), as_matrix(r2)
    if a.shape != b.shape:
        raise DimensionMismatch(f"fidelity of states with shapes {a.shape} and {b.shape}")
    # Nuclear norm of sqrt(r1) sqrt(r2) equals tr sqrt(sqrt(r1) r2 sqrt(r1)) and
    # keeps small singular values accurate.
    s = np.linalg.svd(psd_sqrt(a, tol) @ psd_sqrt(b, tol), compute_uv=False)
    return float(np.clip(np.sum(s), 0.0, 1.0))


def bures_distance(r1: DensityMatrix, r2: DensityMatrix, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    return float(np.sqrt(max(0.0, 2.0 - 2.0 * fidelity(r1, r2, tol))))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def ket(*bits: int, dim: int = 2) -> np.ndarray:
    """Computational basis vector |bits...>."""
    vec = np.zeros(dim ** len(bits), dtype=complex)
    idx = 0
    for b in bits:
        idx = idx * dim + b
    vec[idx] = 1.0
    return vec


def projector(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return np.outer(v, v.conj())


I2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (SIGMA_X, SIGMA_Y, SIGMA_Z)
