"""Built-in parametric families and the measurements that go with them."""

from __future__ import annotations

import numpy as np

from .channels import hadamard_cnot_broadcaster, pushforward
from .fisher import POVM, ParametricFamily, hermitian_from_state_vector, projective_measurement
from .qmat import DensityMatrix, ket

_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
_PLUS_I = np.array([1, 1j], dtype=complex) / np.sqrt(2)
_MINUS_I = np.array([1, -1j], dtype=complex) / np.sqrt(2)

# (eigenvalue +1, eigenvalue -1) eigenvectors of each Pauli matrix
PAULI_EIGENBASES = {
    "x": (_PLUS, _MINUS),
    "y": (_PLUS_I, _MINUS_I),
    "z": (ket(0), ket(1)),
}


def _pure_family(vec, dvec, **kwargs) -> ParametricFamily:
    dims = kwargs.pop("dims")

    def state_at(t):
        v = vec(t)
        return DensityMatrix(np.outer(v, v.conj()), dims)

    def d_at(t):
        return hermitian_from_state_vector(vec(t), dvec(t))

    return ParametricFamily(state_at=state_at, analytic_derivative=d_at, dims=dims, **kwargs)


def equatorial_vector(theta: float) -> np.ndarray:
    return np.array([1, np.exp(1j * theta)], dtype=complex) / np.sqrt(2)


def builtin_equatorial() -> ParametricFamily:
    """|ψ_θ> = (|0> + e^{iθ}|1>)/√2 on [0, 2π]; QFI = 1 everywhere."""
    return _pure_family(
        equatorial_vector,
        lambda t: np.array([0, 1j * np.exp(1j * t)], dtype=complex) / np.sqrt(2),
        domain=(0.0, 2 * np.pi),
        dims=(2,),
        name="equatorial",
    )


def equatorial_measurement(phi: float) -> POVM:
    """Projective measurement onto (|0> ± e^{iφ}|1>)/√2."""
    return projective_measurement([equatorial_vector(phi), equatorial_vector(phi + np.pi)])


def psi_ii(axis: str, theta: float) -> np.ndarray:
    """cos θ |i>|i> + sin θ |ī>|ī> for i in {x, y, z}."""
    up, down = PAULI_EIGENBASES[axis]
    return np.cos(theta) * np.kron(up, up) + np.sin(theta) * np.kron(down, down)


def _dpsi_ii(axis: str, theta: float) -> np.ndarray:
    up, down = PAULI_EIGENBASES[axis]
    return -np.sin(theta) * np.kron(up, up) + np.cos(theta) * np.kron(down, down)


PIECEWISE_PIECES = ((-np.pi / 2, -np.pi / 4), (-np.pi / 4, np.pi / 4), (np.pi / 4, np.pi / 2))


def _piecewise_vector(theta: float) -> np.ndarray:
    if theta <= -np.pi / 4:
        return psi_ii("y", -theta)
    if theta <= np.pi / 4:
        return psi_ii("z", theta)
    return psi_ii("x", theta)


def _piecewise_dvector(theta: float) -> np.ndarray:
    if theta <= -np.pi / 4:
        return -_dpsi_ii("y", -theta)
    if theta <= np.pi / 4:
        return _dpsi_ii("z", theta)
    return _dpsi_ii("x", theta)


def builtin_piecewise_xyz() -> ParametricFamily:
    """Two-qubit family ψ_yy(−θ) | ψ_zz(θ) | ψ_xx(θ) on [−π/2, π/2].

    Junctions at ±π/4 belong to the piece on their left. The reduced states
    become pure at −π/2, 0 and π/2, which are recorded as singular points.
    """
    return _pure_family(
        _piecewise_vector,
        _piecewise_dvector,
        domain=(-np.pi / 2, np.pi / 2),
        dims=(2, 2),
        smooth_pieces=PIECEWISE_PIECES,
        singular_points=(-np.pi / 2, 0.0, np.pi / 2),
        name="piecewise_xyz",
    )


def builtin_classical() -> ParametricFamily:
    """diag(cos²(θ/2), sin²(θ/2)) on [0, π]; a commuting family with QFI 1."""

    def state_at(t):
        return DensityMatrix(np.diag([np.cos(t / 2) ** 2, np.sin(t / 2) ** 2]).astype(complex))

    def d_at(t):
        s = np.sin(t) / 2
        return np.diag([-s, s]).astype(complex)

    return ParametricFamily(state_at=state_at, analytic_derivative=d_at, domain=(0.0, np.pi), dims=(2,),
                            singular_points=(0.0, np.pi), name="classical")


def builtin_equatorial_broadcast() -> ParametricFamily:
    """Equatorial family pushed through the Hadamard-CNOT broadcaster."""
    f = pushforward(hadamard_cnot_broadcaster(), builtin_equatorial())
    return ParametricFamily(state_at=f.state_at, analytic_derivative=f.analytic_derivative, domain=f.domain,
                            dims=f.dims, singular_points=(0.0, np.pi, 2 * np.pi), name="equatorial_broadcast")


BUILTIN_FAMILIES = {
    "equatorial": builtin_equatorial,
    "piecewise_xyz": builtin_piecewise_xyz,
    "classical": builtin_classical,
    "equatorial_broadcast": builtin_equatorial_broadcast,
}
