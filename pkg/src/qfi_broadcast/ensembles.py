"""Random states, measurements, channels and smooth families for property tests."""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm
from scipy.stats import unitary_group

from .channels import KrausChannel
from .fisher import POVM, ParametricFamily
from .qmat import DEFAULT_TOL, DensityMatrix, ToleranceConfig, dagger


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_unitary(d: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    return unitary_group.rvs(d, random_state=rng)


def random_hermitian(d: int, rng=None, scale: float = 1.0) -> np.ndarray:
    rng = _rng(rng)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (g + dagger(g)) / 2


def random_psd(d: int, rng=None, rank: int | None = None) -> np.ndarray:
    rng = _rng(rng)
    r = d if rank is None else rank
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    return g @ dagger(g)


def random_density(d: int, rng=None, rank: int | None = None, dims=None) -> DensityMatrix:
    """Hilbert-Schmidt (Ginibre) random state of the given rank."""
    a = random_psd(d, rng, rank)
    a = a / np.trace(a)
    return DensityMatrix((a + dagger(a)) / 2, dims or (d,))


def random_pure(d: int, rng=None) -> np.ndarray:
    rng = _rng(rng)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)


def random_povm(d: int, n_outcomes: int, rng=None, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    """Effects K_j† K_j from a Haar isometry C^d -> C^{n_outcomes} ⊗ C^d."""
    rng = _rng(rng)
    u = random_unitary(n_outcomes * d, rng)
    iso = u[:, :d].reshape(n_outcomes, d, d)
    effects = [dagger(k) @ k for k in iso]
    effects = [(e + dagger(e)) / 2 for e in effects]
    return POVM(tuple(effects), tol=tol)


def random_channel(d_in: int, d_out: int | None = None, env_dim: int | None = None, rng=None) -> KrausChannel:
    """Stinespring channel: Haar isometry into system ⊗ environment, environment traced out."""
    rng = _rng(rng)
    d_out = d_in if d_out is None else d_out
    env_dim = int(rng.integers(2, 5)) if env_dim is None else env_dim
    big = d_out * env_dim
    if big < d_in:
        raise ValueError("d_out * env_dim must be at least d_in")
    iso = random_unitary(big, rng)[:, :d_in].reshape(d_out, env_dim, d_in)
    kraus = tuple(iso[:, e, :] for e in range(env_dim))
    return KrausChannel(kraus, (d_in,), (d_out,), name="random")


def random_family(d: int, rng=None, pure: bool = False, domain=(0.0, 3.0), name: str | None = None) -> ParametricFamily:
    """Smooth family ρ_θ = U(θ) [(1 − q(θ)) ρ0 + q(θ) ρ1] U(θ)† with U = exp(−iHθ).

    q(θ) = (1 + a sin(ωθ + φ))/2 with a < 1 keeps the mixture inside the state
    space; the derivative is analytic. With ``pure=True``, ρ0 = ρ1 is a pure state.
    """
    rng = _rng(rng)
    h = random_hermitian(d, rng, scale=rng.uniform(0.3, 1.5))
    if pure:
        psi = random_pure(d, rng)
        rho0 = rho1 = np.outer(psi, psi.conj())
    else:
        rho0 = random_density(d, rng).mat
        rho1 = random_density(d, rng).mat
    amp, omega, phase = rng.uniform(0.2, 0.9), rng.uniform(0.5, 2.0), rng.uniform(0, 2 * np.pi)
    w, v = np.linalg.eigh(h)

    def unitary(t):
        return (v * np.exp(-1j * w * t)) @ dagger(v)

    def mix(t):
        q = (1 + amp * np.sin(omega * t + phase)) / 2
        return (1 - q) * rho0 + q * rho1

    def state_at(t):
        u = unitary(t)
        r = u @ mix(t) @ dagger(u)
        return DensityMatrix((r + dagger(r)) / 2, (d,))

    def d_at(t):
        u = unitary(t)
        dq = amp * omega * np.cos(omega * t + phase) / 2
        r = u @ mix(t) @ dagger(u)
        out = -1j * (h @ r - r @ h) + u @ (dq * (rho1 - rho0)) @ dagger(u)
        return (out + dagger(out)) / 2

    return ParametricFamily(state_at=state_at, analytic_derivative=d_at, domain=domain, dims=(d,),
                            name=name or f"random(d={d})")


def unitary_generated_family(rho0: DensityMatrix, h: np.ndarray, domain=(0.0, 2 * np.pi),
                             name: str = "unitary") -> ParametricFamily:
    """ρ_θ = exp(−iHθ) ρ0 exp(iHθ)."""
    h = np.asarray(h, dtype=complex)

    def state_at(t):
        u = expm(-1j * h * t)
        r = u @ rho0.mat @ dagger(u)
        return DensityMatrix((r + dagger(r)) / 2, rho0.dims)

    def d_at(t):
        r = state_at(t).mat
        return -1j * (h @ r - r @ h)

    return ParametricFamily(state_at=state_at, analytic_derivative=d_at, domain=domain,
                            dims=rho0.dims, name=name)
