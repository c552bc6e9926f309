import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfi_broadcast.channels import depolarizing_channel, pushforward
from qfi_broadcast.ensembles import random_density, random_family, random_povm, unitary_generated_family
from qfi_broadcast.errors import (
    DimensionMismatch,
    DivergentFisher,
    InvalidPOVM,
    NonIdentifiable,
    NonSmoothPoint,
    OutOfDomain,
    ZeroInformation,
)
from qfi_broadcast.families import builtin_classical, builtin_equatorial, builtin_piecewise_xyz
from qfi_broadcast.fisher import (
    POVM,
    ParametricFamily,
    bhattacharyya_angle,
    check_optimality_condition,
    classical_fisher,
    classical_fisher_at,
    computational_basis,
    constant_family,
    crb,
    derivative,
    optimal_distinguishing_measurement,
    optimal_measurement,
    product_family,
    qfi,
    reduced_family,
    simulate_estimation,
    sld,
    sld_at,
    statistical_distance,
)
from qfi_broadcast.qmat import DensityMatrix

from conftest import bloch_vector

seeds = st.integers(0, 2**32 - 1)
thetas = st.floats(0.2, 2.8)


def _qubit_qfi_oracle(rho, drho):
    # Bloch-vector formula, independent of the SLD solver
    r, dr = bloch_vector(rho), bloch_vector(drho)
    n2 = r @ r
    if n2 > 1 - 1e-9:
        return dr @ dr
    return dr @ dr + (r @ dr) ** 2 / (1 - n2)


# frozen values from the closed forms above
def test_frozen_qfi_values():
    eq = builtin_equatorial()
    assert qfi(eq, 0.7) == pytest.approx(1.0, abs=1e-12)
    assert qfi(builtin_classical(), 1.1) == pytest.approx(1.0, abs=1e-12)
    noisy = pushforward(depolarizing_channel(0.3), eq)
    assert qfi(noisy, 0.7) == pytest.approx(0.49, abs=1e-12)
    assert qfi(builtin_piecewise_xyz(), 0.3) == pytest.approx(4.0, abs=1e-12)


@given(seeds, thetas, st.booleans())
def test_qfi_matches_bloch_oracle(seed, theta, pure):
    f = random_family(2, np.random.default_rng(seed), pure=pure)
    rho, drho = f.state_at(theta).mat, derivative(f, theta)
    assert qfi(f, theta) == pytest.approx(_qubit_qfi_oracle(rho, drho), rel=1e-7, abs=1e-9)


@given(seeds, thetas, st.integers(2, 4))
def test_sld_solves_its_equation(seed, theta, d):
    f = random_family(d, np.random.default_rng(seed))
    res = sld_at(f, theta)
    assert res.residual < 1e-9
    assert np.allclose(res.sld, res.sld.conj().T)
    rho = f.state_at(theta).mat
    assert res.qfi == pytest.approx(np.real(np.trace(rho @ res.sld @ res.sld)), rel=1e-9, abs=1e-12)


@given(seeds, thetas, st.integers(2, 4), st.integers(2, 5))
def test_classical_fisher_bounded_by_qfi(seed, theta, d, k):
    rng = np.random.default_rng(seed)
    f = random_family(d, rng)
    m = random_povm(d, k, rng)
    assert classical_fisher(f, theta, m) <= qfi(f, theta) + 1e-9


@given(seeds, thetas, st.integers(2, 4))
def test_sld_basis_attains_qfi(seed, theta, d):
    f = random_family(d, np.random.default_rng(seed))
    rho, drho = f.state_at(theta), derivative(f, theta)
    m = optimal_measurement(rho, drho)
    assert classical_fisher_at(rho, drho, m) == pytest.approx(qfi(f, theta), rel=1e-7, abs=1e-9)
    L = sld(rho, drho).sld
    assert check_optimality_condition(rho, drho, L, m).holds


def test_optimality_condition_fails_for_bad_measurement():
    f = builtin_equatorial()
    rho, drho = f.state_at(0.5), derivative(f, 0.5)
    L = sld(rho, drho).sld
    assert not check_optimality_condition(rho, drho, L, computational_basis(2)).holds


def test_pure_state_qfi_is_four_times_variance():
    # ρ = exp(−iHθ)|ψ><ψ|exp(iHθ): F = 4 Var_ψ(H)
    h = np.diag([0.0, 0.4, 1.3])
    psi = np.array([0.6, 0.0, 0.8], dtype=complex)
    rho0 = DensityMatrix(np.outer(psi, psi.conj()))
    f = unitary_generated_family(rho0, h)
    var = psi.conj() @ h @ h @ psi - (psi.conj() @ h @ psi) ** 2
    res = sld_at(f, 1.0)
    assert res.support_rank == 1
    assert not res.degenerate
    assert res.qfi == pytest.approx(4 * np.real(var), abs=1e-10)


def test_rank_change_is_flagged():
    # diag(cos², sin²) at θ = 0 loses rank and has nonzero derivative weight there
    f = builtin_classical()
    rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    drho = np.diag([0.0, 1e-3])  # derivative pointing into the kernel
    assert sld(rho, drho).degenerate
    assert not sld_at(f, 1.0).degenerate


def test_divergent_classical_fisher():
    rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    with pytest.raises(DivergentFisher):
        classical_fisher_at(rho, np.diag([-0.1, 0.1]), computational_basis(2))


def test_zero_over_zero_terms_are_skipped():
    rho = DensityMatrix(np.diag([1.0, 0.0]).astype(complex))
    assert classical_fisher_at(rho, np.zeros((2, 2)), computational_basis(2)) == 0.0


def test_finite_difference_derivative_matches_analytic():
    f = builtin_equatorial()
    fd = ParametricFamily(state_at=f.state_at, domain=f.domain, dims=f.dims)
    for t in (0.0, 1.0, 2 * np.pi):  # both one-sided stencils and the central one
        assert np.allclose(derivative(fd, t), derivative(f, t), atol=1e-8)


def test_derivative_without_stencil_room():
    f = ParametricFamily(state_at=lambda t: DensityMatrix(np.eye(2) / 2), domain=(0.0, 1e-6), dims=(2,))
    with pytest.raises(NonSmoothPoint):
        derivative(f, 0.0)


def test_out_of_domain():
    with pytest.raises(OutOfDomain):
        qfi(builtin_classical(), 4.0)


def test_piece_ownership_of_junctions():
    f = builtin_piecewise_xyz()
    assert f.piece_of(np.pi / 4) == (-np.pi / 4, np.pi / 4)
    assert f.piece_of(-np.pi / 4) == (-np.pi / 2, -np.pi / 4)
    assert all(abs(t - b) > 1e-6 for t in f.default_grid() for b in f.boundaries)


def test_povm_validation_and_round_trip():
    with pytest.raises(InvalidPOVM):
        POVM((np.diag([1.0, 0.0]),))
    with pytest.raises(InvalidPOVM):
        POVM((np.diag([1.5, 0.0]), np.diag([-0.5, 1.0])))
    with pytest.raises(DimensionMismatch):
        POVM((np.eye(2), np.zeros((3, 3))))
    m = random_povm(3, 4, np.random.default_rng(0))
    m2 = POVM.from_dict(m.to_dict())
    assert all(np.allclose(a, b) for a, b in zip(m.effects, m2.effects))


@given(seeds, thetas)
def test_qfi_additive_on_products(seed, theta):
    rng = np.random.default_rng(seed)
    f, g = random_family(2, rng), random_family(2, rng)
    fg = product_family(f, g)
    assert qfi(fg, theta) == pytest.approx(qfi(f, theta) + qfi(g, theta), abs=1e-8)
    assert qfi(reduced_family(fg, [1]), theta) == pytest.approx(qfi(g, theta), abs=1e-9)


def test_constant_family_has_no_information():
    f = constant_family(DensityMatrix(np.eye(2) / 2))
    assert qfi(f, 0.5) == 0.0


@given(seeds, st.integers(2, 3))
def test_bhattacharyya_below_statistical_distance(seed, d):
    rng = np.random.default_rng(seed)
    r1, r2 = random_density(d, rng), random_density(d, rng)
    m = random_povm(d, 3, rng)
    ds = statistical_distance(r1, r2)
    assert bhattacharyya_angle(r1, r2, m) <= ds + 1e-9
    best = optimal_distinguishing_measurement(r1, r2)
    assert bhattacharyya_angle(r1, r2, best) == pytest.approx(ds, abs=1e-7)


def test_crb_errors():
    assert crb(2.0, 10) == pytest.approx(0.05)
    with pytest.raises(ZeroInformation):
        crb(0.0, 10)
    with pytest.raises(ValueError):
        crb(1.0, 0)


def test_estimation_is_deterministic_and_unbiased():
    f = builtin_equatorial()
    m = optimal_measurement(f.state_at(1.0), derivative(f, 1.0))
    window = (1.0 - np.pi / 2, 1.0 + np.pi / 2)
    a = simulate_estimation(f, m, 1.0, 500, 200, seed=11, search_interval=window)
    b = simulate_estimation(f, m, 1.0, 500, 200, seed=11, search_interval=window)
    assert a == b
    assert abs(a.estimator_mean - 1.0) < 5 * np.sqrt(a.estimator_variance / 200)
    assert 0.8 <= a.estimator_variance / a.crb <= 1.3
    assert a.fisher == pytest.approx(1.0, abs=1e-9)


def test_estimation_uninformative_measurement():
    f = builtin_equatorial()
    with pytest.raises(NonIdentifiable):
        simulate_estimation(f, computational_basis(2), 1.0, 10, 5, seed=0)
