import numpy as np
import pytest
from hypothesis import given, strategies as st

from qfi_broadcast.broadcast import (
    BroadcastVerdict,
    CloningAuditPoint,
    UniformVerdict,
    bloch_projectors,
    broadcast_report,
    check_reduced_commutativity,
    check_sld_lift,
    check_uniform,
    infinite_broadcast_channel,
    is_qfi_broadcast,
    no_cloning_audit,
    qfi_brute_force_qubit,
    statistical_distance_brute_force_qubit,
)
from qfi_broadcast.channels import (
    append_state_channel,
    channel_tensor,
    compose,
    hadamard_cnot_broadcaster,
    measure_prepare_channel,
    pushforward,
)
from qfi_broadcast.ensembles import random_channel, random_density, random_family, random_povm
from qfi_broadcast.errors import (
    DegeneratePoint,
    DimensionMismatch,
    NonSmoothPoint,
    NotProductOutput,
    NotUniformError,
)
from qfi_broadcast.families import (
    builtin_classical,
    builtin_equatorial,
    builtin_equatorial_broadcast,
    builtin_piecewise_xyz,
)
from qfi_broadcast.fisher import product_family, qfi, statistical_distance
from qfi_broadcast.qmat import DensityMatrix, tensor_states

seeds = st.integers(0, 2**32 - 1)
GRID = np.linspace(0.1, 3.0, 12)
FULL_PIECEWISE = np.linspace(-np.pi / 2, np.pi / 2, 25)


def test_equatorial_broadcast_family_is_broadcast():
    rep = is_qfi_broadcast(builtin_equatorial_broadcast(), GRID)
    assert rep.verdict is BroadcastVerdict.BROADCAST and rep.passed
    assert np.allclose(rep.joint_qfi, 1.0, atol=1e-10)
    assert np.allclose(rep.party_qfi, 1.0, atol=1e-10)


def test_broadcast_report_records_input():
    rep = broadcast_report(hadamard_cnot_broadcaster(), builtin_equatorial(), GRID)
    assert rep.max_input_deficit < 1e-10
    assert np.allclose(rep.input_qfi, 1.0)


def test_product_family_is_not_broadcast():
    eq = builtin_equatorial()
    rep = is_qfi_broadcast(product_family(eq, eq), GRID)
    assert rep.verdict is BroadcastVerdict.NOT_BROADCAST
    assert rep.max_deficit == pytest.approx(1.0, abs=1e-10)


def test_broadcast_needs_two_parties_and_smooth_grid():
    with pytest.raises(DimensionMismatch):
        is_qfi_broadcast(builtin_equatorial(), GRID)
    with pytest.raises(NonSmoothPoint):
        is_qfi_broadcast(builtin_piecewise_xyz(), [np.pi / 4])


def test_piecewise_broadcast_excludes_singular_points():
    f = builtin_piecewise_xyz()
    rep = is_qfi_broadcast(f, [-1.2, -0.6, 0.0, 0.3, 1.0, 1.4])
    assert rep.passed
    assert 0.0 in rep.degenerate_points


def test_uniform_families():
    for f, grid in [(builtin_equatorial(), np.linspace(0.1, 3.0, 30)),
                    (builtin_classical(), np.linspace(0.2, 2.9, 10))]:
        rep = check_uniform(f, grid)
        assert rep.verdict is UniformVerdict.UNIFORM
        assert min(rep.per_theta_ratio) >= 1 - 1e-4


def test_piecewise_not_uniform_with_certificate():
    rep = check_uniform(builtin_piecewise_xyz(), FULL_PIECEWISE)
    assert rep.verdict is UniformVerdict.NOT_UNIFORM
    opt_at, fails_at, ratio = rep.certificate
    assert ratio < 1 - 1e-3
    assert opt_at != fails_at


def test_piecewise_uniform_away_from_junctions():
    # a measurement in the Bell-type basis is optimal at every non-junction point
    rep = check_uniform(builtin_piecewise_xyz(), builtin_piecewise_xyz().default_grid(24))
    assert rep.verdict is UniformVerdict.UNIFORM


def test_single_point_grid_is_uniform():
    # a single grid point: the SLD basis there is trivially uniform
    rep = check_uniform(builtin_equatorial(), [1.0])
    assert rep.verdict is UniformVerdict.UNIFORM


@pytest.mark.parametrize("n", [2, 3, 4])
def test_infinite_broadcast_channel(n):
    f = builtin_equatorial()
    ch = infinite_broadcast_channel(f, GRID, n)
    assert ch.dims_out == (2,) * n
    assert broadcast_report(ch, f, GRID).passed


def test_infinite_broadcast_classical_many_parties():
    f = builtin_classical()
    grid = np.linspace(0.2, 2.9, 8)
    ch = infinite_broadcast_channel(f, grid, 6)
    rep = broadcast_report(ch, f, grid)
    assert rep.passed and rep.max_input_deficit < 1e-8


def test_infinite_broadcast_refuses():
    with pytest.raises(NotUniformError):
        infinite_broadcast_channel(builtin_piecewise_xyz(), FULL_PIECEWISE, 2)
    with pytest.raises(ValueError):
        infinite_broadcast_channel(builtin_equatorial(), GRID, 7)


def _product_output_channel(rng, kind):
    if kind == "tensor":
        tau = random_density(2, rng)
        local = channel_tensor(random_channel(2, 2, rng=rng), random_channel(2, 2, rng=rng))
        return compose(local, append_state_channel(tau, (2,), rng.choice(["after", "before"])))
    m = random_povm(2, 3, rng)
    fixed = random_density(2, rng)
    preps = [random_density(2, rng) for _ in range(3)]
    if kind == "mp_left":
        return measure_prepare_channel(m, [tensor_states(p, fixed) for p in preps])
    return measure_prepare_channel(m, [tensor_states(fixed, p) for p in preps])


@given(seeds, st.sampled_from(["tensor", "mp_left", "mp_right"]))
def test_no_cloning_bound_on_product_channels(seed, kind):
    rng = np.random.default_rng(seed)
    f = random_family(2, rng)
    for p in no_cloning_audit(_product_output_channel(rng, kind), f, np.linspace(0.3, 2.7, 5)):
        assert p.f_a + p.f_b <= p.f_in + 1e-7
        assert p.theorem_holds()


def test_no_cloning_rejects_entangled_output():
    with pytest.raises(NotProductOutput):
        no_cloning_audit(hadamard_cnot_broadcaster(), builtin_equatorial(), GRID)


def test_cloning_audit_point_logic():
    assert CloningAuditPoint(0.0, 1.0, 0.0, 1.0, 0.0).theorem_holds()
    assert not CloningAuditPoint(0.0, 1.0, 0.5, 1.0, 0.0).theorem_holds()
    assert CloningAuditPoint(0.0, 0.5, 0.5, 1.0, 0.0).theorem_holds()


@pytest.mark.parametrize("family", [builtin_equatorial_broadcast, builtin_piecewise_xyz])
def test_sld_lift_and_commutativity_on_broadcast_families(family):
    f = family()
    for t in f.default_grid(20):
        for k in (0, 1):
            assert check_sld_lift(f, k, t) <= 1e-8
            assert check_reduced_commutativity(f, k, t) <= 1e-10


def test_sld_lift_fails_for_product_control():
    eq = builtin_equatorial()
    f = product_family(eq, eq)
    # residual is ‖ρ_a ⊗ ∂ρ_b‖_F = ‖∂ρ_b‖_F = 1/√2
    assert check_sld_lift(f, 0, 1.0) == pytest.approx(1 / np.sqrt(2), abs=1e-10)


def test_sld_lift_degenerate_point():
    with pytest.raises(DegeneratePoint):
        check_sld_lift(builtin_piecewise_xyz(), 0, 0.0)


def test_bloch_projectors_form_povm():
    P = bloch_projectors(0.7, 1.9)
    assert np.allclose(P[0] + P[1], np.eye(2))
    assert np.allclose(P[0] @ P[0], P[0])


def test_brute_force_qfi_oracle():
    rng = np.random.default_rng(99)
    for _ in range(5):
        f = random_family(2, rng)
        assert qfi_brute_force_qubit(f, 1.3) == pytest.approx(qfi(f, 1.3), abs=2e-3)
    with pytest.raises(DimensionMismatch):
        qfi_brute_force_qubit(builtin_piecewise_xyz(), 0.3)


def test_brute_force_statistical_distance_oracle():
    rng = np.random.default_rng(7)
    for _ in range(5):
        r1, r2 = random_density(2, rng), random_density(2, rng)
        assert statistical_distance_brute_force_qubit(r1, r2) == pytest.approx(statistical_distance(r1, r2), abs=1e-3)


def test_pushforward_of_broadcast_family_keeps_dims():
    g = pushforward(hadamard_cnot_broadcaster(), builtin_equatorial())
    assert g.dims == (2, 2)
    assert isinstance(g.state_at(0.4), DensityMatrix)
