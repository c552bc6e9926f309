"""QFI-broadcast checks, the no-cloning audit, uniformness and brute-force oracles."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .channels import KrausChannel, apply_map, outcome_broadcast_channel, pushforward
from .errors import (
    DegeneratePoint,
    DimensionMismatch,
    DivergentFisher,
    NonSmoothPoint,
    NotProductOutput,
    NotUniformError,
)
from .families import (  # noqa: F401  re-exported
    BUILTIN_FAMILIES,
    builtin_classical,
    builtin_equatorial,
    builtin_equatorial_broadcast,
    builtin_piecewise_xyz,
    equatorial_measurement,
)
from .fisher import (
    POVM,
    ParametricFamily,
    bhattacharyya_angle_from_probabilities,
    classical_fisher_at,
    derivative,
    optimal_measurement,
    sld,
    support_masked,
)
from .qmat import (
    DEFAULT_TOL,
    PAULIS,
    I2,
    DensityMatrix,
    ToleranceConfig,
    as_matrix,
    commutator,
    embed,
    ptrace,
    tensor,
)


class BroadcastVerdict(str, Enum):
    BROADCAST = "Broadcast"
    NOT_BROADCAST = "NotBroadcast"


class UniformVerdict(str, Enum):
    UNIFORM = "Uniform"
    NOT_UNIFORM = "NotUniform"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class BroadcastReport:
    theta_grid: tuple[float, ...]
    input_qfi: tuple[float, ...]
    party_qfi: tuple[tuple[float, ...], ...]  # [party][theta]
    joint_qfi: tuple[float, ...]
    verdict: BroadcastVerdict
    max_deficit: float
    degenerate_points: tuple[float, ...]
    max_input_deficit: float | None = None

    @property
    def passed(self) -> bool:
        return self.verdict is BroadcastVerdict.BROADCAST


@dataclass(frozen=True, eq=False)
class UniformnessReport:
    candidate: POVM | None
    per_theta_ratio: tuple[float, ...]
    verdict: UniformVerdict
    theta_grid: tuple[float, ...] = ()
    degenerate_points: tuple[float, ...] = ()
    # (θ where the measurement is optimal, θ where it is evaluated, ratio there)
    certificate: tuple[float, float, float] | None = None
    candidate_source: str | None = None


@dataclass(frozen=True)
class CloningAuditPoint:
    theta: float
    f_a: float
    f_b: float
    f_in: float
    product_residual: float

    def theorem_holds(self, delta: float = 1e-3, eta: float = 1e-3) -> bool:
        """If party a keeps the input QFI (up to δ), party b gets at most η·F_in."""
        if self.f_a >= (1 - delta) * self.f_in:
            return self.f_b <= eta * self.f_in
        return True


# --------------------------------------------------------------------------
# grid evaluation helpers


def _local_data(f: ParametricFamily, theta: float, tol: ToleranceConfig):
    rho = f.state_at(theta)
    return rho.mat, derivative(f, theta, tol)


def _is_singular(f: ParametricFamily, theta: float) -> bool:
    return any(abs(theta - s) < 1e-12 for s in f.singular_points)


def _check_grid(f: ParametricFamily, grid, allow_boundaries: bool = False) -> list[float]:
    grid = [float(t) for t in grid]
    for t in grid:
        f.piece_of(t)
        if not allow_boundaries and any(abs(t - b) < 1e-12 for b in f.boundaries):
            raise NonSmoothPoint(f"grid point θ={t} sits on a piece boundary")
    return grid


def is_qfi_broadcast(f: ParametricFamily, grid, tol: ToleranceConfig = DEFAULT_TOL,
                     parties: Sequence[int] | None = None,
                     input_family: ParametricFamily | None = None) -> BroadcastReport:
    """Compare joint QFI with every single-party reduced QFI over ``grid``.

    Reduced derivatives are partial traces of the joint derivative. Points
    where any SLD solve is flagged degenerate, and the family's declared
    singular points, are excluded from the verdict and listed. If ``input_family`` is given its QFI fills ``input_qfi`` and
    ``max_input_deficit`` records the worst party-vs-input gap.
    """
    if len(f.dims) < 2:
        raise DimensionMismatch(f"broadcast check needs at least two subsystems, got dims {f.dims}")
    grid = _check_grid(f, grid)
    parties = list(range(len(f.dims))) if parties is None else list(parties)
    joint, per_party, inputs, degenerate = [], [[] for _ in parties], [], []
    deficit, in_deficit = 0.0, 0.0
    for t in grid:
        rho, drho = _local_data(f, t, tol)
        res = sld(rho, drho, tol)
        flagged = res.degenerate or _is_singular(f, t)
        vals = []
        for k in parties:
            rk = sld(ptrace(rho, f.dims, [k]), ptrace(drho, f.dims, [k]), tol)
            flagged |= rk.degenerate
            vals.append(rk.qfi)
        f_in = res.qfi
        if input_family is not None:
            sr = sld(*_local_data(input_family, t, tol), tol)
            flagged |= sr.degenerate
            f_in = sr.qfi
        joint.append(res.qfi)
        inputs.append(f_in)
        for i, v in enumerate(vals):
            per_party[i].append(v)
        if flagged:
            degenerate.append(t)
            continue
        deficit = max(deficit, max(abs(v - res.qfi) for v in vals))
        in_deficit = max(in_deficit, max(abs(v - f_in) for v in vals))
    verdict = BroadcastVerdict.BROADCAST if deficit <= tol.bcast else BroadcastVerdict.NOT_BROADCAST
    return BroadcastReport(
        theta_grid=tuple(grid),
        input_qfi=tuple(inputs),
        party_qfi=tuple(tuple(p) for p in per_party),
        joint_qfi=tuple(joint),
        verdict=verdict,
        max_deficit=float(deficit),
        degenerate_points=tuple(degenerate),
        max_input_deficit=float(in_deficit) if input_family is not None else None,
    )


def broadcast_report(ch: KrausChannel, f: ParametricFamily, grid,
                     tol: ToleranceConfig = DEFAULT_TOL) -> BroadcastReport:
    """:func:`is_qfi_broadcast` of Λ(ρ_θ), with the input QFI recorded."""
    return is_qfi_broadcast(pushforward(ch, f, tol), grid, tol, input_family=f)


def no_cloning_audit(ch: KrausChannel, f: ParametricFamily, grid, tol: ToleranceConfig = DEFAULT_TOL,
                     split: int = 1) -> list[CloningAuditPoint]:
    """Party QFIs of a channel whose outputs factorize as ρ^a ⊗ ρ^b.

    Party a is output subsystems ``[0, split)``, party b the rest. Raises
    :class:`NotProductOutput` when some output is further than ``tol.prod``
    from the product of its marginals.
    """
    if len(ch.dims_out) < 2 or not 0 < split < len(ch.dims_out):
        raise DimensionMismatch(f"channel output dims {ch.dims_out} cannot be split at {split}")
    a_idx = list(range(split))
    b_idx = list(range(split, len(ch.dims_out)))
    points = []
    for t in _check_grid(f, grid):
        sigma, dsigma = _local_data(f, t, tol)
        out, dout = apply_map(ch, sigma), apply_map(ch, dsigma)
        ra, rb = ptrace(out, ch.dims_out, a_idx), ptrace(out, ch.dims_out, b_idx)
        resid = float(np.linalg.norm(out - tensor(ra, rb)))
        if resid > tol.prod:
            raise NotProductOutput(f"output at θ={t} is {resid:.3e} away from ρ^a ⊗ ρ^b")
        fa = sld(ra, ptrace(dout, ch.dims_out, a_idx), tol).qfi
        fb = sld(rb, ptrace(dout, ch.dims_out, b_idx), tol).qfi
        points.append(CloningAuditPoint(t, fa, fb, sld(sigma, dsigma, tol).qfi, resid))
    return points


def _require_nondegenerate(res, what: str, theta: float):
    if res.degenerate:
        raise DegeneratePoint(f"{what} changes rank at θ={theta} (dropped weight {res.dropped_weight:.3e})")


def check_sld_lift(f: ParametricFamily, party: int, theta: float, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Residual of the reduced SLD L^(k) ⊗ I as an SLD of the joint state.

    Returns ‖(L̃ρ + ρL̃)/2 − ∂ρ‖_F with ∂ρ restricted to the entries the joint
    SLD equation constrains (see :func:`support_masked`).
    """
    if _is_singular(f, theta):
        raise DegeneratePoint(f"θ={theta} is a declared singular point of {f.name}")
    rho, drho = _local_data(f, theta, tol)
    _require_nondegenerate(sld(rho, drho, tol), "joint state", theta)
    red = sld(ptrace(rho, f.dims, [party]), ptrace(drho, f.dims, [party]), tol)
    _require_nondegenerate(red, f"party {party}", theta)
    lifted = embed(red.sld, f.dims, party)
    target = support_masked(rho, drho, tol)
    return float(np.linalg.norm((lifted @ rho + rho @ lifted) / 2 - target))


def check_reduced_commutativity(f: ParametricFamily, party: int, theta: float,
                                tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """‖[ρ^(k), ∂ρ^(k)]‖_F for the reduced state of ``party``."""
    rho, drho = _local_data(f, theta, tol)
    rk = ptrace(rho, f.dims, [party])
    dk = ptrace(drho, f.dims, [party])
    return float(np.linalg.norm(commutator(rk, dk)))


def _ratios(m: POVM, rhos: np.ndarray, drhos: np.ndarray, qfis: np.ndarray, tol: ToleranceConfig) -> np.ndarray:
    """classical_fisher / qfi at every grid point; NaN where the Fisher sum diverges."""
    E = np.stack(m.effects)
    p = np.real(np.einsum("kab,jba->kj", rhos, E))
    dp = np.real(np.einsum("kab,jba->kj", drhos, E))
    small = p <= tol.prob
    divergent = np.any(small & (np.abs(dp) > np.sqrt(tol.prob)), axis=1)
    terms = np.where(small, 0.0, dp ** 2 / np.where(small, 1.0, p))
    cf = terms.sum(axis=1)
    zero = qfis <= tol.zero_info
    r = np.where(zero, 1.0, cf / np.where(zero, 1.0, qfis))
    return np.where(divergent, np.nan, r)


def check_uniform(f: ParametricFamily, grid, candidates: Sequence[POVM] | None = None,
                  tol: ToleranceConfig = DEFAULT_TOL) -> UniformnessReport:
    """Look for a single measurement that is optimal at every grid point.

    Candidates are the user-supplied measurements followed by the SLD
    eigenbasis measurement at each grid point. ``NotUniform`` needs a
    certificate: a grid-point-optimal measurement whose Fisher ratio drops
    below 1 − 10·tol.unif at another grid point. Otherwise, if no candidate
    clears 1 − tol.unif everywhere, the verdict is ``Inconclusive``.
    """
    grid = _check_grid(f, grid, allow_boundaries=True)
    rhos, drhos, qfis, kept, degenerate, slds = [], [], [], [], [], []
    for t in grid:
        rho, drho = _local_data(f, t, tol)
        res = sld(rho, drho, tol)
        if res.degenerate or _is_singular(f, t):
            degenerate.append(t)
            continue
        kept.append(t)
        rhos.append(rho)
        drhos.append(drho)
        qfis.append(res.qfi)
        slds.append((rho, drho))
    if not kept:
        return UniformnessReport(None, (), UniformVerdict.INCONCLUSIVE, tuple(grid), tuple(degenerate))
    rhos, drhos, qfis = np.stack(rhos), np.stack(drhos), np.array(qfis)

    pool = [(m, f"candidate[{i}]") for i, m in enumerate(candidates or ())]
    pool += [(optimal_measurement(r, d, tol), f"sld_basis@{t!r}") for (r, d), t in zip(slds, kept)]
    n_user = len(candidates or ())

    best, best_min, certificate = None, -np.inf, None
    bar = 1 - tol.unif
    for idx, (m, source) in enumerate(pool):
        ratio = _ratios(m, rhos, drhos, qfis, tol)
        worst = -np.inf if np.any(np.isnan(ratio)) else float(np.min(ratio))
        if worst >= bar:
            return UniformnessReport(m, tuple(float(x) for x in ratio), UniformVerdict.UNIFORM,
                                     tuple(kept), tuple(degenerate), None, source)
        if worst > best_min:
            best, best_min = (m, ratio, source), worst
        if idx >= n_user and certificate is None:
            finite = np.where(np.isnan(ratio), np.inf, ratio)
            k = int(np.argmin(finite))
            if finite[k] < 1 - 10 * tol.unif:
                certificate = (float(kept[idx - n_user]), float(kept[k]), float(finite[k]))
    verdict = UniformVerdict.NOT_UNIFORM if certificate is not None else UniformVerdict.INCONCLUSIVE
    m, ratio, source = best
    return UniformnessReport(None, tuple(float(x) for x in ratio), verdict, tuple(kept),
                             tuple(degenerate), certificate, source)


def infinite_broadcast_channel(f: ParametricFamily, grid, n_parties: int, tol: ToleranceConfig = DEFAULT_TOL,
                               candidates: Sequence[POVM] | None = None) -> KrausChannel:
    """Outcome-broadcast channel of a measurement that is optimal on the whole grid."""
    if not 1 <= n_parties <= tol.max_parties:
        raise ValueError(f"n_parties must lie in [1, {tol.max_parties}]")
    report = check_uniform(f, grid, candidates, tol)
    if report.verdict is not UniformVerdict.UNIFORM:
        raise NotUniformError(f"QFI of {f.name} is not uniform on the grid ({report.verdict.value})")
    m = report.candidate
    return outcome_broadcast_channel(m, n_parties, max(f.dim, len(m)), tol)


# --------------------------------------------------------------------------
# brute-force qubit oracles


def bloch_projectors(alpha, beta) -> np.ndarray:
    """Stacked projectors (I ± n·σ)/2 for n = (sinα cosβ, sinα sinβ, cosα); shape (..., 2, 2, 2)."""
    alpha, beta = np.asarray(alpha, dtype=float), np.asarray(beta, dtype=float)
    n = np.stack([np.sin(alpha) * np.cos(beta), np.sin(alpha) * np.sin(beta), np.cos(alpha)], axis=-1)
    ns = np.einsum("...i,iab->...ab", n, np.stack(PAULIS))
    return np.stack([(I2 + ns) / 2, (I2 - ns) / 2], axis=-3)


def _hemisphere(n_grid: int):
    alpha = np.linspace(0, np.pi / 2, n_grid)
    beta = np.linspace(0, 2 * np.pi, n_grid, endpoint=False)
    return np.meshgrid(alpha, beta, indexing="ij")


def _check_qubit(dim: int):
    if dim != 2:
        raise DimensionMismatch(f"brute-force oracles are qubit-only, got dimension {dim}")


def qfi_brute_force_qubit(f: ParametricFamily, theta: float, n_grid: int = 64,
                          tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """max over projective qubit measurements of the classical Fisher information.

    Grid search on the Bloch hemisphere, then Nelder-Mead from the best point.
    Independent of the SLD machinery.
    """
    _check_qubit(f.dim)
    rho, drho = _local_data(f, theta, tol)
    A, B = _hemisphere(n_grid)
    P = bloch_projectors(A, B)
    p = np.real(np.einsum("ab,...jba->...j", rho, P))
    dp = np.real(np.einsum("ab,...jba->...j", drho, P))
    small = p <= tol.prob
    cf = np.where(small, 0.0, dp ** 2 / np.where(small, 1.0, p)).sum(axis=-1)
    i = np.unravel_index(int(np.argmax(cf)), cf.shape)
    start = np.array([A[i], B[i]])

    def neg(x):
        m = POVM(tuple(bloch_projectors(x[0], x[1])))
        try:
            return -classical_fisher_at(rho, drho, m, tol)
        except DivergentFisher:
            return 0.0

    res = minimize(neg, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000})
    return float(max(cf[i], -res.fun))


def statistical_distance_brute_force_qubit(r1: DensityMatrix, r2: DensityMatrix, n_grid: int = 64) -> float:
    """max over projective qubit measurements of arccos Σ_j sqrt(p_j q_j)."""
    a, b = as_matrix(r1), as_matrix(r2)
    _check_qubit(a.shape[0])
    A, B = _hemisphere(n_grid)
    P = bloch_projectors(A, B)
    p = np.clip(np.real(np.einsum("ab,...jba->...j", a, P)), 0, None)
    q = np.clip(np.real(np.einsum("ab,...jba->...j", b, P)), 0, None)
    gap = 0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2, axis=-1)
    i = np.unravel_index(int(np.argmax(gap)), gap.shape)

    def neg(x):
        m = POVM(tuple(bloch_projectors(x[0], x[1])))
        return -bhattacharyya_angle_from_probabilities(m.probabilities(a), m.probabilities(b))

    res = minimize(neg, np.array([A[i], B[i]]), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-15, "maxiter": 2000})
    grid_best = bhattacharyya_angle_from_probabilities(p[i], q[i])
    return float(max(grid_best, -res.fun))
