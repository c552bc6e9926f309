"""Parametric families, SLDs, quantum and classical Fisher information.

Also houses measurement optimality checks, the statistical distance and a
Monte Carlo maximum-likelihood harness for the Cramér-Rao bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    DimensionMismatch,
    DivergentFisher,
    InvalidPOVM,
    NonIdentifiable,
    NonSmoothPoint,
    NotHermitian,
    OutOfDomain,
    ZeroInformation,
)
from .qmat import (
    DEFAULT_TOL,
    DensityMatrix,
    ToleranceConfig,
    as_matrix,
    dagger,
    eig_hermitian,
    fidelity,
    hermiticity_residual,
    projector,
    psd_sqrt,
    ptrace,
    tensor,
)


# --------------------------------------------------------------------------
# measurements


@dataclass(frozen=True, eq=False)
class POVM:
    """Finite measurement {M_j}: PSD effects summing to the identity."""

    effects: tuple[np.ndarray, ...]
    labels: tuple = ()
    tol: ToleranceConfig = field(default=DEFAULT_TOL, repr=False)

    def __post_init__(self):
        effects = tuple(np.array(as_matrix(e), dtype=complex) for e in self.effects)
        if not effects:
            raise InvalidPOVM("a POVM needs at least one effect")
        d = effects[0].shape[0]
        for j, e in enumerate(effects):
            if e.shape != (d, d):
                raise DimensionMismatch(f"effect {j} has shape {e.shape}, expected {(d, d)}")
            if hermiticity_residual(e) > self.tol.herm * d:
                raise InvalidPOVM(f"effect {j} is not Hermitian")
            if np.linalg.eigvalsh((e + dagger(e)) / 2)[0] < -self.tol.psd:
                raise InvalidPOVM(f"effect {j} is not PSD")
            e.setflags(write=False)
        resid = np.linalg.norm(sum(effects) - np.eye(d))
        if resid > self.tol.povm:
            raise InvalidPOVM(f"effects sum to identity only within {resid:.3e}")
        labels = tuple(self.labels) if self.labels else tuple(range(len(effects)))
        if len(labels) != len(effects):
            raise InvalidPOVM("one label per effect required")
        object.__setattr__(self, "effects", effects)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.effects[0].shape[0]

    def __len__(self):
        return len(self.effects)

    def probabilities(self, rho) -> np.ndarray:
        r = as_matrix(rho)
        if r.shape[0] != self.dim:
            raise DimensionMismatch(f"POVM dim {self.dim} vs state dim {r.shape[0]}")
        return np.array([np.real(np.trace(r @ e)) for e in self.effects])

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "effects": [[[[z.real, z.imag] for z in row] for row in e] for e in self.effects],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "POVM":
        effects = [np.array([[complex(re, im) for re, im in row] for row in e]) for e in data["effects"]]
        return cls(tuple(effects), tuple(data.get("labels", ())))


def projective_measurement(vectors, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    """Rank-1 projectors onto the columns of ``vectors`` (or a list of kets)."""
    if isinstance(vectors, np.ndarray) and vectors.ndim == 2:
        vecs = [vectors[:, j] for j in range(vectors.shape[1])]
    else:
        vecs = list(vectors)
    return POVM(tuple(projector(v / np.linalg.norm(v)) for v in vecs), tol=tol)


def computational_basis(d: int) -> POVM:
    return projective_measurement(np.eye(d, dtype=complex))


# --------------------------------------------------------------------------
# parametric families


def hermitian_from_state_vector(psi: np.ndarray, dpsi: np.ndarray) -> np.ndarray:
    """d/dθ |ψ><ψ| given |ψ> and d|ψ>/dθ."""
    return np.outer(dpsi, psi.conj()) + np.outer(psi, dpsi.conj())


@dataclass(frozen=True, eq=False)
class ParametricFamily:
    """A map θ -> ρ_θ over a closed interval.

    If ``analytic_derivative`` is None, derivatives are taken by central
    differences with step ``step`` (one-sided second-order stencils near the
    ends of a smooth piece). ``smooth_pieces`` lists closed sub-intervals on
    which θ -> ρ_θ is smooth; a point shared by two pieces belongs to the
    first one listed. ``singular_points`` are known rank-change points that
    default grids avoid.
    """

    state_at: Callable[[float], DensityMatrix]
    domain: tuple[float, float]
    dims: tuple[int, ...]
    analytic_derivative: Callable[[float], np.ndarray] | None = None
    step: float = 1e-5
    smooth_pieces: tuple[tuple[float, float], ...] = ()
    singular_points: tuple[float, ...] = ()
    name: str = "family"

    def __post_init__(self):
        lo, hi = (float(x) for x in self.domain)
        if not hi >= lo:
            raise ValueError(f"domain {self.domain} is empty")
        object.__setattr__(self, "domain", (lo, hi))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        pieces = tuple((float(a), float(b)) for a, b in self.smooth_pieces) or ((lo, hi),)
        object.__setattr__(self, "smooth_pieces", pieces)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def boundaries(self) -> tuple[float, ...]:
        """Interior junctions between smooth pieces."""
        lo, hi = self.domain
        pts = {p for piece in self.smooth_pieces for p in piece}
        return tuple(sorted(p for p in pts if lo < p < hi))

    def piece_of(self, theta: float) -> tuple[float, float]:
        lo, hi = self.domain
        if not lo <= theta <= hi:
            raise OutOfDomain(f"θ={theta} outside domain [{lo}, {hi}]")
        for piece in self.smooth_pieces:
            if piece[0] <= theta <= piece[1]:
                return piece
        raise OutOfDomain(f"θ={theta} is not covered by any smooth piece")

    def __call__(self, theta: float) -> DensityMatrix:
        self.piece_of(theta)
        return self.state_at(theta)

    def default_grid(self, count: int = 25, margin: float = 0.05) -> np.ndarray:
        """Evenly spaced interior points of every piece, avoiding singular points."""
        bad = list(self.boundaries) + list(self.singular_points)
        n_pieces = len(self.smooth_pieces)
        per = max(1, count // n_pieces)
        pts = []
        for a, b in self.smooth_pieces:
            xs = np.linspace(a + margin, b - margin, per) if b - a > 2 * margin else np.array([(a + b) / 2])
            pts.extend(x for x in xs if all(abs(x - s) > 1e-6 for s in bad))
        return np.array(pts)


def derivative(f: ParametricFamily, theta: float, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """∂ρ/∂θ at ``theta``, analytic when available, otherwise finite differences."""
    lo, hi = f.piece_of(theta)
    if f.analytic_derivative is not None:
        d = as_matrix(f.analytic_derivative(theta))
    else:
        h = f.step
        s = lambda t: f.state_at(t).mat  # noqa: E731
        if lo < theta - h and theta + h < hi:
            d = (s(theta + h) - s(theta - h)) / (2 * h)
        elif theta + 2 * h < hi:
            d = (-3 * s(theta) + 4 * s(theta + h) - s(theta + 2 * h)) / (2 * h)
        elif theta - 2 * h > lo:
            d = (3 * s(theta) - 4 * s(theta - h) + s(theta - 2 * h)) / (2 * h)
        else:
            raise NonSmoothPoint(f"no finite-difference stencil fits at θ={theta} in piece [{lo}, {hi}]")
    if hermiticity_residual(d) > tol.herm * d.shape[0] * max(1.0, float(np.linalg.norm(d))):
        raise NotHermitian(f"derivative at θ={theta} is not Hermitian")
    return d


def _array_family(state_at, analytic, **kwargs) -> ParametricFamily:
    return ParametricFamily(state_at=state_at, analytic_derivative=analytic, **kwargs)


def reduced_family(f: ParametricFamily, keep: Sequence[int], tol: ToleranceConfig = DEFAULT_TOL) -> ParametricFamily:
    """Family of reduced states; its derivative is the partial trace of the joint one."""
    keep = sorted(keep)
    dims = tuple(f.dims[k] for k in keep)

    def state_at(theta):
        return DensityMatrix(ptrace(f.state_at(theta).mat, f.dims, keep), dims, tol)

    def d_at(theta):
        return ptrace(derivative(f, theta, tol), f.dims, keep)

    return _array_family(
        state_at, d_at, domain=f.domain, dims=dims, smooth_pieces=f.smooth_pieces,
        singular_points=f.singular_points, name=f"tr[{f.name}] keep {tuple(keep)}",
    )


def product_family(*families: ParametricFamily, tol: ToleranceConfig = DEFAULT_TOL) -> ParametricFamily:
    """θ -> ρ¹_θ ⊗ ρ²_θ ⊗ ... with the product-rule derivative."""
    dims = tuple(d for f in families for d in f.dims)
    lo = max(f.domain[0] for f in families)
    hi = min(f.domain[1] for f in families)

    def state_at(theta):
        return DensityMatrix(tensor(*(f.state_at(theta).mat for f in families)), dims, tol)

    def d_at(theta):
        mats = [f.state_at(theta).mat for f in families]
        ders = [derivative(f, theta, tol) for f in families]
        total = np.zeros((int(np.prod(dims)),) * 2, dtype=complex)
        for i in range(len(families)):
            total += tensor(*(ders[k] if k == i else mats[k] for k in range(len(families))))
        return total

    singular = tuple(sorted({s for f in families for s in f.singular_points}))
    return _array_family(
        state_at, d_at, domain=(lo, hi), dims=dims, singular_points=singular,
        name=" ⊗ ".join(f.name for f in families),
    )


def constant_family(rho: DensityMatrix, domain=(0.0, 1.0), name: str = "constant") -> ParametricFamily:
    zero = np.zeros_like(rho.mat)
    return _array_family(lambda t: rho, lambda t: zero, domain=domain, dims=rho.dims, name=name)


# --------------------------------------------------------------------------
# SLD and QFI


@dataclass(frozen=True, eq=False)
class SldResult:
    sld: np.ndarray
    qfi: float
    support_rank: int
    dropped_weight: float
    degenerate: bool
    residual: float


def support_masked(rho, drho, tol: ToleranceConfig = DEFAULT_TOL) -> np.ndarray:
    """``drho`` with the eigenbasis entries that the SLD ignores set to zero.

    Entry (i, j) of ``drho`` in the eigenbasis of ``rho`` is kept iff
    λ_i + λ_j > tol.rank. For a smooth family the removed block is zero.
    """
    eig = eig_hermitian(rho, tol)
    w, v = eig.eigenvalues, eig.eigenvectors
    keep = (w[:, None] + w[None, :]) > tol.rank
    D = dagger(v) @ as_matrix(drho) @ v
    return v @ np.where(keep, D, 0) @ dagger(v)


def sld(rho, drho, tol: ToleranceConfig = DEFAULT_TOL) -> SldResult:
    """Symmetric logarithmic derivative solving ∂ρ = (Lρ + ρL)/2 on the support.

    Works in the eigenbasis of ρ: L_ij = 2 D_ij / (λ_i + λ_j) whenever
    λ_i + λ_j exceeds ``tol.rank``, and zero otherwise. The norm of the
    skipped entries of D is returned as ``dropped_weight``; values above
    ``tol.sld`` flag the point as degenerate (the state changes rank there).
    """
    r = as_matrix(rho)
    D = as_matrix(drho)
    if D.shape != r.shape:
        raise DimensionMismatch(f"state {r.shape} and derivative {D.shape} differ in shape")
    if hermiticity_residual(D) > tol.herm * D.shape[0] * max(1.0, float(np.linalg.norm(D))):
        raise NotHermitian("derivative is not Hermitian")
    eig = eig_hermitian(r, tol)
    w, v = eig.eigenvalues, eig.eigenvectors
    Dt = dagger(v) @ D @ v
    denom = w[:, None] + w[None, :]
    keep = denom > tol.rank
    Lt = np.zeros_like(Dt)
    Lt[keep] = 2 * Dt[keep] / denom[keep]
    qfi = float(np.sum(2 * np.abs(Dt[keep]) ** 2 / denom[keep]))
    dropped = float(np.linalg.norm(Dt[~keep]))
    L = v @ Lt @ dagger(v)
    L = (L + dagger(L)) / 2
    target = v @ np.where(keep, Dt, 0) @ dagger(v)
    residual = float(np.linalg.norm((L @ r + r @ L) / 2 - target))
    return SldResult(
        sld=L,
        qfi=max(qfi, 0.0),
        support_rank=int(np.sum(w > tol.rank / 2)),
        dropped_weight=dropped,
        degenerate=dropped > tol.sld,
        residual=residual,
    )


def sld_at(f: ParametricFamily, theta: float, tol: ToleranceConfig = DEFAULT_TOL) -> SldResult:
    return sld(f.state_at(theta), derivative(f, theta, tol), tol)


def qfi(f: ParametricFamily, theta: float, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Quantum Fisher information tr(ρ L²) of the family at ``theta``."""
    return sld_at(f, theta, tol).qfi


def _fisher_from_probabilities(p: np.ndarray, dp: np.ndarray, tol: ToleranceConfig) -> float:
    small = p <= tol.prob
    if np.any(small & (np.abs(dp) > np.sqrt(tol.prob))):
        j = int(np.flatnonzero(small & (np.abs(dp) > np.sqrt(tol.prob)))[0])
        raise DivergentFisher(f"outcome {j}: p={p[j]:.3e} but dp={dp[j]:.3e}")
    ok = ~small
    return float(np.sum(dp[ok] ** 2 / p[ok]))


def probabilities_and_derivatives(rho, drho, m: POVM) -> tuple[np.ndarray, np.ndarray]:
    r, D = as_matrix(rho), as_matrix(drho)
    if r.shape[0] != m.dim:
        raise DimensionMismatch(f"POVM dim {m.dim} vs state dim {r.shape[0]}")
    E = np.stack(m.effects)
    # tr(A M) = sum_ab A_ab M_ba
    p = np.real(np.einsum("ab,jba->j", r, E))
    dp = np.real(np.einsum("ab,jba->j", D, E))
    return p, dp


def classical_fisher_at(rho, drho, m: POVM, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    p, dp = probabilities_and_derivatives(rho, drho, m)
    return _fisher_from_probabilities(p, dp, tol)


def classical_fisher(f: ParametricFamily, theta: float, m: POVM, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Σ_j (∂p_j)² / p_j with p_j = tr(ρ_θ M_j); 0/0 terms count as zero."""
    return classical_fisher_at(f.state_at(theta), derivative(f, theta, tol), m, tol)


def optimal_measurement(rho, drho, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    """Projective measurement onto the SLD eigenbasis."""
    L = sld(rho, drho, tol).sld
    vecs = eig_hermitian(L, tol).eigenvectors
    return projective_measurement(vecs, tol)


def optimal_measurement_at(f: ParametricFamily, theta: float, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    return optimal_measurement(f.state_at(theta), derivative(f, theta, tol), tol)


@dataclass(frozen=True)
class OptimalityCheck:
    holds: bool
    residuals: tuple[float, ...]
    u: tuple[float, ...]

    def __bool__(self):
        return self.holds


def check_optimality_condition(rho, drho, L, m: POVM, tol: ToleranceConfig = DEFAULT_TOL) -> OptimalityCheck:
    """Test M_j^{1/2} L ρ^{1/2} = u_j M_j^{1/2} ρ^{1/2} for every outcome.

    u_j = ∂ log tr(ρ M_j), computed from ``drho``; u_j = 0 when tr(ρ M_j)
    is below ``tol.prob``.
    """
    r, L = as_matrix(rho), as_matrix(L)
    if L.shape != r.shape:
        raise DimensionMismatch(f"SLD {L.shape} vs state {r.shape}")
    p, dp = probabilities_and_derivatives(r, drho, m)
    u = np.where(p > tol.prob, dp / np.where(p > tol.prob, p, 1.0), 0.0)
    sr = psd_sqrt(r, tol)
    residuals = []
    for uj, e in zip(u, m.effects):
        se = psd_sqrt(e, tol)
        residuals.append(float(np.linalg.norm(se @ L @ sr - uj * se @ sr)))
    return OptimalityCheck(max(residuals) <= tol.opt, tuple(residuals), tuple(float(x) for x in u))


def statistical_distance(r1, r2, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """arccos of the root fidelity, in [0, π/2]."""
    return float(np.arccos(fidelity(r1, r2, tol)))


def bhattacharyya_angle_from_probabilities(p: np.ndarray, q: np.ndarray) -> float:
    p = np.clip(p, 0, None)
    q = np.clip(q, 0, None)
    p, q = p / p.sum(), q / q.sum()
    # 1 - Σ sqrt(pq) = Σ (sqrt p - sqrt q)² / 2 avoids cancellation near zero distance
    gap = 0.5 * np.sum((np.sqrt(p) - np.sqrt(q)) ** 2)
    return float(2 * np.arcsin(np.sqrt(np.clip(gap / 2, 0.0, 1.0))))


def bhattacharyya_angle(r1, r2, m: POVM) -> float:
    """arccos Σ_j sqrt(p_j q_j) for a particular measurement."""
    return bhattacharyya_angle_from_probabilities(m.probabilities(r1), m.probabilities(r2))


def optimal_distinguishing_measurement(r1, r2, tol: ToleranceConfig = DEFAULT_TOL) -> POVM:
    """Projective measurement attaining the statistical distance between two states.

    Eigenbasis of ρ1^{-1/2} (ρ1^{1/2} ρ2 ρ1^{1/2})^{1/2} ρ1^{-1/2}, with ρ1
    inverted on its support; exact when ρ1 has full rank.
    """
    a, b = as_matrix(r1), as_matrix(r2)
    eig = eig_hermitian(a, tol)
    w, v = eig.eigenvalues, eig.eigenvectors
    inv_root = np.where(w > tol.rank, 1 / np.sqrt(np.where(w > tol.rank, w, 1.0)), 0.0)
    sa = psd_sqrt(a, tol)
    mid = psd_sqrt(sa @ b @ sa, tol)
    op = (v * inv_root) @ dagger(v) @ mid @ (v * inv_root) @ dagger(v)
    return projective_measurement(eig_hermitian((op + dagger(op)) / 2, tol).eigenvectors, tol)


def crb(qfi_value: float, n_samples: int, tol: ToleranceConfig = DEFAULT_TOL) -> float:
    """Cramér-Rao bound 1 / (n F) on the variance of an unbiased estimator."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if qfi_value <= tol.zero_info:
        raise ZeroInformation(f"Fisher information {qfi_value:.3e} carries no information")
    return 1.0 / (n_samples * qfi_value)


# --------------------------------------------------------------------------
# Monte Carlo estimation


@dataclass(frozen=True)
class EstimationReport:
    theta_true: float
    n_samples: int
    n_trials: int
    estimator_variance: float
    estimator_mean: float
    fisher: float
    crb: float
    rng_seed: int

    @property
    def efficiency(self) -> float:
        """crb / variance; 1 means the bound is saturated."""
        return self.crb / self.estimator_variance if self.estimator_variance > 0 else float("inf")


MLE_GRID_POINTS = 512


def simulate_estimation(
    f: ParametricFamily,
    m: POVM,
    theta_true: float,
    n_samples: int,
    n_trials: int,
    seed: int,
    search_interval: tuple[float, float] | None = None,
    tol: ToleranceConfig = DEFAULT_TOL,
) -> EstimationReport:
    """Sample outcomes of ``m`` on ρ_{θ_true} and estimate θ by maximum likelihood.

    Each trial draws ``n_samples`` i.i.d. outcomes by inverse-CDF sampling
    (outcomes in label order) from its own generator seeded by
    ``(seed, trial)``. The likelihood is maximized over ``search_interval``
    (default: the smooth piece containing ``theta_true``) by a
    512-point grid followed by bounded scalar refinement. Families whose
    outcome map is not injective on the piece need a narrower window.
    """
    fisher = classical_fisher(f, theta_true, m, tol)
    if fisher <= tol.zero_info:
        raise NonIdentifiable(f"measurement carries no information about θ at {theta_true}")
    piece = f.piece_of(theta_true)
    lo, hi = search_interval if search_interval is not None else piece
    lo, hi = max(lo, piece[0]), min(hi, piece[1])
    if not lo <= theta_true <= hi:
        raise OutOfDomain(f"θ_true={theta_true} outside search interval [{lo}, {hi}]")

    grid = np.linspace(lo, hi, MLE_GRID_POINTS)
    with np.errstate(divide="ignore"):
        log_p_grid = np.log(np.clip(np.array([m.probabilities(f.state_at(t)) for t in grid]), 0, None))
    p_true = np.clip(m.probabilities(f.state_at(theta_true)), 0, None)
    cdf = np.cumsum(p_true / p_true.sum())

    def log_lik(counts, theta):
        with np.errstate(divide="ignore"):
            lp = np.log(np.clip(m.probabilities(f.state_at(theta)), 0, None))
        mask = counts > 0
        return float(np.sum(counts[mask] * lp[mask]))

    estimates = np.empty(n_trials)
    for trial in range(n_trials):
        rng = np.random.default_rng(np.random.SeedSequence([seed, trial]))
        outcomes = np.searchsorted(cdf, rng.random(n_samples), side="right")
        counts = np.bincount(np.minimum(outcomes, len(m) - 1), minlength=len(m)).astype(float)
        mask = counts > 0
        ll = log_p_grid[:, mask] @ counts[mask]
        i = int(np.argmax(ll))
        a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = minimize_scalar(lambda t: -log_lik(counts, t), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-10})
        best = res.x if -res.fun >= ll[i] else grid[i]
        estimates[trial] = best
    variance = float(np.var(estimates, ddof=1)) if n_trials > 1 else 0.0
    return EstimationReport(
        theta_true=float(theta_true),
        n_samples=int(n_samples),
        n_trials=int(n_trials),
        estimator_variance=variance,
        estimator_mean=float(np.mean(estimates)),
        fisher=fisher,
        crb=crb(fisher, n_samples, tol),
        rng_seed=int(seed),
    )
