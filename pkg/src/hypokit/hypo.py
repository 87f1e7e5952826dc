"""Quantitative hypocoercivity checks.

Three layers:

  * a 2x2 ODE toy model dX/dt = L X with -L = A + gamma S,
    A = [[0, 1], [-1, 0]] (conservative), S = [[0, 0], [0, 1]] (dissipative),
    whose spectrum and optimal decay-norm matrices are known in closed form;
  * modified-norm (auxiliary-operator) dissipation estimates and explicit
    resolvent upper bounds for the Galerkin-discretized kinetic generator,
    together with witness functions that bound the resolvent norm from below;
  * a friction scan fitting the min(gamma, 1/gamma) scaling of the gap.

All Galerkin computations run in the whitened, constant-deflated frame
provided by spectral.reduced_generator, where gram-weighted norms are
Euclidean and the exact antisymmetry of the Hamiltonian block makes the
auxiliary operator R = (1 + (L_ham P0)* (L_ham P0))^{-1} (L_ham P0)* satisfy
||2R|| <= 1 and ||L_ham R|| <= 1 up to roundoff.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import (
    DefectiveCaseError,
    DegenerateWitnessError,
    InvalidArgumentError,
    NumericalFailureError,
)
from .model import EnsembleParams, PotentialSpec
from .spectral import (
    GeneratorAssembly,
    _gap_of_operator,
    poincare_constant,
    project_phase_function,
    reduced_generator,
)

Array = np.ndarray


# ---------------------------------------------------------------------------
# 2x2 ODE toy model


@dataclass(frozen=True)
class OdeToy:
    """dX/dt = L X with -L = A + gamma S; A rotation generator, S = diag(0, 1)."""

    gamma: float

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")

    @property
    def a_mat(self) -> Array:
        return np.array([[0.0, 1.0], [-1.0, 0.0]])

    @property
    def s_mat(self) -> Array:
        return np.array([[0.0, 0.0], [0.0, 1.0]])

    @property
    def l_mat(self) -> Array:
        return -(self.a_mat + self.gamma * self.s_mat)


@dataclass(frozen=True)
class OdeEigs:
    lambda_plus: complex
    lambda_minus: complex
    gap: float
    numeric: Array  # eigenvalues of -L from the dense solver, for cross-checking


def ode_eigs(gamma: float) -> OdeEigs:
    """Closed-form spectrum of -L: lambda_pm = gamma/2 +- sqrt(gamma^2/4 - 1)."""
    toy = OdeToy(gamma)
    disc = np.sqrt(complex(0.25 * gamma * gamma - 1.0))
    lam_p = 0.5 * gamma + disc
    lam_m = 0.5 * gamma - disc
    if gamma <= 2.0:
        gap = 0.5 * gamma
    else:
        gap = 2.0 / (gamma + math.sqrt(gamma * gamma - 4.0))
    numeric = np.linalg.eigvals(-toy.l_mat)
    return OdeEigs(lambda_plus=lam_p, lambda_minus=lam_m, gap=float(gap), numeric=numeric)


@dataclass(frozen=True)
class OptimalP:
    p_mat: Array
    lam: float
    cert_ok: bool
    cert_residual: float  # most negative eigenvalue in the two certificate checks


def ode_optimal_P(gamma: float, tol: float = 1e-10) -> OptimalP:
    """Sharp decay-norm matrix P from the eigenvectors of L^T.

    P = sum_k X_k conj(X_k)^T over unit eigenvectors of L^T is symmetric
    positive definite and satisfies -(P L + L^T P) >= 2 lam P with
    lam = spectral gap; at gamma = 2 the eigenvectors coincide and the
    construction is defective.
    """
    toy = OdeToy(gamma)
    if abs(gamma - 2.0) < 1e-8:
        raise DefectiveCaseError(
            "gamma = 2 is defective (coinciding eigenvectors); use ode_perturbative_P"
        )
    _, vecs = np.linalg.eig(toy.l_mat.T)
    p_mat = np.real(vecs[:, [0]] @ vecs[:, [0]].conj().T + vecs[:, [1]] @ vecs[:, [1]].conj().T)
    p_mat = 0.5 * (p_mat + p_mat.T)
    lam = ode_eigs(gamma).gap

    diss = -(p_mat @ toy.l_mat + toy.l_mat.T @ p_mat) - 2.0 * lam * p_mat
    min_diss = float(np.min(np.linalg.eigvalsh(0.5 * (diss + diss.T))))
    min_p = float(np.min(np.linalg.eigvalsh(p_mat)))
    cert_ok = min_p > tol and min_diss >= -tol
    return OptimalP(p_mat=p_mat, lam=lam, cert_ok=cert_ok, cert_residual=min(min_diss, min_p))


@dataclass(frozen=True)
class PerturbativeP:
    p_mat: Array
    min_eig_dissipation: float


def ode_perturbative_P(gamma: float, eps: float) -> PerturbativeP:
    """P = I - eps [[0,1],[1,0]]; reports the smallest eigenvalue of -(PL + L^T P)."""
    toy = OdeToy(gamma)
    if not abs(eps) < 1.0:
        raise InvalidArgumentError(f"|eps| must be < 1 for P to stay positive definite, got {eps}")
    p_mat = np.eye(2) - eps * np.array([[0.0, 1.0], [1.0, 0.0]])
    diss = -(p_mat @ toy.l_mat + toy.l_mat.T @ p_mat)
    return PerturbativeP(
        p_mat=p_mat,
        min_eig_dissipation=float(np.min(np.linalg.eigvalsh(0.5 * (diss + diss.T)))),
    )


def ode_trajectory(gamma: float, x0, T: float, dt: float) -> Array:
    """Integrate dX/dt = L X with classical RK4; rows are (t, X1, X2)."""
    toy = OdeToy(gamma)
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (2,):
        raise InvalidArgumentError(f"x0 must have shape (2,), got {x0.shape}")
    if not (T > 0 and dt > 0 and dt <= T):
        raise InvalidArgumentError(f"need 0 < dt <= T, got dt={dt}, T={T}")
    l_mat = toy.l_mat
    n = int(round(T / dt))
    out = np.empty((n + 1, 3))
    x = x0.copy()
    out[0] = (0.0, x[0], x[1])
    for i in range(1, n + 1):
        k1 = l_mat @ x
        k2 = l_mat @ (x + 0.5 * dt * k1)
        k3 = l_mat @ (x + 0.5 * dt * k2)
        k4 = l_mat @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i] = (i * dt, x[0], x[1])
    return out


def fit_envelope_rate(times: Array, x1: Array, x2: Array) -> float:
    """Decay rate of |X(t)| fitted through fixed-phase points of its oscillation.

    |X(t)| can decay monotonically with a periodically varying slope (the
    symmetric part of the drift only damps one component), so raw local maxima
    of log|X| need not exist.  Detrending by a pilot linear fit exposes one
    maximum per oscillation period; a line through those points has slope equal
    to the mean decay rate.
    """
    s = np.hypot(np.asarray(x1, float), np.asarray(x2, float))
    t = np.asarray(times, float)
    if np.any(s <= 0):
        raise NumericalFailureError("trajectory passes through the origin; no envelope")
    ls = np.log(s)
    pilot = np.polyfit(t, ls, 1)[0]
    d = ls - pilot * t
    interior = np.nonzero((d[1:-1] >= d[:-2]) & (d[1:-1] > d[2:]))[0] + 1
    if interior.size < 2:
        raise NumericalFailureError("need at least two envelope peaks to fit a rate")
    # parabolic refinement of each detrended peak
    tp = np.empty(interior.size)
    lp = np.empty(interior.size)
    for j, i in enumerate(interior):
        y0, y1, y2 = d[i - 1], d[i], d[i + 1]
        denom = y0 - 2.0 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        dt = t[i] - t[i - 1]
        tp[j] = t[i] + shift * dt
        lp[j] = (y1 - 0.25 * (y0 - y2) * shift) + pilot * tp[j]
    slope = np.polyfit(tp, lp, 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# modified-norm dissipation for the Galerkin generator


@dataclass(frozen=True)
class DissipationResult:
    lambda_est: float
    epsilon: float
    r_norm: float  # ||2R|| in the gram norm
    lham_r_norm: float  # ||L_ham R||
    r_norm_ok: bool
    lham_r_norm_ok: bool


def _modified_norm_parts(asm: GeneratorAssembly, rcond):
    red = reduced_generator(asm, rcond)
    h = red.ham
    t_op = h @ red.pi0
    r_op = sla.solve(np.eye(t_op.shape[0]) + t_op.T @ t_op, t_op.T, assume_a="pos")
    return red, h, r_op


def modified_norm_dissipation(
    asm: GeneratorAssembly, eps: float, rcond: float | None = None
) -> DissipationResult:
    """Dissipation rate of the eps-modified norm H[phi] = 1/2||phi||^2 - eps<R phi, phi>.

    lambda_est is the largest lambda with D[phi] >= lambda ||phi||^2 on the
    constant-deflated space, computed as the smallest eigenvalue of the
    symmetrized dissipation matrix.  Requires |eps| < 1; the modified norm is
    then equivalent to the flat one since ||2R|| <= 1.
    """
    if not abs(eps) < 1.0:
        raise InvalidArgumentError(f"|eps| must be < 1, got {eps}")
    red, h, r_op = _modified_norm_parts(asm, rcond)
    r_norm = 2.0 * float(sla.svdvals(r_op).max())
    lham_r_norm = float(sla.svdvals(h @ r_op).max())

    m_eps = 0.5 * np.eye(r_op.shape[0]) - eps * 0.5 * (r_op + r_op.T)
    if float(np.min(sla.eigvalsh(m_eps))) <= 0.0:
        raise InvalidArgumentError(
            f"modified norm is not positive definite at eps={eps} (norm equivalence broken)"
        )
    l_op = red.operator(asm.gamma)
    diss = -(l_op.T @ m_eps + m_eps @ l_op)
    diss = 0.5 * (diss + diss.T)
    lambda_est = float(sla.eigh(diss, eigvals_only=True, subset_by_index=[0, 0])[0])
    return DissipationResult(
        lambda_est=lambda_est,
        epsilon=float(eps),
        r_norm=r_norm,
        lham_r_norm=lham_r_norm,
        r_norm_ok=r_norm <= 1.0 + 1e-8,
        lham_r_norm_ok=lham_r_norm <= 1.0 + 1e-8,
    )


def tune_modified_norm_epsilon(
    asm: GeneratorAssembly,
    rcond: float | None = None,
    lo: float = 1e-4,
    hi: float = 0.9999,
    tol: float = 1e-4,
) -> DissipationResult:
    """Golden-section maximization of lambda_est over eps in (0, 1).

    lambda_est(eps) is the minimum eigenvalue of a matrix pencil affine in
    eps, hence concave, so golden-section search is exact up to tol.
    """
    red, h, r_op = _modified_norm_parts(asm, rcond)
    l_op = red.operator(asm.gamma)
    sym_r = 0.5 * (r_op + r_op.T)
    d0 = -0.5 * (l_op.T + l_op)
    d2 = l_op.T @ sym_r + sym_r @ l_op
    d2 = 0.5 * (d2 + d2.T)

    def lam(eps: float) -> float:
        return float(sla.eigh(d0 + eps * d2, eigvals_only=True, subset_by_index=[0, 0])[0])

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = lam(c), lam(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = lam(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = lam(d)
    best = 0.5 * (a + b)
    return modified_norm_dissipation(asm, best, rcond)


# ---------------------------------------------------------------------------
# resolvent bounds


def resolvent_norm(asm: GeneratorAssembly, rcond: float | None = None) -> float:
    """Gram-weighted norm of the inverse generator on the deflated space."""
    red = reduced_generator(asm, rcond)
    sv = sla.svdvals(red.operator(asm.gamma))
    smin, smax = float(sv.min()), float(sv.max())
    if smin <= 1e-14 * smax:
        raise NumericalFailureError("generator is numerically singular on the deflated space")
    return 1.0 / smin


SCHUR_CASES = ("convex", "hessian_lower_bound", "general")


@dataclass(frozen=True)
class SchurBound:
    value: float
    case: str
    c_const: float
    c_prime: float
    unpinned: bool


def schur_bound(
    params: EnsembleParams,
    r_nu: float,
    case: str,
    K: float | None = None,
    c_prime: float | None = None,
) -> SchurBound:
    """Explicit resolvent upper bound 2 beta gamma / R + (8m/gamma)(3/8 + C + C'/R).

    Cases: convex potential (C=1, C'=0); Hessian bounded below by -K
    (C=1, C'=K, K >= 0); general with caller-supplied C' (C=2, flagged as
    unpinned since C' carries an unspecified dimension-dependent constant).
    """
    if case not in SCHUR_CASES:
        raise InvalidArgumentError(f"unknown case '{case}'; options: {', '.join(SCHUR_CASES)}")
    if not r_nu > 0:
        raise InvalidArgumentError(f"Poincare constant must be positive, got {r_nu}")
    if not params.gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    unpinned = False
    if case == "convex":
        c_const, cp = 1.0, 0.0
    elif case == "hessian_lower_bound":
        if K is None or K < 0:
            raise InvalidArgumentError("hessian_lower_bound case needs K >= 0")
        c_const, cp = 1.0, float(K)
    else:
        if c_prime is None or c_prime < 0:
            raise InvalidArgumentError("general case needs a caller-supplied c_prime >= 0")
        c_const, cp = 2.0, float(c_prime)
        unpinned = True
    value = 2.0 * params.beta * params.gamma / r_nu + (8.0 * params.mass / params.gamma) * (
        0.375 + c_const + cp / r_nu
    )
    return SchurBound(value=float(value), case=case, c_const=c_const, c_prime=cp, unpinned=unpinned)


@dataclass(frozen=True)
class SchurCheck:
    numeric: float
    bound: float
    holds: bool
    case: str
    K: float
    r_nu: float


def verify_schur_bound(
    asm: GeneratorAssembly,
    spec: PotentialSpec,
    params: EnsembleParams,
    case: str | None = None,
    K: float | None = None,
    c_prime: float | None = None,
    slack: float = 0.05,
    hess_grid_n: int = 4096,
    rcond: float | None = None,
) -> SchurCheck:
    """Compare the numerically computed resolvent norm against the explicit bound.

    The Hessian lower bound is scanned on a uniform torus grid.  Requesting
    the convex case for a potential whose Hessian dips below zero is refused
    (no non-constant torus potential is convex).
    """
    pts = (np.arange(hess_grid_n) * (asm.basis.L / hess_grid_n))[:, None]
    d2v = spec.hessian(pts)[:, 0, 0]
    min_hess = float(d2v.min())
    scale = float(np.abs(d2v).max())
    convex_ok = min_hess >= -1e-10 * max(scale, 1.0)
    # A C^1 torus potential has zero-mean second derivative; a nonzero mean
    # betrays a confining potential clipped onto a cell, whose apparent grid
    # convexity hides a negative seam contribution.
    periodic_hess = abs(float(d2v.mean())) <= 1e-8 * max(scale, 1.0)

    if case is None:
        if convex_ok and periodic_hess:
            case = "convex"
        elif convex_ok:
            raise InvalidArgumentError(
                "potential looks convex on the grid but is not periodically convex "
                "(clipped cell); pass case='hessian_lower_bound' or 'general' explicitly"
            )
        else:
            case = "hessian_lower_bound"
    if case == "convex" and not (convex_ok and periodic_hess):
        raise InvalidArgumentError(
            f"convex case refused: Hessian reaches {min_hess:.6g} < 0 on the torus "
            "(or its apparent convexity comes from a clipped cell); "
            "use hessian_lower_bound or general"
        )
    k_used = 0.0
    if case == "hessian_lower_bound":
        k_used = float(K) if K is not None else max(0.0, -min_hess)

    r_nu = poincare_constant(spec, params, Kq=asm.basis.Kq)
    numeric = resolvent_norm(asm, rcond)
    bound = schur_bound(params, r_nu, case, K=k_used if case == "hessian_lower_bound" else None, c_prime=c_prime)
    return SchurCheck(
        numeric=numeric,
        bound=bound.value,
        holds=bool(numeric <= bound.value * (1.0 + slack)),
        case=case,
        K=k_used,
        r_nu=r_nu,
    )


@dataclass(frozen=True)
class WitnessPair:
    """Rayleigh-quotient lower bounds ||u|| / ||L u|| <= ||L^{-1}|| for two witnesses.

    overdamped: u = p V'(q) + gamma (V - <V>), whose image under L is
    gamma-independent, so the ratio grows like gamma for large friction.
    underdamped: u = projected Hamiltonian, killed by L_ham, so
    L u = gamma L_FD u and the ratio grows like 1/gamma for small friction.
    """

    overdamped: float
    underdamped: float


def resolvent_lower_bound(
    spec: PotentialSpec,
    params: EnsembleParams,
    asm: GeneratorAssembly,
    rcond: float | None = None,
) -> WitnessPair:
    basis = asm.basis
    red = reduced_generator(asm, rcond)
    w = basis.weights
    v = spec.eval(basis.nodes[:, None])
    v_mean = float(w @ v / w.sum())
    v_var = float(w @ (v - v_mean) ** 2 / w.sum())
    if v_var <= 1e-14 * max(1.0, v_mean * v_mean):
        raise DegenerateWitnessError("witnesses vanish for a constant potential")

    gamma, m = asm.gamma, params.mass
    op = red.operator(gamma)

    def ratio(f) -> float:
        z = red.to_reduced(project_phase_function(basis, f))
        img = op @ z
        nz, ni = float(np.linalg.norm(z)), float(np.linalg.norm(img))
        if ni <= 1e-14 * max(nz, 1.0):
            raise NumericalFailureError("witness image under the generator is numerically zero")
        return nz / ni

    over = ratio(lambda q, p: p * spec.grad(q) + gamma * (spec.eval(q)[:, None] - v_mean))
    under = ratio(lambda q, p: spec.eval(q)[:, None] + p * p / (2.0 * m))
    return WitnessPair(overdamped=over, underdamped=under)


# ---------------------------------------------------------------------------
# friction scan


@dataclass(frozen=True)
class ScalingTable:
    """Rows of a friction scan: gap(gamma) against min(gamma, 1/gamma)."""

    gammas: Array
    gaps: Array  # NaN where a row failed
    lower_model: Array  # min(gamma, 1/gamma)

    def __post_init__(self):
        g = np.asarray(self.gammas, float)
        if g.ndim != 1 or np.any(g <= 0) or np.any(np.diff(g) <= 0):
            raise InvalidArgumentError("gammas must be positive and strictly increasing")
        ok = np.isfinite(self.gaps)
        if np.any(self.gaps[ok] <= 0):
            raise InvalidArgumentError("computed gaps must be positive")


@dataclass(frozen=True)
class ScanResult:
    table: ScalingTable
    slope_small_gamma: float
    slope_large_gamma: float
    lambda_bar: float
    row_errors: dict


def _max_workers(n_rows: int, requested: int | None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("HYPOKIT_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise InvalidArgumentError(f"HYPOKIT_THREADS must be an integer, got {env!r}") from exc
    return max(1, min(n_rows, os.cpu_count() or 1))


def gamma_scan(
    spec: PotentialSpec,
    params_base: EnsembleParams,
    gammas,
    Kq: int | None = None,
    Np: int | None = None,
    n_quad: int | None = None,
    max_workers: int | None = None,
    rcond: float | None = None,
    assembly: GeneratorAssembly | None = None,
) -> ScanResult:
    """Spectral gap across a friction ladder; fits both scaling branches.

    Requires at least 7 gamma values spanning [1/8, 8].  Rows run in parallel
    (capped by HYPOKIT_THREADS or max_workers) and failed rows are reported in
    row_errors with NaN gaps rather than aborting the scan.  Slopes are
    log-log fits over gamma <= 1/2 and gamma >= 2; lambda_bar is the smallest
    ratio gap / min(gamma, 1/gamma).
    """
    g = np.asarray(sorted(float(x) for x in gammas))
    if g.size < 7:
        raise InvalidArgumentError(f"need at least 7 gamma values, got {g.size}")
    if np.any(g <= 0) or np.any(np.diff(g) <= 0):
        raise InvalidArgumentError("gammas must be positive and distinct")
    if g[0] > 0.125 * (1 + 1e-9) or g[-1] < 8.0 * (1 - 1e-9):
        raise InvalidArgumentError("gammas must span at least [1/8, 8]")

    if assembly is None:
        from .spectral import DEFAULT_KQ, DEFAULT_NP, DEFAULT_NQUAD, build_basis

        basis = build_basis(
            spec,
            params_base,
            Kq=DEFAULT_KQ if Kq is None else Kq,
            Np=DEFAULT_NP if Np is None else Np,
            n_quad=DEFAULT_NQUAD if n_quad is None else n_quad,
        )
        from .spectral import assemble_generator

        assembly = assemble_generator(basis, spec, params_base)
    red = reduced_generator(assembly, rcond)

    gaps = np.full(g.size, np.nan)
    row_errors: dict = {}

    def run_row(i: int):
        try:
            gaps[i] = _gap_of_operator(red.operator(g[i])).gap
        except Exception as exc:  # noqa: BLE001 - rows are isolated by design
            row_errors[float(g[i])] = f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=_max_workers(g.size, max_workers)) as pool:
        list(pool.map(run_row, range(g.size)))

    lower = np.minimum(g, 1.0 / g)
    table = ScalingTable(gammas=g, gaps=gaps, lower_model=lower)

    def branch_slope(mask) -> float:
        ok = mask & np.isfinite(gaps) & (gaps > 0)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(g[ok]), np.log(gaps[ok]), 1)[0])

    ok = np.isfinite(gaps) & (gaps > 0)
    lam_bar = float(np.min(gaps[ok] / lower[ok])) if np.any(ok) else float("nan")
    return ScanResult(
        table=table,
        slope_small_gamma=branch_slope(g <= 0.5),
        slope_large_gamma=branch_slope(g >= 2.0),
        lambda_bar=lam_bar,
        row_errors=row_errors,
    )
