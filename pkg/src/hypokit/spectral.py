"""Galerkin discretization of Langevin generators on the 1-D torus.

Position side: real trigonometric basis on [0, L),

    F_0 = 1,  F_{2k-1} = sqrt(2) cos(2 pi k q / L),  F_{2k} = sqrt(2) sin(2 pi k q / L),

with inner products taken against the unnormalized weight exp(-beta V(q))
(periodic trapezoid quadrature, spectrally accurate).  Momentum side: Hermite
functions h_n orthonormal under the Gaussian of variance m/beta, with exact
ladder actions

    d/dp h_n = sqrt(n beta / m) h_{n-1},     (-d/dp + beta p / m) h_n = sqrt((n+1) beta / m) h_{n+1}.

The Hamiltonian part of the generator is assembled in weak form through
integration by parts,

    <f, L_ham g> = (1/beta) (<d_p f, d_q g> - <d_q f, d_p g>),

which is exactly antisymmetric; the fluctuation-dissipation part acts
diagonally as -(n/m) on Hermite level n, exactly symmetric.  Eigen/singular
solvers run in a whitened coordinate frame (per-level congruence by
gram_q^{-1/2}, eigenvalue-filtered for near-singular Grams) with the constant
function deflated; congruences preserve the symmetries exactly.

Full-basis coefficient indexing is Hermite-major: index = n * (2 Kq + 1) + a.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import (
    IllConditionedBasisError,
    InvalidArgumentError,
    NumericalFailureError,
    UnsupportedDomainError,
)
from .model import EnsembleParams, PotentialSpec, Torus

Array = np.ndarray

DEFAULT_KQ = 16
DEFAULT_NP = 32
DEFAULT_NQUAD = 256
DEFAULT_RCOND = 1e-11


@dataclass(frozen=True, eq=False)
class BasisSet:
    """Tensor Fourier x Hermite basis with its quadrature and position Gram."""

    Kq: int
    Np: int
    L: float
    beta: float
    mass: float
    nodes: Array  # (n_quad,) uniform grid on [0, L)
    weights: Array  # (n_quad,) trapezoid weight h * exp(-beta V)
    F: Array  # (n_quad, 2Kq+1) basis values at the nodes
    D: Array  # (2Kq+1, 2Kq+1) differentiation matrix, F_j' = sum_c D[c, j] F_c
    gram_q: Array  # (2Kq+1, 2Kq+1) position Gram under the unnormalized weight

    @property
    def n_q(self) -> int:
        return 2 * self.Kq + 1

    @property
    def size(self) -> int:
        return self.n_q * self.Np

    @property
    def sigma_p(self) -> float:
        """Standard deviation of the momentum marginal."""
        return math.sqrt(self.mass / self.beta)

    @property
    def mass_nu(self) -> float:
        """Unnormalized configurational mass <1, 1> = integral of exp(-beta V)."""
        return float(self.gram_q[0, 0])


def build_basis(
    spec: PotentialSpec,
    params: EnsembleParams,
    Kq: int = DEFAULT_KQ,
    Np: int = DEFAULT_NP,
    n_quad: int = DEFAULT_NQUAD,
) -> BasisSet:
    """Quadrature, basis tables, differentiation matrix, and position Gram."""
    if not isinstance(spec.domain, Torus) or spec.domain.dim != 1:
        raise UnsupportedDomainError("spectral assembly requires a one-dimensional torus")
    if Kq < 1 or Np < 2:
        raise InvalidArgumentError(f"need Kq >= 1 and Np >= 2, got Kq={Kq}, Np={Np}")
    if n_quad < 8 * Kq:
        raise InvalidArgumentError(f"n_quad must be >= 8*Kq = {8 * Kq}, got {n_quad}")

    L = spec.domain.length
    h = L / n_quad
    nodes = np.arange(n_quad) * h
    v = spec.eval(nodes[:, None])
    if not np.all(np.isfinite(v)):
        raise NumericalFailureError("potential is not finite on the quadrature grid")
    weights = h * np.exp(-params.beta * v)
    if not np.all(np.isfinite(weights)):
        raise IllConditionedBasisError("quadrature weights overflow; rescale the potential")

    n_b = 2 * Kq + 1
    F = np.empty((n_quad, n_b))
    D = np.zeros((n_b, n_b))
    F[:, 0] = 1.0
    rt2 = math.sqrt(2.0)
    for k in range(1, Kq + 1):
        ang = (2.0 * math.pi * k / L) * nodes
        F[:, 2 * k - 1] = rt2 * np.cos(ang)
        F[:, 2 * k] = rt2 * np.sin(ang)
        w = 2.0 * math.pi * k / L
        D[2 * k, 2 * k - 1] = -w  # (cos)' = -w sin
        D[2 * k - 1, 2 * k] = w  # (sin)' =  w cos

    gram = F.T @ (weights[:, None] * F)
    gram = 0.5 * (gram + gram.T)
    return BasisSet(
        Kq=Kq, Np=Np, L=L, beta=params.beta, mass=params.mass,
        nodes=nodes, weights=weights, F=F, D=D, gram_q=gram,
    )


@dataclass(frozen=True, eq=False)
class GeneratorAssembly:
    """Galerkin matrices of the kinetic Langevin generator L_ham + gamma L_FD.

    l_ham and l_fd are coefficient actions (gram^{-1} times the weak forms);
    the weak forms themselves are gram @ l_ham (exactly antisymmetric) and
    gram @ l_fd (exactly symmetric negative semidefinite).  pi0 projects onto
    Hermite level 0, i.e. onto functions of the position only.
    """

    basis: BasisSet
    gamma: float
    gram: Array
    l_ham: Array
    l_fd: Array
    pi0: Array

    @property
    def size(self) -> int:
        return self.basis.size


def _cho_gram_q(basis: BasisSet):
    try:
        return sla.cho_factor(basis.gram_q)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedBasisError(
            "position Gram is not positive definite; increase n_quad or lower Kq"
        ) from exc


def assemble_generator(
    basis: BasisSet, spec: PotentialSpec, params: EnsembleParams
) -> GeneratorAssembly:
    """Assemble the full tensor-basis generator matrices for one gamma."""
    if (params.beta, params.mass) != (basis.beta, basis.mass):
        raise InvalidArgumentError("params.beta/mass must match the values the basis was built with")
    if not isinstance(spec.domain, Torus) or spec.domain.length != basis.L:
        raise InvalidArgumentError("potential domain does not match the basis torus")

    n_q, n_p = basis.n_q, basis.Np
    n = n_q * n_p
    cho = _cho_gram_q(basis)
    # Coefficient action of L_ham: level n couples to n -/+ 1 with
    #   down block  s_n * D              (the p d_q transport term)
    #   up block   -s_{n+1} * Gq^{-1} D^T Gq   (the adjoint through the measure)
    up_base = -sla.cho_solve(cho, basis.D.T @ basis.gram_q)
    l_ham = np.zeros((n, n))
    for m in range(1, n_p):
        s = math.sqrt(m / (basis.beta * basis.mass))
        rows = slice(m * n_q, (m + 1) * n_q)
        below = slice((m - 1) * n_q, m * n_q)
        l_ham[rows, below] = s * basis.D
        l_ham[below, rows] = s * up_base

    level = np.repeat(np.arange(n_p), n_q)
    l_fd = np.diag(-(level / basis.mass))
    pi0 = np.zeros((n, n))
    pi0[:n_q, :n_q] = np.eye(n_q)
    gram = np.kron(np.eye(n_p), basis.gram_q)
    return GeneratorAssembly(
        basis=basis, gamma=params.gamma, gram=gram, l_ham=l_ham, l_fd=l_fd, pi0=pi0
    )


# ---------------------------------------------------------------------------
# whitened, constant-deflated frame


@dataclass(frozen=True, eq=False)
class ReducedGenerator:
    """Generator compressed to an orthonormal basis of span \\ constants.

    Coordinates are orthonormal for the (unnormalized) gram inner product, so
    all gram-weighted norms are Euclidean here.  `ham` is exactly
    antisymmetric, `fd` symmetric negative semidefinite, `pi0` an orthogonal
    projector.  The full generator at friction gamma acts as ham + gamma*fd.
    """

    ham: Array
    fd: Array
    pi0: Array
    wq: Array  # (n_q, r) per-level whitener, wq^T gram_q wq = I
    gq_w: Array  # (r, n_q) = wq^T gram_q, coordinates of the gram projection
    qmat: Array  # (n_p * r, dim) orthonormal deflation basis
    mass_nu: float
    n_p: int

    @property
    def dim(self) -> int:
        return self.qmat.shape[1]

    def operator(self, gamma: float) -> Array:
        return self.ham + gamma * self.fd

    def to_reduced(self, coeffs: Array) -> Array:
        """Gram-orthogonal projection of a full coefficient vector (drops constants)."""
        x = np.asarray(coeffs, dtype=float).reshape(self.n_p, -1)
        z = (x @ self.gq_w.T).reshape(-1)
        return self.qmat.T @ z

    def to_full(self, z: Array) -> Array:
        blocks = (self.qmat @ z).reshape(self.n_p, -1)
        return (blocks @ self.wq.T).reshape(-1)


@lru_cache(maxsize=3)
def _reduced_cached(asm: GeneratorAssembly, rcond: float) -> ReducedGenerator:
    basis = asm.basis
    evals, vecs = sla.eigh(basis.gram_q)
    if evals[-1] <= 0:
        raise IllConditionedBasisError("position Gram is numerically singular")
    keep = evals > rcond * evals[-1]
    if not np.any(keep):
        raise IllConditionedBasisError("no Gram eigenvalue above the rcond cutoff")
    wq = vecs[:, keep] / np.sqrt(evals[keep])
    r = wq.shape[1]
    n_p = basis.Np

    # whitened Hamiltonian blocks: level n <-> n-1 coupling through c_t
    c_t = wq.T @ (basis.gram_q @ basis.D) @ wq
    a_ham = np.zeros((n_p * r, n_p * r))
    for m in range(1, n_p):
        s = math.sqrt(m / (basis.beta * basis.mass))
        rows = slice(m * r, (m + 1) * r)
        below = slice((m - 1) * r, m * r)
        a_ham[rows, below] = s * c_t
        a_ham[below, rows] = -s * c_t.T
    fd_diag = np.repeat(-np.arange(n_p) / basis.mass, r)

    # deflate the constant function (it lies in level 0)
    z_const = np.zeros(n_p * r)
    z_const[:r] = wq.T @ basis.gram_q[:, 0]
    z_const /= np.linalg.norm(z_const)
    qmat = sla.null_space(z_const[None, :])

    ham = qmat.T @ a_ham @ qmat
    ham = 0.5 * (ham - ham.T)
    fd = qmat.T @ (fd_diag[:, None] * qmat)
    fd = 0.5 * (fd + fd.T)
    pi0 = qmat[:r, :].T @ qmat[:r, :]
    return ReducedGenerator(
        ham=ham, fd=fd, pi0=pi0, wq=wq, gq_w=wq.T @ basis.gram_q,
        qmat=qmat, mass_nu=basis.mass_nu, n_p=n_p,
    )


def reduced_generator(asm: GeneratorAssembly, rcond: float | None = None) -> ReducedGenerator:
    """Whitened, constant-deflated view of an assembly (cached per assembly)."""
    return _reduced_cached(asm, DEFAULT_RCOND if rcond is None else float(rcond))


# ---------------------------------------------------------------------------
# eigen solvers


@dataclass(frozen=True)
class GapResult:
    gap: float
    eig_count_checked: int


def _gap_of_operator(op: Array) -> GapResult:
    try:
        eigs = sla.eigvals(-op)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("eigenvalue solver failed") from exc
    return GapResult(gap=float(eigs.real.min()), eig_count_checked=int(eigs.size))


def spectral_gap(asm: GeneratorAssembly, rcond: float | None = None) -> GapResult:
    """Smallest real part of the deflated spectrum of -(L_ham + gamma L_FD)."""
    red = reduced_generator(asm, rcond)
    return _gap_of_operator(red.operator(asm.gamma))


# ---------------------------------------------------------------------------
# overdamped generator on the position factor


class OverdampedOperator(NamedTuple):
    l_ovd: Array
    gram_q: Array


def assemble_overdamped(
    basis: BasisSet, spec: PotentialSpec, params: EnsembleParams
) -> OverdampedOperator:
    """Coefficient action of the overdamped generator -(1/beta) nabla* nabla."""
    if params.beta != basis.beta:
        raise InvalidArgumentError("params.beta must match the basis")
    if not isinstance(spec.domain, Torus) or spec.domain.length != basis.L:
        raise InvalidArgumentError("potential domain does not match the basis torus")
    a_form = -(1.0 / basis.beta) * (basis.D.T @ basis.gram_q @ basis.D)
    a_form = 0.5 * (a_form + a_form.T)
    cho = _cho_gram_q(basis)
    return OverdampedOperator(l_ovd=sla.cho_solve(cho, a_form), gram_q=basis.gram_q)


def _whiten_q(gram_q: Array, rcond: float) -> tuple[Array, Array]:
    """(wq, qmat): per-position whitener and constant-deflation basis."""
    evals, vecs = sla.eigh(gram_q)
    if evals[-1] <= 0:
        raise IllConditionedBasisError("position Gram is numerically singular")
    keep = evals > rcond * evals[-1]
    wq = vecs[:, keep] / np.sqrt(evals[keep])
    z_const = wq.T @ gram_q[:, 0]
    z_const /= np.linalg.norm(z_const)
    qmat = sla.null_space(z_const[None, :])
    return wq, qmat


def _overdamped_reduced(l_ovd: Array, gram_q: Array, rcond: float) -> Array:
    wq, qmat = _whiten_q(gram_q, rcond)
    a_form = gram_q @ l_ovd
    s = qmat.T @ (wq.T @ a_form @ wq) @ qmat
    return 0.5 * (s + s.T)


def poincare_constant(
    spec: PotentialSpec,
    params: EnsembleParams,
    Kq: int = DEFAULT_KQ,
    n_quad: int | None = None,
    rtol: float = 5e-3,
    max_rounds: int = 6,
    rcond: float | None = None,
) -> float:
    """Poincare constant of exp(-beta V): beta times the overdamped spectral gap.

    The basis size is refined by factors of 1.5 until the value changes by
    less than rtol; the refined value is returned.
    """
    rc = DEFAULT_RCOND if rcond is None else float(rcond)
    k = Kq
    prev = None
    for _ in range(max_rounds):
        nq = max(DEFAULT_NQUAD, 8 * k) if n_quad is None else max(n_quad, 8 * k)
        basis = build_basis(spec, params, Kq=k, Np=2, n_quad=nq)
        ovd = assemble_overdamped(basis, spec, params)
        s_red = _overdamped_reduced(ovd.l_ovd, ovd.gram_q, rc)
        gap = float(np.min(sla.eigvalsh(-s_red)))
        value = params.beta * gap
        if prev is not None and abs(value - prev) <= rtol * abs(value):
            return value
        prev = value
        k = int(math.ceil(1.5 * k))
    raise NumericalFailureError(
        f"Poincare constant did not stabilize to {rtol:g} within {max_rounds} refinements"
    )


@dataclass(frozen=True)
class DecayCheckResult:
    ok: bool
    max_ratio: float
    times: Array
    norms: Array
    bounds: Array


def semigroup_decay_check(
    l_ovd: Array,
    gram_q: Array,
    r_nu: float,
    times: Array,
    beta: float = 1.0,
    tol: float = 1e-8,
    rcond: float | None = None,
) -> DecayCheckResult:
    """Check ||exp(t L_ovd)|| <= exp(-r_nu t / beta) on mean-zero functions.

    Norms are gram-weighted operator norms of the matrix exponential on the
    constant-deflated space; the bound holds with prefactor exactly 1.
    """
    rc = DEFAULT_RCOND if rcond is None else float(rcond)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(times < 0):
        raise InvalidArgumentError("times must be a non-empty 1-D array of nonnegative values")
    s_red = _overdamped_reduced(np.asarray(l_ovd, float), np.asarray(gram_q, float), rc)
    norms = np.empty(times.size)
    for i, t in enumerate(times):
        norms[i] = sla.svdvals(sla.expm(t * s_red)).max()
    if not np.all(np.isfinite(norms)):
        raise NumericalFailureError("matrix exponential overflowed")
    bounds = np.exp(-r_nu * times / beta)
    ratios = norms / bounds
    return DecayCheckResult(
        ok=bool(np.all(ratios <= 1.0 + tol)),
        max_ratio=float(ratios.max()),
        times=times,
        norms=norms,
        bounds=bounds,
    )


# ---------------------------------------------------------------------------
# Poisson equation and asymptotic variance


@dataclass(frozen=True)
class PoissonResult:
    phi_coeffs: Array
    sigma2: float


def _sigma2_from_pair(z_sol: Array, z_rhs: Array, mass_nu: float) -> float:
    sigma2 = 2.0 * float(z_sol @ z_rhs) / mass_nu
    if sigma2 < 0:
        scale = 2.0 * float(np.linalg.norm(z_sol) * np.linalg.norm(z_rhs)) / mass_nu
        if sigma2 < -1e-10 * max(scale, 1.0):
            raise NumericalFailureError(f"asymptotic variance came out negative: {sigma2}")
        sigma2 = 0.0
    return sigma2


def solve_poisson(
    asm: GeneratorAssembly, phi_coeffs: Array, rcond: float | None = None
) -> PoissonResult:
    """Solve -(L_ham + gamma L_FD) Phi = (phi - mean phi) and report sigma^2.

    sigma^2 = 2 <Phi, phi - mean phi> under the normalized invariant measure.
    Returns the solution's full-basis coefficients (mean-zero representative).
    """
    red = reduced_generator(asm, rcond)
    z_rhs = red.to_reduced(phi_coeffs)
    try:
        z_sol = sla.solve(-red.operator(asm.gamma), z_rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("Poisson solve failed (singular operator)") from exc
    sigma2 = _sigma2_from_pair(z_sol, z_rhs, red.mass_nu)
    return PoissonResult(phi_coeffs=red.to_full(z_sol), sigma2=sigma2)


def solve_poisson_overdamped(
    ovd: OverdampedOperator, phi_q_coeffs: Array, rcond: float | None = None
) -> PoissonResult:
    """Overdamped counterpart of solve_poisson for position-only observables."""
    rc = DEFAULT_RCOND if rcond is None else float(rcond)
    wq, qmat = _whiten_q(ovd.gram_q, rc)
    s_red = _overdamped_reduced(ovd.l_ovd, ovd.gram_q, rc)
    z_rhs = qmat.T @ (wq.T @ (ovd.gram_q @ np.asarray(phi_q_coeffs, float)))
    try:
        z_sol = sla.solve(-s_red, z_rhs, assume_a="sym")
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("Poisson solve failed (singular operator)") from exc
    sigma2 = _sigma2_from_pair(z_sol, z_rhs, float(ovd.gram_q[0, 0]))
    return PoissonResult(phi_coeffs=wq @ (qmat @ z_sol), sigma2=sigma2)


# ---------------------------------------------------------------------------
# projections


def hermite_values(n_levels: int, x: Array) -> Array:
    """Orthonormal probabilists' Hermite functions h_0..h_{n_levels-1} at x."""
    x = np.asarray(x, dtype=float)
    out = np.empty((x.size, n_levels))
    out[:, 0] = 1.0
    if n_levels > 1:
        out[:, 1] = x
    for k in range(2, n_levels):
        out[:, k] = (x * out[:, k - 1] - math.sqrt(k - 1) * out[:, k - 2]) / math.sqrt(k)
    return out


def project_position_function(basis: BasisSet, f: Callable[[Array], Array]) -> Array:
    """Gram-orthogonal projection of f(q) onto the position basis, (2Kq+1,)."""
    vals = np.asarray(f(basis.nodes), dtype=float)
    if vals.shape != basis.nodes.shape:
        raise InvalidArgumentError("f must map the node array to an equal-shaped array")
    rhs = basis.F.T @ (basis.weights * vals)
    return sla.cho_solve(_cho_gram_q(basis), rhs)


def project_phase_function(
    basis: BasisSet, f: Callable[[Array, Array], Array], n_p_quad: int | None = None
) -> Array:
    """Gram-orthogonal projection of f(q, p) onto the tensor basis, (size,).

    f must broadcast over a (n_quad, 1) position array against a (1, n_gh)
    momentum array.  Momentum integrals use Gauss-Hermite quadrature with
    n_p_quad nodes (default Np + 8).
    """
    n_gh = basis.Np + 8 if n_p_quad is None else int(n_p_quad)
    x, w = np.polynomial.hermite_e.hermegauss(n_gh)
    w = w / math.sqrt(2.0 * math.pi)  # weights of the standard Gaussian measure
    p = basis.sigma_p * x
    vals = np.asarray(f(basis.nodes[:, None], p[None, :]), dtype=float)
    if vals.shape != (basis.nodes.size, n_gh):
        raise InvalidArgumentError("f must broadcast to shape (n_quad, n_p_quad)")
    h_tab = hermite_values(basis.Np, x)  # (n_gh, Np)
    t = vals @ (w[:, None] * h_tab)  # (n_quad, Np) momentum integrals
    rhs = basis.F.T @ (basis.weights[:, None] * t)  # (n_q, Np)
    cho = _cho_gram_q(basis)
    coeffs = sla.cho_solve(cho, rhs)  # (n_q, Np)
    return coeffs.T.reshape(-1)  # Hermite-major layout


def evaluate_coeffs(basis: BasisSet, coeffs: Array, q: Array, p: Array) -> Array:
    """Evaluate a coefficient vector at phase points (broadcast q against p)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    c = np.asarray(coeffs, dtype=float).reshape(basis.Np, basis.n_q)
    rt2 = math.sqrt(2.0)
    f_tab = np.empty(q.shape + (basis.n_q,))
    f_tab[..., 0] = 1.0
    for k in range(1, basis.Kq + 1):
        ang = (2.0 * math.pi * k / basis.L) * q
        f_tab[..., 2 * k - 1] = rt2 * np.cos(ang)
        f_tab[..., 2 * k] = rt2 * np.sin(ang)
    h_tab = hermite_values(basis.Np, np.ravel(p) / basis.sigma_p).reshape(p.shape + (basis.Np,))
    return np.einsum("...a,na,...n->...", f_tab, c, h_tab)
