"""Stochastic and Hamiltonian one-step integrators plus a trajectory driver.

Discretizations:

  * Langevin (kinetic): BAOAB splitting.  Half kick, half free flight, exact
    Ornstein-Uhlenbeck momentum refresh
        p <- c1 p + c2 xi,  c1 = exp(-gamma dt / m),
        c2 = sqrt((m/beta) (1 - c1^2)),
    half free flight, half kick.  One d-dimensional standard Gaussian vector
    is consumed per step.
  * Overdamped: Euler-Maruyama, q <- q - dt grad V + sqrt(2 dt / beta) xi.
  * Hamiltonian: velocity Verlet (kick-drift-kick), deterministic and
    time-reversible.

All steppers accept an optional `noise` array in place of an RngStream draw;
that hook is what makes single-step chains exactly reproducible against the
`simulate` driver and lets tests drive the maps with frozen noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .model import EnsembleParams, PhaseState, PotentialSpec

Array = np.ndarray

_NOISE_CHUNK = 16384  # steps of noise pre-drawn per block inside simulate

SCHEMES = ("langevin", "overdamped", "hamiltonian")


@dataclass
class RngStream:
    """Counter-based Gaussian stream: Philox keyed by (seed, stream_id).

    Uniform doubles come from numpy's Philox bit generator with key
    [seed mod 2^64, stream_id mod 2^64]; normals are produced by an explicit
    Box-Muller transform so the uniform->normal map is pinned by this module
    rather than by numpy's Generator internals.  For a request of n normals,
    k = ceil(n/2) pairs are formed from two consecutive blocks of k uniforms
    (u1 then u2, each drawn in one call):

        r = sqrt(-2 log(1 - u1)),  z[2i] = r cos(2 pi u2),  z[2i+1] = r sin(2 pi u2)

    and the first n values are returned in order.  Draw order is therefore a
    pure function of (seed, stream_id) and the sequence of request sizes.
    """

    seed: int
    stream_id: int = 0
    _uniforms: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        key = np.array([self.seed % 2**64, self.stream_id % 2**64], dtype=np.uint64)
        self._uniforms = np.random.Generator(np.random.Philox(key=key))

    def normal(self, shape=()) -> Array:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        n = int(np.prod(shape, dtype=int)) if shape else 1
        pairs = (n + 1) // 2
        u1 = self._uniforms.random(pairs)
        u2 = self._uniforms.random(pairs)
        r = np.sqrt(-2.0 * np.log1p(-u1))  # 1 - u1 in (0, 1], so log is finite
        theta = (2.0 * math.pi) * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        out = z[:n]
        return out.reshape(shape) if shape else out[0]


@dataclass(frozen=True)
class TrajectoryRecord:
    """Observable samples of one trajectory, recorded every `stride` steps."""

    times: Array
    observable_values: Array  # shape (n_records, n_observables)
    final_state: PhaseState
    dt: float
    stride: int

    @property
    def spacing(self) -> float:
        return self.dt * self.stride


def _ou_coefficients(params: EnsembleParams, dt: float) -> tuple[float, float]:
    c1 = math.exp(-params.gamma * dt / params.mass)
    c2 = math.sqrt((params.mass / params.beta) * (1.0 - c1 * c1))
    return c1, c2


def _check_step_args(params: EnsembleParams, dt: float, rng, noise, needs_gamma: bool) -> None:
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if needs_gamma and not params.gamma > 0:
        raise InvalidArgumentError("gamma must be positive for stochastic dynamics")
    if rng is None and noise is None:
        raise InvalidArgumentError("provide an RngStream or an explicit noise array")


def step_langevin(
    state: PhaseState,
    spec: PotentialSpec,
    params: EnsembleParams,
    dt: float,
    rng: RngStream | None = None,
    noise: Array | None = None,
) -> PhaseState:
    """One BAOAB step of kinetic Langevin dynamics."""
    _check_step_args(params, dt, rng, noise, needs_gamma=True)
    xi = np.asarray(noise, dtype=float) if noise is not None else rng.normal(state.q.shape)
    c1, c2 = _ou_coefficients(params, dt)
    half_dt = 0.5 * dt
    half_fl = 0.5 * dt / params.mass

    p = state.p - half_dt * spec.grad(state.q)
    q = state.q + half_fl * p
    p = c1 * p + c2 * xi
    q = q + half_fl * p
    q = spec.domain.wrap(q)
    p = p - half_dt * spec.grad(q)
    return PhaseState(q, p)


def step_overdamped(
    state: PhaseState,
    spec: PotentialSpec,
    params: EnsembleParams,
    dt: float,
    rng: RngStream | None = None,
    noise: Array | None = None,
) -> PhaseState:
    """One Euler-Maruyama step of overdamped Langevin dynamics (p untouched)."""
    _check_step_args(params, dt, rng, noise, needs_gamma=False)
    xi = np.asarray(noise, dtype=float) if noise is not None else rng.normal(state.q.shape)
    amp = math.sqrt(2.0 * dt / params.beta)
    q = state.q - dt * spec.grad(state.q) + amp * xi
    return PhaseState(spec.domain.wrap(q), state.p.copy())


def step_hamiltonian(
    state: PhaseState,
    spec: PotentialSpec,
    params: EnsembleParams,
    dt: float,
) -> PhaseState:
    """One velocity-Verlet step; deterministic, reversible under dt -> -dt."""
    if dt == 0:
        raise InvalidArgumentError("dt must be nonzero")
    half_dt = 0.5 * dt
    p = state.p - half_dt * spec.grad(state.q)
    q = spec.domain.wrap(state.q + (dt / params.mass) * p)
    p = p - half_dt * spec.grad(q)
    return PhaseState(q, p)


def simulate(
    init: PhaseState,
    n_steps: int,
    stride: int,
    dt: float,
    scheme: str,
    observables: Sequence[Callable[[PhaseState], float]],
    spec: PotentialSpec,
    params: EnsembleParams,
    rng: RngStream | None = None,
    noise: Array | None = None,
) -> TrajectoryRecord:
    """Run one trajectory, recording observables at step 0 and every `stride` steps.

    `noise`, if given, must have shape (n_steps, d) and replaces the rng draws
    (test hook; the stochastic schemes consume exactly one row per step).
    The Langevin path reuses the force from the trailing half kick as the next
    step's leading half kick, which is bitwise identical to calling
    step_langevin repeatedly with the same noise rows.
    """
    if scheme not in SCHEMES:
        raise InvalidArgumentError(f"unknown scheme '{scheme}'; options: {', '.join(SCHEMES)}")
    if n_steps < 1 or stride < 1:
        raise InvalidArgumentError("n_steps and stride must be >= 1")
    if not dt > 0:
        raise InvalidArgumentError(f"dt must be positive, got {dt}")
    if init.dim != spec.domain.dim:
        raise InvalidArgumentError("initial state dimension does not match the domain")
    stochastic = scheme != "hamiltonian"
    if stochastic and rng is None and noise is None:
        raise InvalidArgumentError("stochastic schemes need an RngStream or a noise array")
    if scheme == "langevin" and not params.gamma > 0:
        raise InvalidArgumentError("gamma must be positive for the langevin scheme")
    if noise is not None:
        noise = np.asarray(noise, dtype=float)
        if noise.shape != (n_steps, init.dim):
            raise InvalidArgumentError(f"noise must have shape ({n_steps}, {init.dim})")

    d = init.dim
    q = spec.domain.wrap(init.q.astype(float, copy=True))
    p = init.p.astype(float, copy=True)
    wrap = spec.domain.wrap
    grad = spec.grad

    n_records = n_steps // stride + 1
    values = np.empty((n_records, len(observables)))
    times = np.arange(n_records) * (stride * dt)

    def record(row: int) -> None:
        s = PhaseState(q.copy(), p.copy())
        for j, f in enumerate(observables):
            values[row, j] = f(s)

    record(0)
    row = 1

    def noise_blocks():
        if noise is not None:
            yield noise
            return
        done = 0
        while done < n_steps:
            k = min(_NOISE_CHUNK, n_steps - done)
            yield rng.normal((k, d))
            done += k

    step = 0
    if scheme == "langevin":
        c1, c2 = _ou_coefficients(params, dt)
        half_dt = 0.5 * dt
        half_fl = 0.5 * dt / params.mass
        g = grad(q)
        for block in noise_blocks():
            for i in range(block.shape[0]):
                p = p - half_dt * g
                q = q + half_fl * p
                p = c1 * p + c2 * block[i]
                q = q + half_fl * p
                q = wrap(q)
                g = grad(q)
                p = p - half_dt * g
                step += 1
                if step % stride == 0:
                    record(row)
                    row += 1
    elif scheme == "overdamped":
        amp = math.sqrt(2.0 * dt / params.beta)
        for block in noise_blocks():
            for i in range(block.shape[0]):
                q = wrap(q - dt * grad(q) + amp * block[i])
                step += 1
                if step % stride == 0:
                    record(row)
                    row += 1
    else:  # hamiltonian
        half_dt = 0.5 * dt
        g = grad(q)
        for step in range(1, n_steps + 1):
            p = p - half_dt * g
            q = wrap(q + (dt / params.mass) * p)
            g = grad(q)
            p = p - half_dt * g
            if step % stride == 0:
                record(row)
                row += 1

    return TrajectoryRecord(
        times=times,
        observable_values=values,
        final_state=PhaseState(q, p),
        dt=dt,
        stride=stride,
    )
