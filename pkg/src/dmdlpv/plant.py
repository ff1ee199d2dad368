"""Ground-truth simulator for a parametric advection-diffusion rod.

The PDE  dT/dt = k(p) T'' - w T'  on (0, 1) is discretized with central
finite differences on a uniform grid of spacing ``h``. The left boundary
temperature is the control input u(t); the right boundary is zero-flux
(Neumann), closed by identifying the ghost point with the last state.
Time integration is classic 4th-order Runge-Kutta with the input and
parameters held constant over each sample interval.

The resulting state equation is affine for frozen parameters:

    dT/dt = (A0 + k(p)/h^2 D2) T + (B0 + k(p)/h^2 e1) u

with A0 = -(w/2h) D1 and B0 = (w/2h) e1. D1 is the antisymmetric-interior
first-difference stencil, D2 the (1, -2, 1) second-difference stencil;
both carry the Neumann closure in their last row.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

# Diffusion-gain polynomial of the default single-parameter plant,
# constant term first: k(p) = 0.1 + 0.05 p + 0.01 p^2 + 0.03 p^3.
DEFAULT_POLY_GAIN = (0.1, 0.05, 0.01, 0.03)


class DivergedSimulation(RuntimeError):
    """Raised when integration produced NaN/Inf; carries the sample index."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"simulation diverged at sample {step}")


@dataclass(frozen=True)
class GainFunction:
    """Diffusion gain k as a function of the parameter vector.

    Kinds: ``polynomial-1p`` (coefficients, constant first), ``rational-2p``
    (p1 p2 / (p1 + p2 + 1)^2) and ``custom`` (user callable). Parameters are
    expected inside ``domain`` per coordinate.
    """

    kind: str
    coefficients: tuple[float, ...] = DEFAULT_POLY_GAIN
    fn: Callable[[np.ndarray], float] | None = None
    n_params: int = 1
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.kind not in ("polynomial-1p", "rational-2p", "custom"):
            raise ValueError(f"unknown gain kind {self.kind!r}")
        if self.kind == "rational-2p":
            object.__setattr__(self, "n_params", 2)
        if self.kind == "custom" and self.fn is None:
            raise ValueError("custom gain requires a callable")


def polynomial_gain(coefficients=DEFAULT_POLY_GAIN) -> GainFunction:
    return GainFunction(kind="polynomial-1p", coefficients=tuple(coefficients))


def rational_gain() -> GainFunction:
    return GainFunction(kind="rational-2p")


def eval_gain(gain: GainFunction, theta, domain_check: str = "error") -> float:
    """Evaluate the diffusion gain at one parameter vector.

    ``domain_check`` is one of "error", "warn", "ignore" for parameters
    outside the declared domain.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if theta.size != gain.n_params:
        raise ValueError(f"gain expects {gain.n_params} parameters, got {theta.size}")
    lo, hi = gain.domain
    if domain_check != "ignore" and (np.any(theta < lo) or np.any(theta > hi)):
        msg = f"parameter {theta} outside gain domain [{lo}, {hi}]"
        if domain_check == "error":
            raise ValueError(msg)
        import warnings

        warnings.warn(msg, UserWarning, stacklevel=2)

    if gain.kind == "polynomial-1p":
        return float(np.polyval(gain.coefficients[::-1], theta[0]))
    if gain.kind == "rational-2p":
        p1, p2 = theta
        return float(p1 * p2 / (p1 + p2 + 1.0) ** 2)
    return float(gain.fn(theta))


@dataclass
class DiffusionPlant:
    """Finite-difference plant: stencil matrices plus grid/step metadata."""

    h: float
    n_states: int
    advection_w: float
    gain: GainFunction
    D1: np.ndarray
    D2: np.ndarray
    b_template: np.ndarray
    dt: float
    sample_time: float

    @property
    def n_params(self) -> int:
        return self.gain.n_params

    def grid(self) -> np.ndarray:
        """Physical coordinates of the interior grid points."""
        return (np.arange(self.n_states) + 1) * self.h


@dataclass
class Trajectory:
    """Sampled simulation record: states include the initial column."""

    states: np.ndarray  # n_states x (N_t + 1)
    inputs: np.ndarray  # length N_t
    params: np.ndarray  # n_params x N_t
    sample_time: float

    def __post_init__(self):
        self.inputs = np.atleast_1d(np.asarray(self.inputs, dtype=float))
        self.params = np.atleast_2d(np.asarray(self.params, dtype=float))
        n_t = self.inputs.size
        if self.states.shape[1] != n_t + 1 or self.params.shape[1] != n_t:
            raise ValueError("inconsistent trajectory column counts")

    @property
    def n_samples(self) -> int:
        return self.inputs.size

    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[1]) * self.sample_time


def build_plant(
    h: float,
    w: float = 0.1,
    gain: GainFunction | None = None,
    dt: float = 1e-3,
    sample_time: float = 1e-3,
) -> DiffusionPlant:
    """Assemble the finite-difference plant for grid spacing ``h``."""
    if not 0 < h < 1:
        raise ValueError(f"grid spacing must satisfy 0 < h < 1, got {h}")
    n = int(np.ceil(1.0 / h)) - 1
    if n < 2:
        raise ValueError(f"h = {h} yields {n} states; need at least 2")
    if dt > sample_time:
        raise ValueError("integrator step dt must not exceed sample_time")
    n_sub = sample_time / dt
    if abs(n_sub - round(n_sub)) > 1e-9:
        raise ValueError("dt must divide sample_time")
    if gain is None:
        gain = polynomial_gain()

    D1 = np.zeros((n, n))
    D2 = np.zeros((n, n))
    for i in range(n):
        if i > 0:
            D1[i, i - 1] = -1.0
            D2[i, i - 1] = 1.0
        if i < n - 1:
            D1[i, i + 1] = 1.0
            D2[i, i + 1] = 1.0
        D2[i, i] = -2.0
    # Neumann closure: ghost point equals the last state
    D1[n - 1, n - 1] = 1.0
    D2[n - 1, n - 1] = -1.0

    e1 = np.zeros(n)
    e1[0] = 1.0
    return DiffusionPlant(
        h=h, n_states=n, advection_w=w, gain=gain,
        D1=D1, D2=D2, b_template=e1, dt=dt, sample_time=sample_time,
    )


def probe_index(plant: DiffusionPlant, x: float) -> int:
    """Grid index whose physical coordinate is nearest to ``x``."""
    return int(np.clip(round(x / plant.h) - 1, 0, plant.n_states - 1))


def system_matrices(plant: DiffusionPlant, theta) -> tuple[np.ndarray, np.ndarray]:
    """Continuous-time affine pair (M, c) with dT/dt = M T + c u at frozen theta."""
    k = eval_gain(plant.gain, theta, domain_check="ignore")
    scale = k / plant.h ** 2
    adv = plant.advection_w / (2.0 * plant.h)
    M = -adv * plant.D1 + scale * plant.D2
    c = (adv + scale) * plant.b_template
    return M, c


def rhs(plant: DiffusionPlant, T: np.ndarray, u: float, theta) -> np.ndarray:
    """State derivative (A0 + A(theta)) T + (B0 + B(theta)) u."""
    T = np.asarray(T, dtype=float)
    if T.shape != (plant.n_states,):
        raise ValueError(f"state has shape {T.shape}, expected ({plant.n_states},)")
    M, c = system_matrices(plant, theta)
    return M @ T + c * u


def rk4_step(plant: DiffusionPlant, T: np.ndarray, u: float, theta,
             dt: float | None = None) -> np.ndarray:
    """One classic RK4 substep with u and theta held constant."""
    if dt is None:
        dt = plant.dt
    k1 = rhs(plant, T, u, theta)
    k2 = rhs(plant, T + 0.5 * dt * k1, u, theta)
    k3 = rhs(plant, T + 0.5 * dt * k2, u, theta)
    k4 = rhs(plant, T + dt * k3, u, theta)
    return T + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def discrete_pair(plant: DiffusionPlant, theta) -> tuple[np.ndarray, np.ndarray]:
    """Exact one-sample linear map (F, g): T[k+1] = F T[k] + g u[k].

    Because the frozen-parameter dynamics are affine, the RK4 substeps
    compose into an exactly linear map per sample; F is the degree-4
    truncation of the matrix exponential of dt*M, iterated over the
    substeps in a sample interval.
    """
    M, c = system_matrices(plant, theta)
    n = plant.n_states
    eye = np.eye(n)
    Mdt = plant.dt * M
    # RK4 propagator over one substep and its input-accumulation companion
    F_dt = eye + Mdt @ (eye + Mdt @ (eye / 2 + Mdt @ (eye / 6 + Mdt / 24)))
    g_dt = plant.dt * (eye + Mdt @ (eye / 2 + Mdt @ (eye / 6 + Mdt / 24))) @ c

    n_sub = int(round(plant.sample_time / plant.dt))
    if n_sub == 1:
        return F_dt, g_dt
    F = np.linalg.matrix_power(F_dt, n_sub)
    g = g_dt.copy()
    v = g_dt
    for _ in range(n_sub - 1):
        v = F_dt @ v
        g += v
    return F, g


def simulate(plant: DiffusionPlant, x0: np.ndarray, u_traj: np.ndarray,
             p_traj: np.ndarray) -> Trajectory:
    """Integrate the plant under zero-order-held excitation.

    One state column is recorded per sample interval; u and theta are held
    constant within each interval, so the per-sample map reduces to the
    cached linear RK4 propagator for the active parameter value.
    """
    u_traj = np.atleast_1d(np.asarray(u_traj, dtype=float))
    p_traj = np.atleast_2d(np.asarray(p_traj, dtype=float))
    n_t = u_traj.size
    if p_traj.shape != (plant.n_params, n_t):
        raise ValueError(
            f"parameter trajectory has shape {p_traj.shape}, expected "
            f"({plant.n_params}, {n_t})"
        )
    x = np.zeros(plant.n_states) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (plant.n_states,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({plant.n_states},)")

    states = np.empty((plant.n_states, n_t + 1))
    states[:, 0] = x
    cache: dict[bytes, tuple[np.ndarray, np.ndarray]] = {}
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_t):
            key = p_traj[:, k].tobytes()
            pair = cache.get(key)
            if pair is None:
                pair = discrete_pair(plant, p_traj[:, k])
                cache[key] = pair
            F, g = pair
            x = F @ x + g * u_traj[k]
            if not np.all(np.isfinite(x)):
                raise DivergedSimulation(k)
            states[:, k + 1] = x
    return Trajectory(states=states, inputs=u_traj, params=p_traj,
                      sample_time=plant.sample_time)


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as a CSV table (t, u, p..., T_1...T_n).

    The final row holds the last recorded state; its u/p cells repeat the
    last held values so the table stays rectangular.
    """
    n_p = traj.params.shape[0]
    header = ["t", "u"] + [f"p{i + 1}" for i in range(n_p)] \
        + [f"T_{i + 1}" for i in range(traj.states.shape[0])]
    times = traj.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(traj.states.shape[1]):
            kk = min(k, traj.n_samples - 1)
            row = [repr(float(times[k])), repr(float(traj.inputs[kk]))]
            row += [repr(float(v)) for v in traj.params[:, kk]]
            row += [repr(float(v)) for v in traj.states[:, k]]
            writer.writerow(row)


def load_trajectory_csv(path) -> Trajectory:
    """Inverse of :func:`save_trajectory_csv` (lossless, full double precision)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows)
    n_p = sum(1 for name in header if name.startswith("p"))
    t = data[:, 0]
    sample_time = t[1] - t[0] if len(t) > 1 else 1.0
    return Trajectory(
        states=data[:, 2 + n_p:].T,
        inputs=data[:-1, 1],
        params=data[:-1, 2:2 + n_p].T,
        sample_time=float(sample_time),
    )
