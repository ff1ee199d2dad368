"""APRBS excitation signals and identification-dataset assembly.

All randomness flows through SplitMix64, a 64-bit counter generator with a
fixed public algorithm, so datasets regenerate bit-identically from their
seeds on any platform. Uniform floats come from the top 53 bits divided by
2^53.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .plant import DiffusionPlant, Trajectory, simulate

_MASK64 = (1 << 64) - 1

RNG_NAME = "splitmix64"


class SplitMix64:
    """SplitMix64 stream: state advances by the golden-gamma constant."""

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    def next_uint64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Uniform double in [0, 1): top 53 bits over 2^53."""
        return (self.next_uint64() >> 11) * 2.0 ** -53


def derive_seeds(master: int, n: int) -> list[int]:
    """n independent child seeds drawn from the master stream."""
    gen = SplitMix64(master)
    return [gen.next_uint64() for _ in range(n)]


@dataclass(frozen=True)
class AprbsConfig:
    """Amplitude-modulated pseudo-random binary (stair) signal settings."""

    amplitude_range: tuple[float, float]
    hold_steps: int
    horizon: int
    seed: int

    def __post_init__(self):
        lo, hi = self.amplitude_range
        if not lo < hi:
            raise ValueError(f"amplitude range must satisfy low < high, got {lo}, {hi}")
        if self.hold_steps < 1 or self.horizon < 1:
            raise ValueError("hold_steps and horizon must be positive")
        if self.hold_steps > self.horizon:
            raise ValueError("hold_steps must not exceed the horizon")


def aprbs(config: AprbsConfig) -> np.ndarray:
    """Piecewise-constant signal with uniform random levels.

    Every segment holds exactly ``hold_steps`` samples except a possibly
    truncated final segment; the horizon is never extended.
    """
    gen = SplitMix64(config.seed)
    lo, hi = config.amplitude_range
    n_seg = -(-config.horizon // config.hold_steps)  # ceil division
    levels = [lo + (hi - lo) * gen.uniform() for _ in range(n_seg)]
    signal = np.repeat(levels, config.hold_steps)
    return signal[: config.horizon]


@dataclass
class SnapshotDataset:
    """Time-aligned identification matrices.

    Columns of X are states at step k, U the inputs applied at k, Y the
    states at k+1 and P the parameter values active at k.
    """

    X: np.ndarray
    U: np.ndarray
    Y: np.ndarray
    P: np.ndarray
    sample_time: float

    def __post_init__(self):
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        n = self.X.shape[1]
        if not (self.U.shape[1] == self.Y.shape[1] == self.P.shape[1] == n):
            raise ValueError("X, U, Y, P must share one column count")
        if self.X.shape[0] != self.Y.shape[0]:
            raise ValueError("X and Y must share the state dimension")

    @property
    def n_states(self) -> int:
        return self.X.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.U.shape[0]

    @property
    def n_params(self) -> int:
        return self.P.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    def abs_max(self) -> float:
        return float(np.max(np.abs(self.X)))


@dataclass
class LocalDatasetBundle:
    """One frozen-parameter dataset per excitation point."""

    entries: list[tuple[np.ndarray, SnapshotDataset]] = field(default_factory=list)
    master_seed: int = 0

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def thetas(self) -> list[np.ndarray]:
        return [theta for theta, _ in self.entries]

    @property
    def datasets(self) -> list[SnapshotDataset]:
        return [ds for _, ds in self.entries]


def dataset_from_trajectory(traj: Trajectory) -> SnapshotDataset:
    """Shift a contiguous trajectory into (X, U, P) -> Y snapshot form."""
    return SnapshotDataset(
        X=traj.states[:, :-1],
        U=traj.inputs[None, :],
        Y=traj.states[:, 1:],
        P=traj.params,
        sample_time=traj.sample_time,
    )


def build_global_dataset(
    plant: DiffusionPlant,
    u_cfg: AprbsConfig,
    p_cfgs: AprbsConfig | list[AprbsConfig],
    x0: np.ndarray | None = None,
) -> SnapshotDataset:
    """Excite the plant jointly in input and parameters, from rest by default."""
    if isinstance(p_cfgs, AprbsConfig):
        p_cfgs = [p_cfgs]
    if len(p_cfgs) != plant.n_params:
        raise ValueError(
            f"need one parameter excitation per parameter ({plant.n_params}), "
            f"got {len(p_cfgs)}"
        )
    if any(cfg.horizon != u_cfg.horizon for cfg in p_cfgs):
        raise ValueError("all excitation configs must share one horizon")
    u = aprbs(u_cfg)
    p = np.vstack([aprbs(cfg) for cfg in p_cfgs])
    traj = simulate(plant, x0, u, p)
    return dataset_from_trajectory(traj)


def build_local_bundle(
    plant: DiffusionPlant,
    p_values,
    u_cfg: AprbsConfig,
    horizon_per_system: int | None = None,
) -> LocalDatasetBundle:
    """One frozen-parameter dataset per value in ``p_values``.

    Each system gets an input APRBS with its own seed derived from
    ``u_cfg.seed``; the parameter trajectory is constant throughout.
    """
    p_values = [np.atleast_1d(np.asarray(p, dtype=float)) for p in p_values]
    if not p_values:
        raise ValueError("p_values must be nonempty")
    horizon = horizon_per_system or u_cfg.horizon
    seeds = derive_seeds(u_cfg.seed, len(p_values))
    bundle = LocalDatasetBundle(master_seed=u_cfg.seed)
    for theta, seed in zip(p_values, seeds):
        cfg = AprbsConfig(
            amplitude_range=u_cfg.amplitude_range,
            hold_steps=u_cfg.hold_steps,
            horizon=horizon,
            seed=seed,
        )
        u = aprbs(cfg)
        p = np.tile(theta[:, None], (1, horizon))
        try:
            traj = simulate(plant, None, u, p)
        except Exception as exc:
            raise RuntimeError(f"frozen-parameter simulation failed at theta={theta}") from exc
        bundle.entries.append((theta, dataset_from_trajectory(traj)))
    return bundle
