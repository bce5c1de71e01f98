"""
Class and Instance Parameters

CLASS GENERATION:
- mean edge delay per directed edge ~ U(0, delay_max)

INSTANCE GENERATION (manufacturing variation sigma, in units of tau_mean):
- tau_n    ~ N(tau_mean, (sigma * tau_mean)^2), redrawn until positive
  (nodes with tau below dt raise a RuntimeWarning)
- delay_nm ~ |N(mean_delay_nm, (sigma * tau_mean)^2)|, then quantized to dt

All times are in ns. Draws are standard normals scaled by sigma, so changing
sigma with the same streams moves every instance continuously.
"""

import warnings
from dataclasses import asdict, dataclass, fields, replace
from typing import Dict, Tuple

import numpy as np

from src.errors import ConfigError, GenerationError, ParameterError
from src.network.topology import Topology, validate


MAX_TAU_RESAMPLES = 1000
PAIR_NORM_MODES = ('pair-count', 'paper-literal')
NODE_FUNCTIONS = ('xor', 'xnor')

# Ratios within this distance of an integer count as exact multiples of dt
_GRID_TOLERANCE = 1e-9


def _grid_steps(value: float, dt: float) -> float:
    return round(value / dt, 9)


def _is_multiple(value: float, dt: float) -> bool:
    ratio = value / dt
    return abs(ratio - round(ratio)) <= _GRID_TOLERANCE * max(1.0, abs(ratio))


@dataclass(frozen=True)
class SimConfig:
    """Simulation parameters; defaults describe a 256-node FPGA-scale network"""

    tau_mean: float = 0.25
    dt: float = 0.01
    t_int: float = 10.5
    sigma: float = 0.05
    epsilon: float = 0.01
    delay_max: float = 2.5
    sample_interval: float = 0.5
    discard: float = 0.5
    n_classes: int = 15
    n_instances: int = 8
    n_challenges: int = 1000
    n_repeats: int = 100
    n_nodes: int = 256
    degree: int = 3
    master_seed: int = 0
    pair_norm_mode: str = 'pair-count'
    node_function: str = 'xor'
    exclude_fixed_point_challenges: bool = False

    def validate(self) -> 'SimConfig':
        """
        Check every invariant, raising ConfigError naming the first bad field

        Returns:
            self, so calls can be chained
        """
        if not self.dt > 0:
            raise ConfigError('dt', f"must be positive, got {self.dt}")
        if not self.tau_mean > 0:
            raise ConfigError('tau_mean', f"must be positive, got {self.tau_mean}")

        for name in ('t_int', 'delay_max', 'sample_interval', 'discard'):
            value = getattr(self, name)
            if name == 'delay_max' and value == 0:
                continue
            if not value > 0:
                raise ConfigError(name, f"must be positive, got {value}")
            if not _is_multiple(value, self.dt):
                raise ConfigError(name, f"{value} is not a multiple of dt={self.dt}")

        if self.sigma < 0:
            raise ConfigError('sigma', f"must be non-negative, got {self.sigma}")
        if self.epsilon < 0:
            raise ConfigError('epsilon', f"must be non-negative, got {self.epsilon}")

        for name in ('n_classes', 'n_instances', 'n_challenges', 'n_repeats', 'n_nodes', 'degree'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
                raise ConfigError(name, f"must be an integer >= 1, got {value!r}")

        if not isinstance(self.master_seed, (int, np.integer)) or self.master_seed < 0:
            raise ConfigError('master_seed', f"must be a non-negative integer, got {self.master_seed!r}")
        if self.pair_norm_mode not in PAIR_NORM_MODES:
            raise ConfigError('pair_norm_mode', f"must be one of {PAIR_NORM_MODES}, got {self.pair_norm_mode!r}")
        if self.node_function not in NODE_FUNCTIONS:
            raise ConfigError('node_function', f"must be one of {NODE_FUNCTIONS}, got {self.node_function!r}")
        if self.n_samples < 1:
            raise ConfigError('t_int', "t_int - discard leaves no sample times")
        return self

    @property
    def n_steps(self) -> int:
        """Euler steps covering t_int"""
        return int(_grid_steps(self.t_int, self.dt))

    @property
    def n_samples(self) -> int:
        """T, the number of kept response registers"""
        ratio = (self.t_int - self.discard) / self.sample_interval
        return int(np.floor(ratio + _GRID_TOLERANCE))

    def sample_steps(self) -> np.ndarray:
        """Step indices of the kept samples (discard + k * interval, k = 1..T)"""
        times = self.discard + self.sample_interval * np.arange(1, self.n_samples + 1)
        return np.round(times / self.dt).astype(np.int64)

    def sample_times(self) -> np.ndarray:
        """Experiment-relative sample times in ns (interval, 2*interval, ...)"""
        return self.sample_interval * np.arange(1, self.n_samples + 1)

    def with_overrides(self, **changes) -> 'SimConfig':
        """Copy with some fields replaced"""
        return replace(self, **changes)

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'SimConfig':
        """
        Build and validate a config from a mapping

        Unknown keys raise ConfigError so typos never pass silently.
        """
        known = {f.name: f for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown simulation parameter")

        kwargs = {}
        for key, value in data.items():
            default = known[key].default
            try:
                if isinstance(default, bool):
                    if not isinstance(value, bool):
                        raise TypeError
                    kwargs[key] = value
                elif isinstance(default, int):
                    if isinstance(value, bool) or float(value) != int(value):
                        raise TypeError
                    kwargs[key] = int(value)
                elif isinstance(default, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = str(value)
            except (TypeError, ValueError):
                raise ConfigError(key, f"bad value {value!r}")

        return cls(**kwargs).validate()


@dataclass(frozen=True, eq=False)
class ClassSpec:
    """A circuit netlist: topology plus class-level mean parameters"""

    topology: Topology
    mean_delay: np.ndarray          # (N, k), aligned with topology.pred_array()
    tau_mean: float
    node_function: Tuple[str, ...]  # one entry per node
    class_index: int = 0

    @property
    def invert(self) -> np.ndarray:
        """1 for XNOR nodes, 0 for XOR nodes"""
        return np.array([f == 'xnor' for f in self.node_function], dtype=np.uint8)

    def to_dict(self) -> Dict:
        return {
            'class_index': self.class_index,
            'topology': self.topology.to_dict(),
            'mean_delay_ns': np.asarray(self.mean_delay).tolist(),
            'tau_mean': self.tau_mean,
            'node_function': list(self.node_function)
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ClassSpec':
        return cls(
            topology=Topology.from_dict(data['topology']),
            mean_delay=np.asarray(data['mean_delay_ns'], dtype=np.float64),
            tau_mean=float(data['tau_mean']),
            node_function=tuple(data['node_function']),
            class_index=int(data['class_index'])
        )


@dataclass(frozen=True, eq=False)
class InstanceParams:
    """One chip: exact time constants and quantized edge delays"""

    class_spec: ClassSpec
    tau: np.ndarray          # (N,) ns
    delay_steps: np.ndarray  # (N, k) non-negative integers
    instance_index: int = 0

    @property
    def class_index(self) -> int:
        return self.class_spec.class_index


def quantize_delay(delay, dt: float):
    """
    Round delays to the nearest multiple of dt, ties away from zero

    Works on scalars (returns int) and arrays (returns int64 array).

    Example:
        quantize_delay(0.025, 0.01)  # -> 3
        quantize_delay(2.5, 0.01)    # -> 250
    """
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    values = np.asarray(delay, dtype=np.float64)
    if np.any(values < 0) or np.any(~np.isfinite(values)):
        raise ParameterError(f"delays must be finite and non-negative, got {delay}")

    steps = np.floor(np.round(values / dt, 9) + 0.5).astype(np.int64)
    if steps.ndim == 0:
        return int(steps)
    return steps


def sample_class(
    topology: Topology,
    cfg: SimConfig,
    stream: np.random.Generator,
    class_index: int = 0
) -> ClassSpec:
    """
    Draw the class-level mean delays of one netlist

    Args:
        topology: Valid regular topology
        cfg: Simulation config (uses delay_max, tau_mean, node_function)
        stream: Keyed 'class-delay' stream
        class_index: Class label s

    Returns:
        ClassSpec with mean_delay ~ U(0, delay_max) per directed edge
    """
    problems = validate(topology)
    if problems:
        raise ParameterError(f"invalid topology: {'; '.join(problems)}")

    shape = (topology.n_nodes, topology.degree)
    mean_delay = stream.uniform(0.0, cfg.delay_max, size=shape)

    return ClassSpec(
        topology=topology,
        mean_delay=mean_delay,
        tau_mean=cfg.tau_mean,
        node_function=(cfg.node_function,) * topology.n_nodes,
        class_index=class_index
    )


def _positive_taus(
    tau_mean: float,
    scale: float,
    n_nodes: int,
    stream: np.random.Generator
) -> np.ndarray:
    tau = tau_mean + scale * stream.standard_normal(n_nodes)
    for n in np.flatnonzero(tau <= 0):
        for _ in range(MAX_TAU_RESAMPLES):
            tau[n] = tau_mean + scale * stream.standard_normal()
            if tau[n] > 0:
                break
        else:
            raise GenerationError(
                f"tau of node {n} stayed non-positive after {MAX_TAU_RESAMPLES} draws"
            )
    return tau


def sample_instance(
    cls: ClassSpec,
    cfg: SimConfig,
    tau_stream: np.random.Generator,
    delay_stream: np.random.Generator,
    instance_index: int = 0
) -> InstanceParams:
    """
    Perturb a class into one instance (one physical chip)

    Args:
        cls: Class to perturb
        cfg: Simulation config (uses sigma, dt)
        tau_stream: Keyed 'inst-tau' stream
        delay_stream: Keyed 'inst-delay' stream
        instance_index: Instance label i

    Returns:
        InstanceParams with positive tau and quantized delays

    Example:
        inst = sample_instance(cls, cfg,
                               make_stream(seed, 'inst-tau', s, i),
                               make_stream(seed, 'inst-delay', s, i), i)
    """
    scale = cfg.sigma * cls.tau_mean
    n_nodes = cls.topology.n_nodes

    tau = _positive_taus(cls.tau_mean, scale, n_nodes, tau_stream)
    fast = int(np.count_nonzero(cfg.dt > tau))
    if fast:
        warnings.warn(
            f"{fast} node(s) have tau below dt = {cfg.dt} ns; the Euler update overshoots there",
            RuntimeWarning
        )

    mean_delay = np.asarray(cls.mean_delay, dtype=np.float64)
    delays = np.abs(mean_delay + scale * delay_stream.standard_normal(mean_delay.shape))

    return InstanceParams(
        class_spec=cls,
        tau=tau,
        delay_steps=quantize_delay(delays, cfg.dt),
        instance_index=instance_index
    )
