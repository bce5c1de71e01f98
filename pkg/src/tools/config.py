"""
Experiment Configuration

JSON layout:
    {
      "simulation": { ...SimConfig fields... },
      "outputs":    {"dataset": "...", "stats": "...", "sweep": "...", "fit": "..."},
      "sweeps":     [{"knob": "sigma", "values": [...], "eval_time_ns": 6.0}],
      "compare":    {"a": "...", "b": "...", "statistic": "mu_inter"},
      "threads":    null
    }

Every section is optional; missing simulation fields take the SimConfig
defaults. HBN_THREADS (read from the environment or a .env file) sets the
default worker count when "threads" is null.
"""

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

from dotenv import load_dotenv

from src.analysis.statistics import SWEEP_KNOBS
from src.errors import ConfigError
from src.network.parameters import SimConfig


load_dotenv()

SECTIONS = ('simulation', 'outputs', 'sweeps', 'compare', 'threads')
OUTPUT_KEYS = ('dataset', 'stats', 'sweep', 'fit', 'compare')
COMPARE_STATISTICS = ('mu_inter', 'mu_intra', 'delta_mu')
DEFAULT_EVAL_TIME_NS = 6.0


def default_threads() -> int:
    """Worker count from HBN_THREADS, else 1"""
    raw = os.getenv('HBN_THREADS')
    if raw is None or raw.strip() == '':
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError('HBN_THREADS', f"must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigError('HBN_THREADS', f"must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class SweepSpec:
    """One knob sweep read at a fixed time"""

    knob: str
    values: tuple
    eval_time_ns: float = DEFAULT_EVAL_TIME_NS

    @classmethod
    def from_dict(cls, data: Dict) -> 'SweepSpec':
        unknown = set(data) - {'knob', 'values', 'eval_time_ns'}
        if unknown:
            raise ConfigError(f"sweeps.{sorted(unknown)[0]}", "unknown sweep key")
        knob = data.get('knob')
        if knob not in SWEEP_KNOBS:
            raise ConfigError('sweeps.knob', f"must be one of {SWEEP_KNOBS}, got {knob!r}")
        try:
            values = tuple(float(v) for v in data.get('values', []))
        except (TypeError, ValueError):
            raise ConfigError('sweeps.values', "must be a list of numbers")
        if not values:
            raise ConfigError('sweeps.values', "must not be empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError('sweeps.values', "must be strictly increasing")
        if any(v < 0 for v in values):
            raise ConfigError('sweeps.values', "must be non-negative")
        return cls(knob=knob, values=values, eval_time_ns=float(data.get('eval_time_ns', DEFAULT_EVAL_TIME_NS)))

    def to_dict(self) -> Dict:
        return {'knob': self.knob, 'values': list(self.values), 'eval_time_ns': self.eval_time_ns}


@dataclass(frozen=True)
class ExperimentConfig:
    """SimConfig plus output paths, sweeps, comparison inputs and thread override"""

    sim: SimConfig = field(default_factory=SimConfig)
    outputs: Dict[str, str] = field(default_factory=dict)
    sweeps: List[SweepSpec] = field(default_factory=list)
    compare: Dict[str, str] = field(default_factory=dict)
    threads: Optional[int] = None

    @property
    def n_workers(self) -> int:
        """Configured thread count, falling back to HBN_THREADS"""
        return self.threads if self.threads is not None else default_threads()

    def output_path(self, key: str) -> str:
        path = self.outputs.get(key)
        if not path:
            raise ConfigError(f"outputs.{key}", "path is required for this command")
        return path

    def to_dict(self) -> Dict:
        return {
            'simulation': self.sim.to_dict(),
            'outputs': dict(self.outputs),
            'sweeps': [s.to_dict() for s in self.sweeps],
            'compare': dict(self.compare),
            'threads': self.threads
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'ExperimentConfig':
        """
        Validate and build an experiment config

        Raises:
            ConfigError naming the offending key
        """
        if not isinstance(data, dict):
            raise ConfigError('<root>', "config must be a JSON object")
        for key in data:
            if key not in SECTIONS:
                raise ConfigError(key, "unknown config section")

        sim = SimConfig.from_dict(data.get('simulation') or {})

        outputs = data.get('outputs') or {}
        for key, value in outputs.items():
            if key not in OUTPUT_KEYS:
                raise ConfigError(f"outputs.{key}", "unknown output")
            if not isinstance(value, str) or not value:
                raise ConfigError(f"outputs.{key}", "path must be a non-empty string")

        sweeps = [SweepSpec.from_dict(s) for s in data.get('sweeps') or []]

        compare = data.get('compare') or {}
        for key, value in compare.items():
            if key not in ('a', 'b', 'statistic'):
                raise ConfigError(f"compare.{key}", "unknown compare key")
            if not isinstance(value, str) or not value:
                raise ConfigError(f"compare.{key}", "must be a non-empty string")
        if compare.get('statistic', 'mu_inter') not in COMPARE_STATISTICS:
            raise ConfigError('compare.statistic', f"must be one of {COMPARE_STATISTICS}")

        threads = data.get('threads')
        if threads is not None:
            if isinstance(threads, bool) or not isinstance(threads, int) or threads < 1:
                raise ConfigError('threads', f"must be a positive integer, got {threads!r}")

        return cls(sim=sim, outputs=dict(outputs), sweeps=sweeps, compare=dict(compare), threads=threads)

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)


def load_experiment_config(path) -> ExperimentConfig:
    """
    Read a JSON experiment config

    Example:
        exp = load_experiment_config('configs/desk.json')
        tensor = generate_dataset(exp.sim, n_workers=exp.n_workers)
    """
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError('<root>', f"invalid JSON at line {e.lineno}: {e.msg}")
    return ExperimentConfig.from_dict(data)
