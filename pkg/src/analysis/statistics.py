"""
PUF Uniqueness and Reliability Statistics

STATISTICS (per class s and sample time t):
- mu_inter^s(t): mean pairwise distance across instances i, averaged over c, r, n
- mu_intra^s(t): mean pairwise distance across repeats r, averaged over i, c, n
- delta_mu^s(t) = mu_inter^s(t) - mu_intra^s(t)
- t_opt^s = earliest argmax of delta_mu^s(t)

PAIR NORMALIZATION:
- 'pair-count':    sum over j < j' divided by Nj (Nj - 1) / 2 (true pair mean)
- 'paper-literal': same sum divided by Nj (Nj + 1) / 2

For bits, the pair sum over j < j' equals ones * (Nj - ones), so every
statistic is an exact integer total divided once by an integer count.
"""

import warnings
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.stats import norm
from tqdm import tqdm

from src.ensemble import ResponseTensor, generate_dataset
from src.errors import ParameterError
from src.network.parameters import PAIR_NORM_MODES, SimConfig


# One-sided 99% critical value of the standard normal
Z_CRITICAL = 2.33
SWEEP_KNOBS = ('sigma', 'epsilon')
# Unpacked bits per statistics chunk (whole challenges, every instance)
STATS_CHUNK_BITS = 1 << 24


def _pair_denominator(n: int, mode: str) -> int:
    if mode == 'pair-count':
        return n * (n - 1) // 2
    if mode == 'paper-literal':
        return n * (n + 1) // 2
    raise ParameterError(f"mode must be one of {PAIR_NORM_MODES}, got {mode!r}")


def pairwise_mean_distance(values: Sequence[float], mode: str = 'pair-count') -> float:
    """
    Normalized sum of |X_j - X_j'| over unordered pairs j < j'

    Args:
        values: Two or more values (bits in practice)
        mode: 'pair-count' or 'paper-literal'

    Example:
        pairwise_mean_distance([0, 1])                   # -> 1.0
        pairwise_mean_distance([0, 1], 'paper-literal')  # -> 1/3
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 2:
        raise ParameterError(f"need at least 2 values, got {n}")
    denominator = _pair_denominator(n, mode)

    ordered = np.sort(values)
    # k-th smallest value appears with + sign k times and - sign (n - 1 - k) times
    weights = 2 * np.arange(n) - (n - 1)
    return float(np.dot(ordered, weights)) / denominator


def _pair_totals(bits: np.ndarray, axis: int, keep_axis: int) -> np.ndarray:
    """Integer sum of pair distances along `axis`, totalled over all but keep_axis"""
    n = bits.shape[axis]
    ones = bits.sum(axis=axis, dtype=np.int32)
    pair_sums = ones * (n - ones)
    keep = keep_axis if keep_axis < axis else keep_axis - 1
    other = tuple(a for a in range(pair_sums.ndim) if a != keep)
    return pair_sums.sum(axis=other, dtype=np.int64)


def _class_mean_distance(tensor: ResponseTensor, axis: int, mode: str) -> np.ndarray:
    """(N_s, T) mean pair distance along one axis of the class block (i=0, r=2)"""
    n_classes = tensor.dims[0]
    block_dims = tensor.dims[1:]
    n_pairs_axis = block_dims[axis]
    denominator = _pair_denominator(n_pairs_axis, mode)
    n_averaged = int(np.prod([d for a, d in enumerate(block_dims[:-1]) if a != axis]))

    n_challenges = block_dims[1]
    per_challenge = int(np.prod(block_dims, dtype=np.int64)) // n_challenges
    step = max(1, STATS_CHUNK_BITS // per_challenge)

    result = np.zeros((n_classes, block_dims[-1]))
    for s in range(n_classes):
        totals = np.zeros(block_dims[-1], dtype=np.int64)
        for c_start in range(0, n_challenges, step):
            c_stop = min(c_start + step, n_challenges)
            totals += _pair_totals(tensor.challenge_slice(s, c_start, c_stop), axis=axis, keep_axis=4)
        result[s] = totals / float(denominator * n_averaged)
    return result


def uniqueness(tensor: ResponseTensor, mode: str = 'pair-count') -> np.ndarray:
    """
    mu_inter^s(t): pair distance over instances, averaged over c, r, n

    Returns:
        (N_s, T) array
    """
    if tensor.dims[1] < 2:
        raise ParameterError(f"uniqueness needs at least 2 instances, got {tensor.dims[1]}")
    return _class_mean_distance(tensor, axis=0, mode=mode)


def reliability(tensor: ResponseTensor, mode: str = 'pair-count') -> np.ndarray:
    """
    mu_intra^s(t): pair distance over repeats, averaged over i, c, n

    Returns:
        (N_s, T) array
    """
    if tensor.dims[3] < 2:
        raise ParameterError(f"reliability needs at least 2 repeats, got {tensor.dims[3]}")
    return _class_mean_distance(tensor, axis=2, mode=mode)


# ==================== SERIES ====================

def _class_std(values: np.ndarray) -> np.ndarray:
    ddof = 1 if values.shape[0] > 1 else 0
    return values.std(axis=0, ddof=ddof)


@dataclass(eq=False)
class StatsSeries:
    """Per-class and ensemble mu(t) curves with optimal read-out times"""

    sample_times: np.ndarray                      # (T,) ns
    mu_inter: np.ndarray                          # (N_s, T)
    mu_intra: np.ndarray                          # (N_s, T)
    delta_mu: Optional[np.ndarray] = None         # (N_s, T)
    t_opt_index: Optional[np.ndarray] = None      # (N_s,)
    ensemble_t_opt_index: Optional[int] = None
    mode: str = 'pair-count'

    @property
    def n_classes(self) -> int:
        return self.mu_inter.shape[0]

    def ensemble(self) -> Dict[str, Dict[str, np.ndarray]]:
        """Class mean and class std of each statistic at every t"""
        out = {}
        for name in ('mu_inter', 'mu_intra', 'delta_mu'):
            values = getattr(self, name)
            if values is None:
                continue
            out[name] = {'mean': values.mean(axis=0), 'std': _class_std(values)}
        return out

    @property
    def t_opt(self) -> np.ndarray:
        """Per-class t_opt in ns"""
        return self.sample_times[self.t_opt_index]

    @property
    def ensemble_t_opt(self) -> float:
        return float(self.sample_times[self.ensemble_t_opt_index])

    def summary(self) -> Dict:
        """t_opt report: per class and ensemble, with the statistics at t_opt"""
        ens = self.ensemble()
        k = self.ensemble_t_opt_index
        return {
            'mode': self.mode,
            'classes': [
                {
                    'class': s,
                    't_opt_ns': float(self.sample_times[idx]),
                    'mu_inter': float(self.mu_inter[s, idx]),
                    'mu_intra': float(self.mu_intra[s, idx]),
                    'delta_mu': float(self.delta_mu[s, idx])
                }
                for s, idx in enumerate(self.t_opt_index)
            ],
            'ensemble': {
                't_opt_ns': self.ensemble_t_opt,
                'mu_inter': float(ens['mu_inter']['mean'][k]),
                'mu_intra': float(ens['mu_intra']['mean'][k]),
                'delta_mu': float(ens['delta_mu']['mean'][k])
            }
        }


def delta_and_topt(series: StatsSeries) -> StatsSeries:
    """
    Fill delta_mu and the optimal read-out times (ties go to the earliest time)

    Example:
        delta_mu [0.1, 0.4, 0.3] -> t_opt at the second sample time
    """
    delta = series.mu_inter - series.mu_intra
    # np.argmax returns the first maximum
    t_opt_index = np.argmax(delta, axis=1)
    ensemble_index = int(np.argmax(delta.mean(axis=0)))
    return replace(
        series,
        delta_mu=delta,
        t_opt_index=t_opt_index,
        ensemble_t_opt_index=ensemble_index
    )


def compute_stats(tensor: ResponseTensor, mode: str = 'pair-count') -> StatsSeries:
    """Uniqueness, reliability, delta_mu and t_opt of a response tensor"""
    series = StatsSeries(
        sample_times=np.asarray(tensor.sample_times, dtype=np.float64),
        mu_inter=uniqueness(tensor, mode),
        mu_intra=reliability(tensor, mode),
        mode=mode
    )
    return delta_and_topt(series)


# ==================== Z-SCORE COMPARISON ====================

@dataclass(eq=False)
class ZScoreResult:
    """Per-time Z scores between two class ensembles and their RMS"""

    z: np.ndarray          # (T,), NaN where undefined
    undefined: np.ndarray  # (T,) bool
    z_rms: float
    probability: float     # Phi(z_rms)
    consistent: bool       # z_rms < Z_CRITICAL

    def to_dict(self) -> Dict:
        return {
            'z': [None if np.isnan(v) else float(v) for v in self.z],
            'undefined': [bool(u) for u in self.undefined],
            'z_rms': self.z_rms,
            'probability': self.probability,
            'consistent': self.consistent
        }


def z_compare(
    a: np.ndarray,
    b: np.ndarray,
    times_a: Optional[np.ndarray] = None,
    times_b: Optional[np.ndarray] = None
) -> ZScoreResult:
    """
    Z(t) = (mean_a - mean_b) / sqrt(std_a^2 + std_b^2) over class ensembles

    Args:
        a, b: (N_s, T) per-class series of the same statistic
        times_a, times_b: Optional sample times; must match when both given

    Returns:
        ZScoreResult; times with zero combined std are undefined and left
        out of the RMS (with a warning)
    """
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.shape[1] != b.shape[1]:
        raise ParameterError("incompatible sample times")
    if times_a is not None and times_b is not None:
        if len(times_a) != len(times_b) or not np.allclose(times_a, times_b):
            raise ParameterError("incompatible sample times")

    spread = np.sqrt(_class_std(a) ** 2 + _class_std(b) ** 2)
    undefined = spread == 0
    z = np.full(a.shape[1], np.nan)
    z[~undefined] = (a.mean(axis=0) - b.mean(axis=0))[~undefined] / spread[~undefined]

    if undefined.any():
        warnings.warn(
            f"Z-score undefined at {int(undefined.sum())} of {len(z)} times (zero combined std)"
        )
    if undefined.all():
        z_rms = float('nan')
    else:
        z_rms = float(np.sqrt(np.mean(z[~undefined] ** 2)))

    return ZScoreResult(
        z=z,
        undefined=undefined,
        z_rms=z_rms,
        probability=float(norm.cdf(z_rms)) if not np.isnan(z_rms) else float('nan'),
        consistent=bool(z_rms < Z_CRITICAL)
    )


# ==================== SWEEPS ====================

@dataclass(eq=False)
class SweepCurve:
    """Ensemble statistic at a fixed time as one knob varies"""

    knob: str
    xs: np.ndarray
    ys: np.ndarray
    std_errs: np.ndarray
    fixed: float
    eval_time: float

    @property
    def statistic(self) -> str:
        return 'mu_inter' if self.knob == 'sigma' else 'mu_intra'

    def to_rows(self) -> List[Dict]:
        return [
            {'knob_value': float(x), 'statistic': float(y), 'std_err': float(e)}
            for x, y, e in zip(self.xs, self.ys, self.std_errs)
        ]


def sweep_values(start: float, stop: float, count: int, log_spaced: bool = False) -> np.ndarray:
    """Linear or log-spaced knob grid"""
    if count < 1:
        raise ParameterError(f"count must be >= 1, got {count}")
    if log_spaced:
        if start <= 0 or stop <= 0:
            raise ParameterError("log-spaced sweeps need positive bounds")
        return np.geomspace(start, stop, count)
    return np.linspace(start, stop, count)


def _time_index(sample_times: np.ndarray, eval_time: float) -> int:
    idx = int(np.argmin(np.abs(sample_times - eval_time)))
    spacing = np.min(np.diff(sample_times)) if len(sample_times) > 1 else np.inf
    if abs(sample_times[idx] - eval_time) > 0.5 * spacing + 1e-9:
        raise ParameterError(f"eval_time {eval_time} ns is outside the sample grid")
    return idx


def sweep(
    knob: str,
    values: Sequence[float],
    base_cfg: SimConfig,
    eval_time: float = 6.0,
    n_workers: int = 1,
    verbose: bool = False
) -> SweepCurve:
    """
    Regenerate the ensemble for each knob value and read one statistic

    Every keyed stream is reused, so the same chips and challenges see each
    knob value; sigma reads mu_inter, epsilon reads mu_intra.

    Args:
        knob: 'sigma' or 'epsilon'
        values: Strictly increasing knob values
        base_cfg: Config for everything else
        eval_time: Read-out time in ns (experiment-relative)
        n_workers: Worker processes per dataset
        verbose: Progress bar over sweep points
    """
    if knob not in SWEEP_KNOBS:
        raise ParameterError(f"knob must be one of {SWEEP_KNOBS}, got {knob!r}")
    xs = np.asarray(values, dtype=np.float64)
    if xs.size == 0:
        raise ParameterError("sweep needs at least one value")
    if np.any(np.diff(xs) <= 0):
        raise ParameterError("sweep values must be strictly increasing")

    mode = base_cfg.pair_norm_mode
    idx = _time_index(base_cfg.sample_times(), eval_time)
    fixed = base_cfg.epsilon if knob == 'sigma' else base_cfg.sigma

    ys, errs = [], []
    for value in tqdm(xs, desc=f'{knob} sweep', disable=not verbose):
        cfg = base_cfg.with_overrides(**{knob: float(value)}).validate()
        tensor = generate_dataset(cfg, n_workers=n_workers)
        per_class = uniqueness(tensor, mode) if knob == 'sigma' else reliability(tensor, mode)
        column = per_class[:, idx]
        ys.append(float(column.mean()))
        errs.append(float(_class_std(column[:, None])[0] / np.sqrt(len(column))))

    return SweepCurve(
        knob=knob,
        xs=xs,
        ys=np.asarray(ys),
        std_errs=np.asarray(errs),
        fixed=float(fixed),
        eval_time=float(eval_time)
    )
