"""
HBN-PUF Experiment Controller
Orchestrates simulation, statistics, sweeps, fits and comparisons
"""
import json
import time
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from src.analysis.fitting import fit_sat_exp, noise_floor_crossing, sample_fit_curve
from src.analysis.statistics import compute_stats, sweep, z_compare
from src.ensemble import EnsembleSimulator
from src.errors import ParameterError
from src.tools.config import COMPARE_STATISTICS, DEFAULT_EVAL_TIME_NS, ExperimentConfig
from src.tools.dataset_io import (
    MAGIC, read_dataset, read_stats_table, read_sweep,
    write_dataset, write_fit, write_stats, write_sweep
)


def _is_dataset(path) -> bool:
    with open(path, 'rb') as f:
        return f.read(len(MAGIC)) == MAGIC.encode('ascii')


class HBNController:
    """
    Main controller for HBN-PUF experiments

    Every run_* method returns a status dict and writes its outputs.
    """

    def __init__(
        self,
        experiment: Optional[ExperimentConfig] = None,
        n_workers: Optional[int] = None,
        verbose: bool = True
    ):
        """
        Initialize controller

        Args:
            experiment: Experiment config (defaults to SimConfig())
            n_workers: Worker processes; overrides the config and HBN_THREADS
            verbose: Print stage lines
        """
        self.experiment = experiment or ExperimentConfig()
        self.n_workers = n_workers if n_workers is not None else self.experiment.n_workers
        if self.n_workers < 1:
            raise ParameterError(f"n_workers must be >= 1, got {self.n_workers}")
        self.verbose = verbose

    def _log(self, message: str):
        if self.verbose:
            print(message)

    def run_sim(self, out_path: Optional[str] = None, seed: Optional[int] = None) -> Dict:
        """
        Generate a dataset file

        Args:
            out_path: Destination (default: outputs.dataset)
            seed: Overrides simulation.master_seed

        Returns:
            Dict with path, dims, byte count and elapsed seconds
        """
        cfg = self.experiment.sim
        if seed is not None:
            cfg = cfg.with_overrides(master_seed=seed).validate()
        path = out_path or self.experiment.output_path('dataset')

        start = time.perf_counter()
        simulator = EnsembleSimulator(cfg, n_workers=self.n_workers, verbose=self.verbose)
        tensor = simulator.generate_dataset()
        n_bytes = write_dataset(tensor, path)
        elapsed = time.perf_counter() - start

        self._log(f"💾 Dataset {tensor.dims} saved to {path} ({n_bytes} bytes, {elapsed:.1f}s)")
        return {
            'status': 'success',
            'path': str(path),
            'dims': list(tensor.dims),
            'bytes': n_bytes,
            'elapsed_s': elapsed
        }

    def run_stats(self, dataset_path: str, mode: Optional[str] = None, out_path: Optional[str] = None) -> Dict:
        """
        Uniqueness / reliability table and t_opt report of a dataset

        Returns:
            Dict with output path and the t_opt summary
        """
        mode = mode or self.experiment.sim.pair_norm_mode
        path = out_path or self.experiment.output_path('stats')

        self._log(f"📊 Computing statistics of {dataset_path} ({mode})")
        tensor = read_dataset(dataset_path)
        series = compute_stats(tensor, mode)
        write_stats(series, path)

        summary = series.summary()
        ens = summary['ensemble']
        self._log(
            f"   ✅ t_opt = {ens['t_opt_ns']:.2f} ns: mu_inter = {ens['mu_inter']:.3f}, "
            f"mu_intra = {ens['mu_intra']:.3f}"
        )
        return {'status': 'success', 'path': str(path), 'summary': summary}

    def run_sweep(
        self,
        knob: Optional[str] = None,
        values: Optional[Sequence[float]] = None,
        eval_time: Optional[float] = None,
        out_path: Optional[str] = None,
        seed: Optional[int] = None
    ) -> Dict:
        """
        Sweep sigma or epsilon and write the curve

        Arguments left as None come from the first sweep in the config.
        """
        spec = self.experiment.sweeps[0] if self.experiment.sweeps else None
        if knob is None or values is None:
            if spec is None:
                raise ParameterError("sweep needs a knob and values (flags or config 'sweeps')")
            knob = knob or spec.knob
            values = values if values is not None else spec.values
        if eval_time is None:
            eval_time = spec.eval_time_ns if spec is not None else DEFAULT_EVAL_TIME_NS

        cfg = self.experiment.sim
        if seed is not None:
            cfg = cfg.with_overrides(master_seed=seed)
        path = out_path or self.experiment.output_path('sweep')

        self._log(f"🚀 Sweeping {knob} over {len(values)} values at t = {eval_time} ns")
        curve = sweep(knob, values, cfg, eval_time=eval_time,
                      n_workers=self.n_workers, verbose=self.verbose)
        write_sweep(curve, path)
        self._log(f"💾 Sweep saved to {path}")
        return {'status': 'success', 'path': str(path), 'rows': curve.to_rows()}

    def run_fit(
        self,
        sweep_path: str,
        out_path: Optional[str] = None,
        floor: Optional[float] = None,
        weighted: bool = False
    ) -> Dict:
        """
        Fit y = B - A exp(-C x) to a sweep curve

        Args:
            sweep_path: Sweep CSV
            out_path: Fit CSV (the curve goes next to it)
            floor: Optional reliability level; reports where the fit crosses it
            weighted: Weight points by 1 / std_err^2 (unweighted by default)
        """
        path = out_path or self.experiment.output_path('fit')
        curve = read_sweep(sweep_path)

        weights = None
        if weighted:
            if not np.all(curve.std_errs > 0):
                raise ParameterError("weighted fit needs positive std_err on every row")
            weights = 1.0 / curve.std_errs ** 2
        fit = fit_sat_exp(curve.xs, curve.ys, weights=weights)
        grid, fitted = sample_fit_curve(fit, curve.xs)
        fit_path, curve_path = write_fit(fit, grid, fitted, path)

        status = '✅' if fit.converged else '⚠️'
        self._log(
            f"{status} Fit of {curve.knob}: A = {fit.A:.3f}, B = {fit.B:.3f}, C = {fit.C:.2f} "
            f"({fit.iterations} iterations)"
        )

        result = {
            'status': 'success',
            'path': str(fit_path),
            'curve_path': str(curve_path),
            'fit': fit.to_row()
        }
        if floor is not None:
            sigma_min, resolution = noise_floor_crossing(fit, floor, self.experiment.sim.tau_mean)
            result['noise_floor'] = {'floor': floor, 'sigma_min': sigma_min, 'resolution_ns': resolution}
            self._log(f"   📊 Noise floor {floor} reached at sigma = {sigma_min:.4f} ({resolution * 1e3:.1f} ps)")
        return result

    def _load_series(self, path: str, mode: str):
        if _is_dataset(path):
            series = compute_stats(read_dataset(path), mode)
            return series.sample_times, {
                'mu_inter': series.mu_inter,
                'mu_intra': series.mu_intra,
                'delta_mu': series.delta_mu
            }
        return read_stats_table(path)

    def run_compare(
        self,
        a_path: str,
        b_path: str,
        statistic: str = 'mu_inter',
        mode: Optional[str] = None,
        out_path: Optional[str] = None
    ) -> Dict:
        """
        Z-score comparison of two class ensembles

        Inputs may be dataset files or stats tables (e.g. measured data in
        the stats column layout).
        """
        if statistic not in COMPARE_STATISTICS:
            raise ParameterError(f"statistic must be one of {COMPARE_STATISTICS}, got {statistic!r}")
        mode = mode or self.experiment.sim.pair_norm_mode

        times_a, series_a = self._load_series(a_path, mode)
        times_b, series_b = self._load_series(b_path, mode)
        result = z_compare(series_a[statistic], series_b[statistic], times_a, times_b)

        report = dict(result.to_dict(), statistic=statistic, time_ns=[float(t) for t in times_a])
        path = out_path or self.experiment.outputs.get('compare')
        if path:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            with open(path, 'w') as f:
                json.dump(report, f, indent=2, sort_keys=True)
            report['path'] = str(path)

        verdict = 'consistent' if result.consistent else 'inconsistent'
        self._log(f"📊 Z_RMS({statistic}) = {result.z_rms:.3f} ({verdict} at 99%)")
        return dict(report, status='success')
