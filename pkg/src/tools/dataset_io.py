"""
Dataset and Table Files

DATASET LAYOUT:
    line 1:   "HBNPUF-DATASET 1 <header_bytes>\n"   (header size zero-padded to 12 digits)
    header:   JSON object (dims, sample times, bit order, payload size, metadata)
    payload:  packed response bits, starting right after the header

The header is written with sorted keys and no timestamps, so equal tensors
always give byte-identical files.

TABLES (pandas, comma-separated):
- stats:  class, time_ns, mu_inter, mu_intra, delta_mu  (+ ensemble_mean / ensemble_std rows)
- sweep:  knob_value, statistic, std_err
- fit:    A, B, C, A_err, B_err, C_err, residual_rms, converged, iterations
"""

import json
from pathlib import Path
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from src.analysis.fitting import FitResult
from src.analysis.statistics import StatsSeries, SweepCurve
from src.ensemble import ResponseTensor
from src.errors import DatasetFormatError


MAGIC = 'HBNPUF-DATASET'
FORMAT_VERSION = 1
ENSEMBLE_ROWS = ('ensemble_mean', 'ensemble_std')
STATS_COLUMNS = ['class', 'time_ns', 'mu_inter', 'mu_intra', 'delta_mu']
HEADER_KEYS = ('dims', 'sample_times_ns', 'payload_bytes')


def _sidecar(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + '.summary.json')


# ==================== DATASET ====================

def write_dataset(tensor: ResponseTensor, path) -> int:
    """
    Write header + packed payload

    Returns:
        Total bytes written
    """
    header = {
        'format': MAGIC,
        'version': FORMAT_VERSION,
        'dims': list(tensor.dims),
        'dim_names': ['class', 'instance', 'challenge', 'repeat', 'node', 'time'],
        'bit_order': 'little',
        'payload_bytes': int(len(tensor.packed)),
        'sample_times_ns': [float(t) for t in tensor.sample_times],
        'metadata': tensor.metadata
    }
    header_bytes = json.dumps(header, sort_keys=True, indent=1).encode('utf-8') + b'\n'
    prefix = f"{MAGIC} {FORMAT_VERSION} {len(header_bytes):012d}\n".encode('ascii')

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(prefix)
        f.write(header_bytes)
        f.write(np.ascontiguousarray(tensor.packed, dtype=np.uint8).tobytes())
    return len(prefix) + len(header_bytes) + len(tensor.packed)


def read_dataset_header(path) -> Tuple[Dict, int]:
    """
    Parse the header only

    Returns:
        (header dict, payload byte offset)
    """
    with open(path, 'rb') as f:
        prefix = f.readline()
        parts = prefix.decode('ascii', errors='replace').split()
        if len(parts) != 3 or parts[0] != MAGIC:
            raise DatasetFormatError(f"{path} is not an HBN-PUF dataset")
        if not (parts[1].isdigit() and parts[2].isdigit()):
            raise DatasetFormatError(f"malformed dataset prefix {prefix!r}")
        if int(parts[1]) != FORMAT_VERSION:
            raise DatasetFormatError(f"unsupported dataset version {parts[1]}")
        header_size = int(parts[2])
        raw = f.read(header_size)
    if len(raw) != header_size:
        raise DatasetFormatError("truncated header")
    try:
        header = json.loads(raw.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"unreadable header: {e}")
    if not isinstance(header, dict):
        raise DatasetFormatError("header is not a JSON object")
    return header, len(prefix) + header_size


def read_dataset(path) -> ResponseTensor:
    """Load a dataset, checking the payload length against the dims"""
    header, offset = read_dataset_header(path)
    missing = [key for key in HEADER_KEYS if key not in header]
    if missing:
        raise DatasetFormatError(f"header lacks {missing}")
    try:
        dims = tuple(int(d) for d in header['dims'])
        sample_times = np.asarray(header['sample_times_ns'], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(f"bad header field: {e}")
    if len(dims) != 6 or any(d < 1 for d in dims):
        raise DatasetFormatError(f"bad dims {list(dims)}")
    expected = (int(np.prod(dims, dtype=np.int64)) + 7) // 8

    with open(path, 'rb') as f:
        f.seek(offset)
        payload = np.frombuffer(f.read(), dtype=np.uint8)

    if len(payload) != expected or header.get('payload_bytes') != expected:
        raise DatasetFormatError("payload length mismatch")

    return ResponseTensor(
        dims=dims,
        packed=payload.copy(),
        sample_times=sample_times,
        metadata=header.get('metadata', {})
    )


# ==================== STATS TABLE ====================

def stats_to_frame(series: StatsSeries) -> pd.DataFrame:
    """Per-class rows followed by ensemble mean and std rows"""
    rows = []
    for s in range(series.n_classes):
        for k, t in enumerate(series.sample_times):
            rows.append([str(s), t, series.mu_inter[s, k], series.mu_intra[s, k], series.delta_mu[s, k]])

    ens = series.ensemble()
    for label, key in zip(ENSEMBLE_ROWS, ('mean', 'std')):
        for k, t in enumerate(series.sample_times):
            rows.append([
                label, t,
                ens['mu_inter'][key][k], ens['mu_intra'][key][k], ens['delta_mu'][key][k]
            ])
    return pd.DataFrame(rows, columns=STATS_COLUMNS)


def write_stats(series: StatsSeries, path) -> Path:
    """Write the stats CSV and its t_opt summary sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stats_to_frame(series).to_csv(path, index=False, float_format='%.17g')
    with open(_sidecar(path), 'w') as f:
        json.dump(series.summary(), f, indent=2, sort_keys=True)
    return path


def read_stats_table(path) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
    """
    Load per-class series from a stats CSV (ours or external, same columns)

    Returns:
        (sample_times, {'mu_inter': (N_s, T), 'mu_intra': (N_s, T), 'delta_mu': (N_s, T)})
    """
    try:
        frame = pd.read_csv(path, dtype={'class': str}, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"unreadable stats table {path}: {e}")

    numeric = [c for c in STATS_COLUMNS[1:] if c in frame.columns]
    try:
        frame = frame.astype({c: np.float64 for c in numeric})
    except (TypeError, ValueError) as e:
        raise DatasetFormatError(f"stats table {path} has non-numeric values: {e}")

    missing = [c for c in STATS_COLUMNS if c not in frame.columns]
    if 'delta_mu' in missing and 'mu_inter' in frame.columns and 'mu_intra' in frame.columns:
        frame['delta_mu'] = frame['mu_inter'] - frame['mu_intra']
        missing.remove('delta_mu')
    if missing:
        raise DatasetFormatError(f"stats table {path} lacks columns {missing}")

    frame = frame[~frame['class'].isin(ENSEMBLE_ROWS)]
    if frame.empty:
        raise DatasetFormatError(f"stats table {path} has no per-class rows")
    try:
        # numeric labels sort as numbers ('10' after '9')
        frame = frame.assign(**{'class': frame['class'].astype(int)})
    except ValueError:
        pass

    if frame.duplicated(subset=['class', 'time_ns']).any():
        raise DatasetFormatError(f"stats table {path} repeats a (class, time_ns) row")

    times = np.sort(frame['time_ns'].unique())
    series = {}
    for name in ('mu_inter', 'mu_intra', 'delta_mu'):
        wide = frame.pivot(index='class', columns='time_ns', values=name)
        if wide.isna().any().any():
            raise DatasetFormatError(f"stats table {path} has classes with missing times")
        series[name] = wide[times].to_numpy(dtype=np.float64)
    return times.astype(np.float64), series


# ==================== SWEEP / FIT TABLES ====================

def write_sweep(curve: SweepCurve, path) -> Path:
    """Write sweep rows plus the knob/fixed/eval_time sidecar"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(curve.to_rows(), columns=['knob_value', 'statistic', 'std_err']).to_csv(
        path, index=False, float_format='%.17g'
    )
    with open(_sidecar(path), 'w') as f:
        json.dump({
            'knob': curve.knob,
            'statistic': curve.statistic,
            'fixed': curve.fixed,
            'eval_time_ns': curve.eval_time
        }, f, indent=2, sort_keys=True)
    return path


def read_sweep(path) -> SweepCurve:
    """Load a sweep CSV; the sidecar is optional for external curves"""
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise DatasetFormatError(f"unreadable sweep table {path}: {e}")
    for column in ('knob_value', 'statistic'):
        if column not in frame.columns:
            raise DatasetFormatError(f"sweep table {path} lacks column '{column}'")

    info = {'knob': 'sigma', 'fixed': float('nan'), 'eval_time_ns': float('nan')}
    sidecar = _sidecar(path)
    if sidecar.exists():
        with open(sidecar) as f:
            info.update(json.load(f))

    errs = frame['std_err'] if 'std_err' in frame.columns else np.zeros(len(frame))
    return SweepCurve(
        knob=info['knob'],
        xs=frame['knob_value'].to_numpy(dtype=np.float64),
        ys=frame['statistic'].to_numpy(dtype=np.float64),
        std_errs=np.asarray(errs, dtype=np.float64),
        fixed=float(info['fixed']),
        eval_time=float(info['eval_time_ns'])
    )


def write_fit(fit: FitResult, curve_xs: np.ndarray, curve_ys: np.ndarray, path) -> Tuple[Path, Path]:
    """
    Write the one-row fit table and the sampled curve next to it

    Returns:
        (fit table path, curve path)
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([fit.to_row()]).to_csv(path, index=False, float_format='%.17g')

    curve_path = path.with_name(path.stem + '_curve' + path.suffix)
    pd.DataFrame({'x': curve_xs, 'y': curve_ys}).to_csv(curve_path, index=False, float_format='%.17g')
    return path, curve_path
