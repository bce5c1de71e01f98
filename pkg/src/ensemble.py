"""
Ensemble Simulation: class -> instance -> CRP

Generates the response tensor X[s, i, c, r, n, t]:
1. Class generation: random regular topology + mean delays, one challenge set per class
2. Instance generation: perturbed tau and delays per (s, i)
3. CRP generation: integrate every (c, r) with its own keyed noise stream,
   decimate onto the measurement grid

Work is split into one task per (s, i). Every draw comes from a keyed
stream, so the tensor is bit-identical for any worker count or task order.
"""

import multiprocessing as mp
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from src.errors import DatasetFormatError, GenerationError, ParameterError
from src.network.dynamics import Trajectory, evaluate_nodes, integrate_batch
from src.network.parameters import ClassSpec, SimConfig, sample_class, sample_instance
from src.network.topology import generate_random_regular
from src.tools.rng_streams import PURPOSE_TAGS, make_stream


# Below this many nodes challenges are drawn from the full 2^N code list
EXHAUSTIVE_MAX_NODES = 16
MAX_CHALLENGE_ROUNDS = 1000
DEFAULT_BATCH_SIZE = 32


@dataclass(eq=False)
class ChallengeSet:
    """Distinct N-bit initial conditions of one class"""

    challenges: np.ndarray  # (N_c, N) uint8

    def to_hex(self) -> List[str]:
        """One little-endian hex string per challenge"""
        packed = np.packbits(self.challenges, axis=1, bitorder='little')
        return [row.tobytes().hex() for row in packed]

    @classmethod
    def from_hex(cls, codes: List[str], n_nodes: int) -> 'ChallengeSet':
        rows = [np.frombuffer(bytes.fromhex(code), dtype=np.uint8) for code in codes]
        bits = np.unpackbits(np.array(rows), axis=1, count=n_nodes, bitorder='little')
        return cls(challenges=bits)


@dataclass(eq=False)
class ResponseTensor:
    """Bit-packed X[s, i, c, r, n, t] with sample times and metadata"""

    dims: Tuple[int, int, int, int, int, int]
    packed: np.ndarray         # uint8, LSB-first, C order over dims
    sample_times: np.ndarray   # (T,) experiment-relative ns
    metadata: Dict

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 6:
            raise DatasetFormatError(f"response tensor needs 6 dims, got {self.dims}")
        if len(self.packed) != (self.n_bits + 7) // 8:
            raise DatasetFormatError("payload length mismatch")
        if len(self.sample_times) != self.dims[5]:
            raise DatasetFormatError("sample_times length does not match T")

    @property
    def n_bits(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    @property
    def experiment_times(self) -> np.ndarray:
        """Sample times measured from the end of the discarded transient"""
        return np.asarray(self.sample_times, dtype=np.float64)

    @property
    def simulation_times(self) -> np.ndarray:
        """Sample times measured from challenge release (adds the discard)"""
        discard = self.metadata.get('config', {}).get('discard', 0.0)
        return self.experiment_times + float(discard)

    @classmethod
    def from_bits(cls, bits: np.ndarray, sample_times, metadata: Optional[Dict] = None) -> 'ResponseTensor':
        """Pack a 6-D Boolean array"""
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.ndim != 6:
            raise ParameterError(f"expected a 6-D array, got shape {bits.shape}")
        return cls(
            dims=bits.shape,
            packed=np.packbits(bits.ravel(), bitorder='little'),
            sample_times=np.asarray(sample_times, dtype=np.float64),
            metadata=metadata or {}
        )

    def bits(self) -> np.ndarray:
        """Unpack the full tensor"""
        flat = np.unpackbits(self.packed, count=self.n_bits, bitorder='little')
        return flat.reshape(self.dims)

    def unpack_range(self, start: int, count: int) -> np.ndarray:
        """Flat bits [start, start + count) of the C-ordered tensor"""
        if start < 0 or count < 0 or start + count > self.n_bits:
            raise ParameterError(f"bit range [{start}, {start + count}) outside the tensor")
        first_byte, last_byte = start // 8, (start + count + 7) // 8
        raw = np.unpackbits(self.packed[first_byte:last_byte], bitorder='little')
        offset = start - 8 * first_byte
        return raw[offset:offset + count]

    def class_bits(self, s: int) -> np.ndarray:
        """Unpack only class s, shape (N_i, N_c, N_r, N, T)"""
        if not 0 <= s < self.dims[0]:
            raise ParameterError(f"class index {s} out of range")
        block = int(np.prod(self.dims[1:], dtype=np.int64))
        return self.unpack_range(s * block, block).reshape(self.dims[1:])

    def challenge_slice(self, s: int, c_start: int, c_stop: int) -> np.ndarray:
        """
        Unpack challenges [c_start, c_stop) of class s for every instance

        Returns:
            (N_i, c_stop - c_start, N_r, N, T) array
        """
        n_s, n_i, n_c = self.dims[:3]
        if not 0 <= s < n_s:
            raise ParameterError(f"class index {s} out of range")
        if not 0 <= c_start < c_stop <= n_c:
            raise ParameterError(f"challenge range [{c_start}, {c_stop}) outside [0, {n_c})")
        per_challenge = int(np.prod(self.dims[3:], dtype=np.int64))
        count = (c_stop - c_start) * per_challenge
        rows = [
            self.unpack_range(((s * n_i + i) * n_c + c_start) * per_challenge, count)
            for i in range(n_i)
        ]
        return np.stack(rows).reshape((n_i, c_stop - c_start) + self.dims[3:])


def place_packed(payload: np.ndarray, packed: np.ndarray, start_bit: int) -> None:
    """
    OR LSB-first packed bits into payload, starting at bit start_bit

    The target bits must still be zero. Padding bits past the end of
    `packed` are zero, so they may spill into the payload's next byte.
    """
    byte, shift = divmod(int(start_bit), 8)
    if shift == 0:
        payload[byte:byte + len(packed)] |= packed
        return
    wide = packed.astype(np.uint16) << shift
    payload[byte:byte + len(packed)] |= (wide & 0xFF).astype(np.uint8)
    end = min(byte + 1 + len(packed), len(payload))
    payload[byte + 1:end] |= (wide >> 8).astype(np.uint8)[:end - byte - 1]


# ==================== CHALLENGES ====================

def fixed_point_mask(class_spec: ClassSpec) -> Callable[[np.ndarray], np.ndarray]:
    """Predicate marking challenges c with f(c) == c (the network never moves)"""
    def _is_fixed(challenges: np.ndarray) -> np.ndarray:
        return np.all(evaluate_nodes(class_spec, challenges) == challenges, axis=-1)
    return _is_fixed


def sample_challenges(
    n_challenges: int,
    n_nodes: int,
    stream: np.random.Generator,
    reject: Optional[Callable[[np.ndarray], np.ndarray]] = None
) -> ChallengeSet:
    """
    Draw distinct uniformly random challenges

    Args:
        n_challenges: N_c
        n_nodes: Challenge length N
        stream: Keyed 'challenge' stream
        reject: Optional predicate over (B, N) challenges; True rows are skipped

    Returns:
        ChallengeSet in draw order

    Example:
        sample_challenges(4, 2, rng)  # all four 2-bit vectors, shuffled
    """
    if n_challenges < 1 or n_nodes < 1:
        raise ParameterError(f"need positive sizes, got {n_challenges}, {n_nodes}")
    if n_challenges > 2 ** n_nodes:
        raise ParameterError(f"{n_challenges} distinct challenges do not exist for {n_nodes} nodes")

    if n_nodes <= EXHAUSTIVE_MAX_NODES:
        codes = np.arange(2 ** n_nodes, dtype=np.int64)
        all_bits = ((codes[:, None] >> np.arange(n_nodes)) & 1).astype(np.uint8)
        if reject is not None:
            all_bits = all_bits[~reject(all_bits)]
        if n_challenges > len(all_bits):
            raise ParameterError(
                f"only {len(all_bits)} admissible challenges for {n_nodes} nodes"
            )
        chosen = stream.choice(len(all_bits), size=n_challenges, replace=False)
        return ChallengeSet(challenges=all_bits[chosen])

    seen = set()
    rows = []
    for _ in range(MAX_CHALLENGE_ROUNDS):
        draw = stream.integers(0, 2, size=(n_challenges - len(rows), n_nodes), dtype=np.uint8)
        if reject is not None:
            draw = draw[~reject(draw)]
        for row in draw:
            key = row.tobytes()
            if key not in seen:
                seen.add(key)
                rows.append(row)
        if len(rows) == n_challenges:
            return ChallengeSet(challenges=np.array(rows, dtype=np.uint8))

    raise GenerationError(f"could not draw {n_challenges} distinct challenges")


# ==================== DECIMATION ====================

def decimate(traj: Trajectory, cfg: SimConfig) -> np.ndarray:
    """
    Keep the Boolean states on the measurement grid

    Samples sit at discard + k * sample_interval for k = 1..T; the state at
    exactly t = discard is dropped.

    Returns:
        (N, T) uint8 matrix
    """
    if cfg.n_samples < 1:
        raise ParameterError("t_int - discard leaves no sample times")

    wanted = cfg.sample_steps()
    times = np.asarray(traj.times)
    if len(times) == 0:
        raise ParameterError("trajectory has no recorded steps")
    idx = np.searchsorted(times, wanted)
    if np.any(idx >= len(times)) or np.any(times[np.minimum(idx, len(times) - 1)] != wanted):
        raise ParameterError(
            f"trajectory too short: needs step {int(wanted[-1])}, has up to {int(times[-1])}"
        )
    return np.ascontiguousarray(traj.bits[idx].T)


# ==================== TASKS ====================

def _simulate_instance(task) -> Tuple[int, int, np.ndarray]:
    """
    Worker: all (c, r) responses of one instance

    Returns:
        (s, i, packed bits of the (N_c, N_r, N, T) block)
    """
    cfg, class_spec, challenges, i, batch_size = task
    s = class_spec.class_index
    seed = cfg.master_seed

    inst = sample_instance(
        class_spec, cfg,
        make_stream(seed, 'inst-tau', s, i),
        make_stream(seed, 'inst-delay', s, i),
        instance_index=i
    )

    steps = cfg.sample_steps()
    n_challenges, n_nodes = challenges.shape
    pair_bits = n_nodes * len(steps)
    block = np.zeros((n_challenges * cfg.n_repeats * pair_bits + 7) // 8, dtype=np.uint8)
    # c-major, so every chunk is one contiguous bit range of the block
    pairs = [(c, r) for c in range(n_challenges) for r in range(cfg.n_repeats)]

    for start in range(0, len(pairs), batch_size):
        chunk = pairs[start:start + batch_size]
        streams = [make_stream(seed, 'noise', s, i, c, r) for c, r in chunk]
        rows = challenges[[c for c, _ in chunk]]
        _, bits, _ = integrate_batch(inst, rows, cfg, streams, record_steps=steps)
        chunk_bits = np.ascontiguousarray(bits.transpose(0, 2, 1)).ravel()
        place_packed(block, np.packbits(chunk_bits, bitorder='little'), start * pair_bits)

    return s, i, block


class EnsembleSimulator:
    """
    Builds HBN-PUF response tensors

    Procedurally generates classes, instances and CRPs from one SimConfig,
    spreading (s, i) tasks over worker processes.
    """

    def __init__(
        self,
        cfg: SimConfig,
        n_workers: int = 1,
        batch_size: int = DEFAULT_BATCH_SIZE,
        verbose: bool = True
    ):
        """
        Initialize simulator

        Args:
            cfg: Validated simulation config
            n_workers: Worker processes (1 = run in this process)
            batch_size: Trajectories integrated side by side per task
            verbose: Print stage lines and a progress bar
        """
        if n_workers < 1:
            raise ParameterError(f"n_workers must be >= 1, got {n_workers}")
        if batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {batch_size}")

        self.cfg = cfg.validate()
        self.n_workers = n_workers
        self.batch_size = batch_size
        self.verbose = verbose
        self.classes: List[Tuple[ClassSpec, ChallengeSet]] = []

    def build_class(self, s: int) -> Tuple[ClassSpec, ChallengeSet]:
        """Topology, mean delays and challenge set of class s"""
        cfg = self.cfg
        topology = generate_random_regular(
            cfg.n_nodes, cfg.degree, make_stream(cfg.master_seed, 'topology', s)
        )
        class_spec = sample_class(
            topology, cfg, make_stream(cfg.master_seed, 'class-delay', s), class_index=s
        )
        reject = fixed_point_mask(class_spec) if cfg.exclude_fixed_point_challenges else None
        challenges = sample_challenges(
            cfg.n_challenges, cfg.n_nodes,
            make_stream(cfg.master_seed, 'challenge', s),
            reject=reject
        )
        return class_spec, challenges

    def metadata(self) -> Dict:
        """Config, seeds, and per-class netlists for the dataset header"""
        return {
            'config': self.cfg.to_dict(),
            'master_seed': self.cfg.master_seed,
            'stream_tags': dict(PURPOSE_TAGS),
            'classes': [
                dict(class_spec.to_dict(), challenges_hex=challenges.to_hex())
                for class_spec, challenges in self.classes
            ]
        }

    def generate_dataset(self) -> ResponseTensor:
        """
        Run the full class -> instance -> CRP pipeline

        Returns:
            ResponseTensor with dims (N_s, N_i, N_c, N_r, N, T)
        """
        cfg = self.cfg
        dims = (cfg.n_classes, cfg.n_instances, cfg.n_challenges,
                cfg.n_repeats, cfg.n_nodes, cfg.n_samples)

        if self.verbose:
            print(f"🚀 Generating dataset {dims} with {self.n_workers} worker(s)")

        self.classes = [self.build_class(s) for s in range(cfg.n_classes)]
        if self.verbose:
            print(f"   ✅ {cfg.n_classes} classes drawn ({cfg.n_nodes} nodes, degree {cfg.degree})")

        tasks = [
            (cfg, class_spec, challenges.challenges, i, self.batch_size)
            for class_spec, challenges in self.classes
            for i in range(cfg.n_instances)
        ]

        block_bits = int(np.prod(dims[2:], dtype=np.int64))
        payload = np.zeros((int(np.prod(dims, dtype=np.int64)) + 7) // 8, dtype=np.uint8)
        progress = dict(total=len(tasks), desc='instances', disable=not self.verbose)

        if self.n_workers > 1:
            with mp.Pool(processes=self.n_workers) as pool:
                for s, i, block in tqdm(pool.imap_unordered(_simulate_instance, tasks), **progress):
                    place_packed(payload, block, (s * cfg.n_instances + i) * block_bits)
        else:
            for s, i, block in tqdm(map(_simulate_instance, tasks), **progress):
                place_packed(payload, block, (s * cfg.n_instances + i) * block_bits)

        tensor = ResponseTensor(
            dims=dims,
            packed=payload,
            sample_times=cfg.sample_times(),
            metadata=self.metadata()
        )
        if self.verbose:
            print(f"   ✅ {tensor.n_bits} response bits packed into {len(tensor.packed)} bytes")
        return tensor


def generate_dataset(cfg: SimConfig, n_workers: int = 1, verbose: bool = False) -> ResponseTensor:
    """Convenience wrapper around EnsembleSimulator"""
    return EnsembleSimulator(cfg, n_workers=n_workers, verbose=verbose).generate_dataset()
