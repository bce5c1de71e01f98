"""
HBN Node Dynamics

MODEL (per node n, Euler step of size dt):
    x_n(t+dt) = x_n(t) + (dt / tau_n) * [-x_n(t) + f_n(y_n(t)) + eps_n(t)]
    y_n(t)    = { X_m(t - delay_nm) : m in pred(n) }
    X_m(t)    = 1 if x_m(t) >= 0.5 else 0
    eps_n(t)  ~ N(0, epsilon^2), one draw per node per step

HISTORY:
Each trajectory keeps a ring buffer of Boolean states with L = 1 + max delay
slots; slot (t mod L) holds X(t). Before t = 0 every slot holds the raw
challenge bit (the multiplexers hold the challenge), and x(0) = f_n applied
to the challenge bits of pred(n).

Updates are synchronous: step t reads X(t - delay) for every node before any
node writes X(t+1), so a zero-step delay reads the pre-update bit.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.errors import ParameterError
from src.network.parameters import ClassSpec, InstanceParams, SimConfig


# Steps of noise drawn per stream at a time; values do not depend on it
NOISE_BLOCK = 64


@dataclass(eq=False)
class NetworkState:
    """Analog states, Boolean history ring buffer and current step"""

    x: np.ndarray        # (N,) analog state
    history: np.ndarray  # (L, N) uint8, row t % L holds X(t)
    step_index: int = 0


@dataclass(eq=False)
class Trajectory:
    """Recorded Boolean (and optionally analog) states of one integration"""

    times: np.ndarray                     # step indices, strictly increasing
    bits: np.ndarray                      # (len(times), N) uint8
    analog: Optional[np.ndarray] = None   # (len(times), N) float64


def threshold(x):
    """
    Heaviside read-out of the analog state, with threshold(0.5) = 1

    Example:
        threshold(0.7)  # -> 1
        threshold(0.5)  # -> 1
    """
    bits = np.asarray(x) >= 0.5
    if bits.ndim == 0:
        return int(bits)
    return bits.astype(np.uint8)


def xor_node(inputs: Sequence[int]) -> int:
    """Parity of the input bits"""
    bits = np.asarray(inputs, dtype=np.uint8)
    if bits.size == 0:
        raise ParameterError("xor_node needs at least one input")
    return int(np.bitwise_xor.reduce(bits & 1))


def _node_outputs(delayed: np.ndarray, invert: np.ndarray) -> np.ndarray:
    """f_n for every node: parity over the last axis, inverted for XNOR nodes"""
    return np.bitwise_xor.reduce(delayed, axis=-1) ^ invert


def evaluate_nodes(class_spec: ClassSpec, bits) -> np.ndarray:
    """
    Apply every node function to undelayed Boolean states

    Args:
        class_spec: Class providing topology and node functions
        bits: (..., N) Boolean states

    Returns:
        (..., N) uint8 node outputs
    """
    pred = class_spec.topology.pred_array()
    bits = np.asarray(bits, dtype=np.uint8)
    return _node_outputs(bits[..., pred], class_spec.invert)


def _check_challenges(challenges: np.ndarray, n_nodes: int) -> np.ndarray:
    challenges = np.asarray(challenges)
    if challenges.shape[-1] != n_nodes:
        raise ParameterError(
            f"challenge length {challenges.shape[-1]} does not match {n_nodes} nodes"
        )
    if np.any((challenges != 0) & (challenges != 1)):
        raise ParameterError("challenge entries must be 0 or 1")
    return challenges.astype(np.uint8)


def _history_length(inst: InstanceParams) -> int:
    return 1 + int(np.max(inst.delay_steps, initial=0))


def _initial_arrays(inst: InstanceParams, challenges: np.ndarray):
    """Batched x(0) (B, N) and history (B, L, N) for a stack of challenges"""
    pred = inst.class_spec.topology.pred_array()
    invert = inst.class_spec.invert
    length = _history_length(inst)

    outputs = _node_outputs(challenges[:, pred], invert)
    x = outputs.astype(np.float64)

    history = np.repeat(challenges[:, None, :], length, axis=1)
    history[:, 0, :] = threshold(x)
    return x, history


def _euler_step(
    x: np.ndarray,
    history: np.ndarray,
    t: int,
    pred: np.ndarray,
    delay_steps: np.ndarray,
    invert: np.ndarray,
    rate: np.ndarray,
    noise: Optional[np.ndarray]
):
    """Advance batched states from step t to t+1 in place"""
    length = history.shape[1]
    rows = (t - delay_steps) % length
    delayed = history[:, rows, pred]
    drive = _node_outputs(delayed, invert)

    if noise is None:
        x += rate * (-x + drive)
    else:
        x += rate * (-x + drive + noise)

    history[:, (t + 1) % length, :] = x >= 0.5


def initial_state(inst: InstanceParams, challenge, cfg: SimConfig) -> NetworkState:
    """
    Load a challenge into the network

    Args:
        inst: Instance parameters
        challenge: N bits
        cfg: Simulation config

    Returns:
        NetworkState at step 0

    Example:
        state = initial_state(inst, [1, 0, 0, 0], cfg)
        # K4 XOR network: state.x == [0, 1, 1, 1]
    """
    n_nodes = inst.class_spec.topology.n_nodes
    challenges = _check_challenges(np.asarray(challenge)[None, :], n_nodes)
    x, history = _initial_arrays(inst, challenges)
    return NetworkState(x=x[0], history=history[0], step_index=0)


def step(
    state: NetworkState,
    inst: InstanceParams,
    cfg: SimConfig,
    noise_stream: Optional[np.random.Generator] = None
) -> NetworkState:
    """
    One Euler step; returns a new state and leaves the input untouched

    Args:
        state: Current state
        inst: Instance parameters
        cfg: Simulation config (uses dt, epsilon)
        noise_stream: Keyed 'noise' stream; required when epsilon > 0

    Example:
        # x_n = 0, f_n = 1, no noise, dt/tau_n = 0.04  ->  x_n' = 0.04
        nxt = step(state, inst, cfg.with_overrides(epsilon=0.0))
    """
    n_nodes = inst.class_spec.topology.n_nodes
    x = state.x[None, :].astype(np.float64)
    history = state.history[None, :, :].copy()

    noise = None
    if cfg.epsilon > 0:
        if noise_stream is None:
            raise ParameterError("a noise stream is required when epsilon > 0")
        noise = cfg.epsilon * noise_stream.standard_normal(n_nodes)[None, :]

    _euler_step(
        x, history, state.step_index,
        inst.class_spec.topology.pred_array(),
        inst.delay_steps,
        inst.class_spec.invert,
        cfg.dt / inst.tau,
        noise
    )
    return NetworkState(x=x[0], history=history[0], step_index=state.step_index + 1)


def integrate_batch(
    inst: InstanceParams,
    challenges,
    cfg: SimConfig,
    noise_streams: Sequence[np.random.Generator],
    record_steps: Optional[Sequence[int]] = None,
    record_analog: bool = False
):
    """
    Integrate several trajectories of one instance side by side

    Trajectory b starts from challenges[b] and consumes noise_streams[b] in
    step-major, node order, so each row is identical to a solo integration.

    Args:
        inst: Instance parameters
        challenges: (B, N) bits
        cfg: Simulation config
        noise_streams: B keyed 'noise' streams
        record_steps: Step indices to keep (default: every step 0..n_steps)
        record_analog: Also keep the analog states

    Returns:
        (steps, bits (B, R, N) uint8, analog (B, R, N) or None)
    """
    topology = inst.class_spec.topology
    challenges = _check_challenges(np.atleast_2d(challenges), topology.n_nodes)
    batch, n_nodes = challenges.shape
    if len(noise_streams) != batch:
        raise ParameterError(f"need {batch} noise streams, got {len(noise_streams)}")

    n_steps = cfg.n_steps
    if record_steps is None:
        steps = np.arange(n_steps + 1, dtype=np.int64)
    else:
        steps = np.asarray(record_steps, dtype=np.int64)
        if steps.size and (steps[0] < 0 or steps[-1] > n_steps or np.any(np.diff(steps) <= 0)):
            raise ParameterError(f"record_steps must be increasing within [0, {n_steps}]")

    pred = topology.pred_array()
    invert = inst.class_spec.invert
    rate = cfg.dt / inst.tau

    x, history = _initial_arrays(inst, challenges)
    bits = np.zeros((batch, len(steps), n_nodes), dtype=np.uint8)
    analog = np.zeros((batch, len(steps), n_nodes)) if record_analog else None

    def _record(slot: int, t: int):
        bits[:, slot, :] = history[:, t % history.shape[1], :]
        if analog is not None:
            analog[:, slot, :] = x

    slot = 0
    if slot < len(steps) and steps[slot] == 0:
        _record(slot, 0)
        slot += 1

    noise_block = None
    for t in range(n_steps):
        if slot >= len(steps):
            break

        noise = None
        if cfg.epsilon > 0:
            offset = t % NOISE_BLOCK
            if offset == 0:
                size = min(NOISE_BLOCK, n_steps - t)
                noise_block = np.stack([
                    cfg.epsilon * s.standard_normal((size, n_nodes)) for s in noise_streams
                ])
            noise = noise_block[:, offset, :]

        _euler_step(x, history, t, pred, inst.delay_steps, invert, rate, noise)

        if steps[slot] == t + 1:
            _record(slot, t + 1)
            slot += 1

    return steps, bits, analog


def integrate(
    inst: InstanceParams,
    challenge,
    cfg: SimConfig,
    noise_stream: Optional[np.random.Generator] = None,
    record_analog: bool = False
) -> Trajectory:
    """
    Integrate one trajectory over t_int, recording every step

    Args:
        inst: Instance parameters
        challenge: N bits
        cfg: Simulation config
        noise_stream: Keyed 'noise' stream; required when epsilon > 0
        record_analog: Also keep the analog states

    Returns:
        Trajectory with n_steps + 1 records (step 0 included)
    """
    if cfg.epsilon > 0 and noise_stream is None:
        raise ParameterError("a noise stream is required when epsilon > 0")

    steps, bits, analog = integrate_batch(
        inst, np.asarray(challenge)[None, :], cfg,
        [noise_stream], record_analog=record_analog
    )
    return Trajectory(
        times=steps,
        bits=bits[0],
        analog=None if analog is None else analog[0]
    )
