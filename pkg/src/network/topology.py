"""
Random Regular Network Topologies

An HBN class is wired as a simple undirected k-regular graph. Every
undirected edge {n, m} is realized as two directed edges (n <- m) and
(m <- n), each with its own delay, so pred(n) holds exactly k nodes.

GENERATION (pairing / configuration model):
1. Lay out k stubs per node
2. Shuffle the stubs and pair them off
3. Restart from scratch on any self-loop or repeated edge
4. Give up after MAX_PAIRING_RESTARTS restarts
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from src.errors import GenerationError, ParameterError


MAX_PAIRING_RESTARTS = 10_000


@dataclass(frozen=True)
class Topology:
    """Directed predecessor lists of an N-node network"""

    n_nodes: int
    degree: int
    pred: Tuple[Tuple[int, ...], ...]

    @property
    def edges(self) -> List[Tuple[int, int]]:
        """Directed pairs (n, m) meaning 'm feeds n', sorted"""
        return sorted((n, m) for n, preds in enumerate(self.pred) for m in preds)

    def pred_array(self) -> np.ndarray:
        """
        Predecessors as an (N, k) integer array

        Only valid for a regular topology (every row of equal length).
        """
        if any(len(p) != self.degree for p in self.pred):
            raise ParameterError("pred_array needs every node to have `degree` predecessors")
        return np.asarray(self.pred, dtype=np.int64).reshape(self.n_nodes, self.degree)

    @classmethod
    def from_undirected(
        cls,
        n_nodes: int,
        degree: int,
        undirected_edges: Sequence[Tuple[int, int]]
    ) -> 'Topology':
        """
        Expand an undirected edge list into sorted predecessor lists

        Example:
            ring = Topology.from_undirected(2, 1, [(0, 1)])
            # ring.pred == ((1,), (0,))
        """
        pred: List[List[int]] = [[] for _ in range(n_nodes)]
        for a, b in undirected_edges:
            pred[a].append(b)
            pred[b].append(a)
        return cls(
            n_nodes=n_nodes,
            degree=degree,
            pred=tuple(tuple(sorted(p)) for p in pred)
        )

    def to_dict(self) -> Dict:
        """Serialize for the experiment metadata"""
        return {
            'n_nodes': self.n_nodes,
            'degree': self.degree,
            'edges': [list(e) for e in self.edges]
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'Topology':
        """Load a topology written by to_dict()"""
        n_nodes = int(data['n_nodes'])
        pred: List[List[int]] = [[] for _ in range(n_nodes)]
        for n, m in data['edges']:
            pred[int(n)].append(int(m))
        return cls(
            n_nodes=n_nodes,
            degree=int(data['degree']),
            pred=tuple(tuple(sorted(p)) for p in pred)
        )


def generate_random_regular(
    n_nodes: int,
    degree: int,
    stream: np.random.Generator
) -> Topology:
    """
    Draw a random simple k-regular graph with the pairing model

    Args:
        n_nodes: Number of nodes N
        degree: Degree k (3 for the FPGA networks)
        stream: Keyed 'topology' stream

    Returns:
        Topology with sorted predecessor lists

    Example:
        topo = generate_random_regular(4, 3, make_stream(0, 'topology', 0))
        # K4: every node is fed by the other three
    """
    if n_nodes < 1 or degree < 1:
        raise ParameterError(f"n_nodes and degree must be positive, got {n_nodes}, {degree}")
    if (n_nodes * degree) % 2 != 0:
        raise ParameterError(f"n_nodes * degree must be even, got {n_nodes} * {degree}")
    if degree >= n_nodes:
        raise ParameterError(f"degree must be smaller than n_nodes, got {degree} >= {n_nodes}")

    stubs = np.repeat(np.arange(n_nodes, dtype=np.int64), degree)

    for _ in range(MAX_PAIRING_RESTARTS):
        pairs = stream.permutation(stubs).reshape(-1, 2)
        pairs.sort(axis=1)

        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        if len(np.unique(pairs, axis=0)) != len(pairs):
            continue

        return Topology.from_undirected(n_nodes, degree, [tuple(p) for p in pairs.tolist()])

    raise GenerationError(
        f"no simple {degree}-regular pairing on {n_nodes} nodes after "
        f"{MAX_PAIRING_RESTARTS} restarts"
    )


def validate(topology: Topology) -> List[str]:
    """
    Collect every invariant violation of a topology

    Returns:
        List of violation messages; empty means the topology is valid

    Example:
        problems = validate(topo)
        # [] or ['self-loop at 0', 'degree mismatch at 1', ...]
    """
    violations = []
    n_nodes = topology.n_nodes

    if len(topology.pred) != n_nodes:
        violations.append(
            f"node count mismatch: {len(topology.pred)} predecessor lists for {n_nodes} nodes"
        )

    pred_sets = [set(p) for p in topology.pred]

    for n, preds in enumerate(topology.pred):
        if len(preds) != topology.degree:
            violations.append(f"degree mismatch at {n}")
        if n in preds:
            violations.append(f"self-loop at {n}")
        if len(set(preds)) != len(preds):
            violations.append(f"duplicate predecessor at {n}")
        for m in preds:
            if not 0 <= m < n_nodes:
                violations.append(f"predecessor {m} of {n} out of range")
            elif n not in pred_sets[m]:
                violations.append(f"asymmetric edge {n}<-{m}")

    return violations
