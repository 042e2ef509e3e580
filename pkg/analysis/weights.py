# analysis/weights.py
"""
Parameter-space inspection: heatmap grids, thresholded connectivity graphs,
per-unit connectivity strength and polarity.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import networkx as nx
import numpy as np

from numcore.errors import ValidationError
from numcore.fileio import atomic_write_text
from seq2seq.gru import BIASES, HIDDEN_WEIGHTS, INPUT_WEIGHTS

logger = logging.getLogger(__name__)

HALVES = ("encoder", "decoder")

# keep roughly the strongest 1% of weights
ENCODER_THRESHOLD = 0.2
DECODER_THRESHOLD = 0.17


# ============================================================
# Incidence: which tensor slices touch hidden unit j
# ============================================================
def incidence(half: str, hidden: int, with_biases: bool = False) -> List[Tuple[str, int, int]]:
    """
    (tensor name, axis, offset): unit j owns index offset + j along axis.

    Weights are stored [in x out], so axis 1 is "incoming" and axis 0 "outgoing".
    Encoder units also feed the scorer and the projection through the context
    vector, hence the second half (offset = hidden) of those matrices.
    """
    if half not in HALVES:
        raise ValidationError(f"unknown half {half!r}; expected one of {HALVES}")
    gru = f"{half}.gru"
    entries = [(f"{gru}.{w}", 1, 0) for w in INPUT_WEIGHTS + HIDDEN_WEIGHTS]
    entries += [(f"{gru}.{w}", 0, 0) for w in HIDDEN_WEIGHTS]
    offset = hidden if half == "encoder" else 0
    entries += [("decoder.attention.W1", 0, offset), ("decoder.out_proj.weight", 0, offset)]
    if with_biases:
        entries += [(f"{gru}.{b}", 0, 0) for b in BIASES]
    return entries


def hidden_size(tensors: Dict[str, np.ndarray]) -> int:
    return tensors["encoder.gru.W_hh"].shape[0]


def neuron_strength(tensors: Dict[str, np.ndarray], half: str) -> np.ndarray:
    """Mean |w| over every weight incident to each hidden unit of one half."""
    hidden = hidden_size(tensors)
    sums = np.zeros(hidden)
    counts = np.zeros(hidden)
    for name, axis, offset in incidence(half, hidden):
        arr = np.abs(tensors[name])
        block = arr[offset:offset + hidden] if axis == 0 else arr[:, offset:offset + hidden]
        sums += block.sum(axis=1 - axis)
        counts += block.shape[1 - axis]
    return sums / counts


def top_units(strengths: np.ndarray, frac: float) -> np.ndarray:
    """Indices of the ceil(frac * n) strongest units, strongest first (stable on ties)."""
    k = int(np.ceil(frac * len(strengths) - 1e-9))
    order = np.argsort(-strengths, kind="stable")
    return order[:k]


def neuron_polarity(matrix: np.ndarray, incoming: bool = True) -> np.ndarray:
    """Mean signed weight per unit (incoming: per column of an [in x out] matrix)."""
    return matrix.mean(axis=0 if incoming else 1)


def gate_polarity_correlation(tensors: Dict[str, np.ndarray], half: str) -> Dict[str, float]:
    """
    Pearson correlation between update- and reset-gate polarity per unit.

    A negative value means units that are strongly positive in one gate tend
    to be strongly negative in the other.
    """
    gru = f"{half}.gru"
    result = {}
    for z_name, r_name in (("W_hz", "W_hr"), ("W_iz", "W_ir")):
        pz = neuron_polarity(tensors[f"{gru}.{z_name}"])
        pr = neuron_polarity(tensors[f"{gru}.{r_name}"])
        result[f"{z_name}~{r_name}"] = float(np.corrcoef(pz, pr)[0, 1])
    return result


# ============================================================
# Heatmaps
# ============================================================
def heatmap_grid(name: str, value: np.ndarray) -> Tuple[np.ndarray, str, str]:
    """
    Grid in display orientation and its axis labels.

    Weight matrices: rows = receiving unit (incoming weights), columns = sending unit.
    Embeddings: rows = token (vocabulary order), columns = embedding unit.
    Vectors become a single row.
    """
    if value.ndim == 1:
        return value.reshape(1, -1), "bias", "unit"
    if name.endswith("embedding"):
        return value, "token", "embedding unit"
    return value.T, "receiving unit (incoming weights)", "sending unit (outgoing weights)"


def export_heatmap(name: str, tensors: Dict[str, np.ndarray], out_dir: Path) -> Path:
    if name not in tensors:
        raise ValidationError(f"unknown tensor {name!r}")
    grid, rows, cols = heatmap_grid(name, tensors[name])
    path = Path(out_dir) / f"heatmap_{name.replace('.', '_')}.csv"
    buf = io.StringIO()
    np.savetxt(buf, grid, fmt="%.17g", delimiter=",",
               header=f"matrix={name} shape={grid.shape[0]}x{grid.shape[1]} rows={rows} cols={cols}")
    atomic_write_text(path, buf.getvalue())
    return path


def read_heatmap(path: Path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", comments="#", dtype=np.float64, ndmin=2)


def row_mean_abs(grid: np.ndarray) -> np.ndarray:
    return np.abs(grid).mean(axis=1)


# ============================================================
# Connectivity graphs
# ============================================================
@dataclass
class ConnectivityGraph:
    name: str
    threshold: float
    graph: nx.DiGraph
    n_entries: int

    @property
    def n_edges(self) -> int:
        return self.graph.number_of_edges()

    @property
    def kept_fraction(self) -> float:
        return self.n_edges / self.n_entries if self.n_entries else 0.0

    def degree_stats(self, top: int = 5) -> Dict:
        out_deg = {n: d for n, d in self.graph.out_degree() if self.graph.nodes[n]["layer"] == "source"}
        in_deg = {n: d for n, d in self.graph.in_degree() if self.graph.nodes[n]["layer"] == "target"}

        def hubs(degrees):
            return [n for n, d in sorted(degrees.items(), key=lambda kv: (-kv[1], kv[0]))[:top] if d > 0]

        return {
            "edges": self.n_edges,
            "entries": self.n_entries,
            "kept_fraction": self.kept_fraction,
            "max_out_degree": max(out_deg.values(), default=0),
            "max_in_degree": max(in_deg.values(), default=0),
            "mean_out_degree": float(np.mean(list(out_deg.values()))) if out_deg else 0.0,
            "source_hubs": hubs(out_deg),
            "target_hubs": hubs(in_deg),
        }


def connectivity_graph(matrix: np.ndarray, threshold: float, name: str = "W") -> ConnectivityGraph:
    """
    Bipartite graph of an [in x out] matrix keeping edges with |w| >= threshold.

    Sources are "in{i}", targets "out{j}"; edges carry weight, magnitude and sign.
    """
    if threshold < 0:
        raise ValidationError(f"threshold must be >= 0, got {threshold}")
    g = nx.DiGraph(name=name)
    n_in, n_out = matrix.shape
    g.add_nodes_from((f"in{i}", {"layer": "source"}) for i in range(n_in))
    g.add_nodes_from((f"out{j}", {"layer": "target"}) for j in range(n_out))
    for i, j in np.argwhere(np.abs(matrix) >= threshold):
        w = float(matrix[i, j])
        g.add_edge(f"in{i}", f"out{j}", weight=w, magnitude=abs(w), sign="pos" if w >= 0 else "neg")
    result = ConnectivityGraph(name, threshold, g, matrix.size)
    logger.debug("graph %s @ %.3f: %d / %d edges", name, threshold, result.n_edges, result.n_entries)
    return result


def write_dot(cg: ConnectivityGraph, path: Path) -> Path:
    g = nx.DiGraph(name=cg.name.replace(".", "_"))
    for node, data in cg.graph.nodes(data=True):
        g.add_node(node, layer=data["layer"])
    for u, v, data in cg.graph.edges(data=True):
        g.add_edge(u, v, weight=f"{data['weight']:.6f}", sign=data["sign"],
                   penwidth=f"{1 + 4 * data['magnitude']:.3f}",
                   color="red" if data["sign"] == "pos" else "blue")
    return atomic_write_text(path, nx.nx_pydot.to_pydot(g).to_string())
