"""
Feed-forward network representation for singlab.

A network is a sequence of affine layers z -> W z + b with the activation
applied after every layer except the last. Layers are stored as sparse CSR
matrices because the constructive approximators are wide block-diagonal
stacks of tiny sub-networks; sparsity S is still measured by counting
entries above an exact-zero threshold.
"""

import json
from dataclasses import dataclass
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel
from scipy import sparse

from models.activation import Activation
from models.errors import (
    ActivationMismatchError,
    InputShapeError,
    ParameterError,
    UnsupportedConstructionError,
    WidthMismatchError,
)

logger = structlog.get_logger(__name__)

# Entries with |w| below this count as exact zeros in S.
ZERO_TOL = 1e-15
# Largest point block per evaluation pass, and the cap on block size x widest layer.
EVAL_CHUNK = 2048
EVAL_VALUES = 2 ** 22
NETWORK_FORMAT = "singlab-network"
NETWORK_FORMAT_VERSION = 1


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Layer:
    weight: sparse.csr_matrix
    bias: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass(frozen=True)
class SizeMetrics:
    depth: int
    sparsity: int
    magnitude: float
    glue_layers: int = 0

    def as_dict(self) -> Dict[str, Any]:
        return {"L": self.depth, "S": self.sparsity, "B": self.magnitude, "glue_layers": self.glue_layers}


def _as_layer(weight, bias) -> Layer:
    w = sparse.csr_matrix(weight, dtype=float, copy=True)
    w.eliminate_zeros()
    w.sort_indices()
    for arr in (w.data, w.indices, w.indptr):
        arr.setflags(write=False)
    b = np.array(bias, dtype=float).reshape(-1)
    if b.shape[0] != w.shape[0]:
        raise WidthMismatchError(f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}")
    return Layer(weight=w, bias=_frozen(b))


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays inside construction notes to JSON types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


class Network:
    """Immutable layered network with an optional output clip bound."""

    def __init__(
        self,
        layers: Sequence[Tuple[Any, Any]],
        activation: Activation,
        clip: Optional[float] = None,
        glue_layers: int = 0,
        notes: Optional[Dict[str, Any]] = None,
    ):
        if not layers:
            raise ParameterError("a network needs at least one layer")
        built = [item if isinstance(item, Layer) else _as_layer(*item) for item in layers]
        for position, (prev, nxt) in enumerate(zip(built, built[1:])):
            if prev.out_dim != nxt.in_dim:
                raise WidthMismatchError(
                    f"layer {position} outputs {prev.out_dim} values but layer {position + 1} expects {nxt.in_dim}"
                )
        if clip is not None and clip <= 0:
            raise ParameterError("clip bound must be positive")
        self._layers: Tuple[Layer, ...] = tuple(built)
        self.activation = activation
        self.clip = None if clip is None else float(clip)
        self.glue_layers = int(glue_layers)
        self.notes: Dict[str, Any] = _plain(dict(notes or {}))

    @property
    def layers(self) -> Tuple[Layer, ...]:
        return self._layers

    @property
    def input_dim(self) -> int:
        return self._layers[0].in_dim

    @property
    def output_dim(self) -> int:
        return self._layers[-1].out_dim

    @property
    def depth(self) -> int:
        return len(self._layers)

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def metrics(self) -> SizeMetrics:
        return metrics(self)

    def with_clip(self, clip: Optional[float]) -> "Network":
        return Network(self._layers, self.activation, clip=clip, glue_layers=self.glue_layers, notes=self.notes)

    def with_notes(self, **notes: Any) -> "Network":
        merged = dict(self.notes)
        merged.update(notes)
        return Network(self._layers, self.activation, clip=self.clip, glue_layers=self.glue_layers, notes=merged)

    def dense_layers(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        return [(layer.weight.toarray(), np.array(layer.bias)) for layer in self._layers]

    def __repr__(self) -> str:
        m = self.metrics()
        return f"Network(D={self.input_dim}->{self.output_dim}, L={m.depth}, S={m.sparsity}, act={self.activation.kind})"


def evaluate(net: Network, x) -> np.ndarray:
    """Evaluate a network on one point (shape (D,)) or a batch (shape (n, D))."""
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    if single:
        points = points.reshape(1, -1)
    if points.ndim != 2 or points.shape[1] != net.input_dim:
        raise InputShapeError(f"expected inputs of width {net.input_dim}, got shape {np.shape(x)}")

    out = np.empty((points.shape[0], net.output_dim))
    act = net.activation
    last = len(net.layers) - 1
    widest = max(layer.out_dim for layer in net.layers)
    chunk = max(16, min(EVAL_CHUNK, EVAL_VALUES // widest))
    for start in range(0, points.shape[0], chunk):
        z = points[start:start + chunk].T
        for position, layer in enumerate(net.layers):
            z = layer.weight @ z + layer.bias[:, None]
            if position != last:
                z = act(z)
        out[start:start + chunk] = z.T
    if net.clip is not None:
        np.clip(out, -net.clip, net.clip, out=out)
    return out[0] if single else out


def metrics(net: Network) -> SizeMetrics:
    sparsity = 0
    magnitude = 0.0
    for layer in net.layers:
        values = np.concatenate([np.abs(layer.weight.data), np.abs(layer.bias)])
        sparsity += int(np.count_nonzero(values >= ZERO_TOL))
        if values.size:
            magnitude = max(magnitude, float(values.max()))
    return SizeMetrics(depth=net.depth, sparsity=sparsity, magnitude=magnitude, glue_layers=net.glue_layers)


# --- elementary networks ----------------------------------------------------

def affine_net(matrix, bias, activation: Activation) -> Network:
    """Depth-1 network computing matrix·x + bias."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return Network([(matrix, np.asarray(bias, dtype=float).reshape(-1))], activation)


def select_net(indices: Sequence[int], in_dim: int, activation: Activation) -> Network:
    """Depth-1 network returning the listed input coordinates."""
    rows = np.arange(len(indices))
    cols = np.asarray(indices, dtype=int)
    if cols.size and (cols.min() < 0 or cols.max() >= in_dim):
        raise ParameterError(f"selection {list(indices)} out of range for width {in_dim}")
    matrix = sparse.csr_matrix((np.ones(len(indices)), (rows, cols)), shape=(len(indices), in_dim))
    return Network([(matrix, np.zeros(len(indices)))], activation)


def constant_net(value: float, in_dim: int, activation: Activation) -> Network:
    return Network([(sparse.csr_matrix((1, in_dim)), np.array([value]))], activation)


def identity_net(dim: int, depth: int, activation: Activation) -> Network:
    """Exact identity on R^dim with the requested depth.

    Hidden layers carry each coordinate as the pair η(x), η(−x) and recover it
    through x = (η(x) − η(−x)) / (c1 + c2), which holds for condition (ii).
    """
    if depth < 1:
        raise ParameterError("identity depth must be >= 1")
    eye = sparse.identity(dim, format="csr")
    if depth == 1:
        return Network([(eye, np.zeros(dim))], activation)
    if not activation.piecewise:
        raise UnsupportedConstructionError(
            f"{activation.kind} cannot carry values through hidden layers exactly"
        )
    scale = 1.0 / (activation.c1 + activation.c2)
    split = sparse.vstack([eye, -eye], format="csr")
    merge = sparse.hstack([eye, -eye], format="csr") * scale
    layers = [(split, np.zeros(2 * dim))]
    for _ in range(depth - 2):
        layers.append((sparse.vstack([merge, -merge], format="csr"), np.zeros(2 * dim)))
    layers.append((merge, np.zeros(dim)))
    return Network(layers, activation)


def abs_net(dim: int, activation: Activation) -> Network:
    """|x| coordinate-wise, from |x| = (η(x) + η(−x)) / (c1 − c2)."""
    if not activation.piecewise:
        raise UnsupportedConstructionError(f"{activation.kind} cannot compute |x| exactly")
    eye = sparse.identity(dim, format="csr")
    fold = sparse.hstack([eye, eye], format="csr") / (activation.c1 - activation.c2)
    return Network([(sparse.vstack([eye, -eye], format="csr"), np.zeros(2 * dim)),
                    (fold, np.zeros(dim))], activation)


# --- combinators ------------------------------------------------------------

def _check_activation(nets: Sequence[Network]) -> Activation:
    act = nets[0].activation
    for net in nets[1:]:
        if net.activation != act:
            raise ActivationMismatchError(f"cannot combine {act.kind} with {net.activation.kind} networks")
    return act


def compose(outer: Network, inner: Network) -> Network:
    """Network computing outer(inner(x)).

    The inner network's final affine map and the outer network's first affine
    map are merged into one layer, so the result has depth
    L_outer + L_inner − 1 and never needs a glue layer. Only the outer clip
    bound survives.
    """
    if inner.output_dim != outer.input_dim:
        raise WidthMismatchError(f"inner outputs {inner.output_dim} values, outer expects {outer.input_dim}")
    act = _check_activation([outer, inner])
    head, tail = outer.layers[0], inner.layers[-1]
    merged_weight = (head.weight @ tail.weight).tocsr()
    merged_bias = head.weight @ tail.bias + head.bias
    layers = list(inner.layers[:-1]) + [(merged_weight, merged_bias)] + list(outer.layers[1:])
    return Network(layers, act, clip=outer.clip, glue_layers=outer.glue_layers + inner.glue_layers)


def pad_depth(net: Network, depth: int) -> Network:
    """Extend a network to the given depth with identity layers on its output."""
    if depth < net.depth:
        raise ParameterError(f"cannot shrink depth {net.depth} to {depth}")
    if depth == net.depth:
        return net
    padded = compose(identity_net(net.output_dim, depth - net.depth + 1, net.activation), net)
    return Network(padded.layers, padded.activation, clip=net.clip,
                   glue_layers=net.glue_layers + depth - net.depth, notes=net.notes)


def parallel(nets: Sequence[Network]) -> Network:
    """Concatenate the outputs of networks sharing one input."""
    if not nets:
        raise ParameterError("parallel needs at least one network")
    in_dim = nets[0].input_dim
    for net in nets[1:]:
        if net.input_dim != in_dim:
            raise WidthMismatchError(f"parallel members disagree on input width ({in_dim} vs {net.input_dim})")
    act = _check_activation(nets)
    if len(nets) == 1:
        return nets[0]
    depth = max(net.depth for net in nets)
    padded = [pad_depth(net, depth) for net in nets]
    layers = []
    for position in range(depth):
        members = [net.layers[position] for net in padded]
        if position == 0:
            weight = sparse.vstack([layer.weight for layer in members], format="csr")
        else:
            weight = sparse.block_diag([layer.weight for layer in members], format="csr")
        layers.append((weight, np.concatenate([layer.bias for layer in members])))
    glue = sum(net.glue_layers for net in padded)
    return Network(layers, act, glue_layers=glue)


def affine_map(net: Network, matrix, bias=None) -> Network:
    """Network computing matrix·net(x) + bias."""
    matrix = sparse.csr_matrix(np.atleast_2d(matrix) if not sparse.issparse(matrix) else matrix, dtype=float)
    if matrix.shape[1] != net.output_dim:
        raise WidthMismatchError(f"map expects {matrix.shape[1]} inputs, network outputs {net.output_dim}")
    bias = np.zeros(matrix.shape[0]) if bias is None else np.asarray(bias, dtype=float).reshape(-1)
    head = Network([(matrix, bias)], net.activation)
    return compose(head, net)


def affine_output(net: Network, weights, bias: float = 0.0) -> Network:
    """Network computing <weights, net(x)> + bias."""
    weights = np.asarray(weights, dtype=float).reshape(-1)
    if weights.shape[0] != net.output_dim:
        raise WidthMismatchError(f"{weights.shape[0]} weights for {net.output_dim} outputs")
    return affine_map(net, weights.reshape(1, -1), [bias])


# --- serialization ----------------------------------------------------------

class LayerDocument(BaseModel):
    shape: Tuple[int, int]
    indptr: List[int]
    indices: List[int]
    data: List[float]
    bias: List[float]


class NetworkDocument(BaseModel):
    format: Literal["singlab-network"] = NETWORK_FORMAT
    version: int = NETWORK_FORMAT_VERSION
    activation: Dict[str, Any]
    clip: Optional[float] = None
    glue_layers: int = 0
    layers: List[LayerDocument]
    notes: Dict[str, Any] = {}


def to_document(net: Network) -> NetworkDocument:
    layers = [
        LayerDocument(
            shape=(layer.out_dim, layer.in_dim),
            indptr=layer.weight.indptr.tolist(),
            indices=layer.weight.indices.tolist(),
            data=layer.weight.data.tolist(),
            bias=layer.bias.tolist(),
        )
        for layer in net.layers
    ]
    return NetworkDocument(activation=net.activation.descriptor(), clip=net.clip,
                           glue_layers=net.glue_layers, layers=layers, notes=net.notes)


def from_document(doc: NetworkDocument) -> Network:
    if doc.version != NETWORK_FORMAT_VERSION:
        raise ParameterError(f"unsupported network format version {doc.version}")
    layers = []
    for item in doc.layers:
        weight = sparse.csr_matrix(
            (np.array(item.data, dtype=float), np.array(item.indices, dtype=np.int32), np.array(item.indptr, dtype=np.int32)),
            shape=tuple(item.shape),
        )
        layers.append((weight, np.array(item.bias, dtype=float)))
    return Network(layers, Activation.from_descriptor(doc.activation), clip=doc.clip,
                   glue_layers=doc.glue_layers, notes=doc.notes)


def dumps(net: Network) -> str:
    """Versioned JSON text; Python float repr makes the round trip bit-exact."""
    return json.dumps(to_document(net).model_dump(), sort_keys=True)


def loads(text: str) -> Network:
    return from_document(NetworkDocument.model_validate(json.loads(text)))
