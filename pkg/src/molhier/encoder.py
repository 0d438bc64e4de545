"""GIN encoder with edge embeddings, plus a hand-written backward pass.

Layer update, with neighbors summed in ascending index order::

    a = (1 + eps) * h[u] + sum_v (h[v] + edge[type(u, v)])
    h'[u] = relu(a @ W1 + b1) @ W2 + b2

Layer-0 features: atom nodes sum atom-type, charge-class and node-kind rows;
supernodes and masked atoms use their node-kind row alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import checkpoint, kernels
from .hier import ATOM, GRAPH, MOTIF, EDGE_TYPES, HierGraph

HIDDEN = 300
LAYERS = 5
N_ATOM_TYPES = 119  # row 0 is the unknown-element bucket
CHARGE_MIN, CHARGE_MAX = -3, 3
KINDS = (ATOM, MOTIF, GRAPH, "mask")
KIND_INDEX = {k: i for i, k in enumerate(KINDS)}


class EmptySubsetError(ValueError):
    pass


def _layer_names(layer: int) -> tuple[str, ...]:
    p = f"layer{layer}."
    return (p + "edge", p + "eps", p + "w1", p + "b1", p + "w2", p + "b2")


@dataclass
class EncoderParams:
    tensors: dict[str, np.ndarray]

    @property
    def hidden(self) -> int:
        return self.tensors["atom_type"].shape[1]

    @property
    def layers(self) -> int:
        return sum(1 for k in self.tensors if k.endswith(".w1"))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def copy(self) -> "EncoderParams":
        return EncoderParams({k: v.copy() for k, v in self.tensors.items()})

    def zeros_like(self) -> dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def save(self, path) -> None:
        checkpoint.save(path, {"encoder/" + k: v for k, v in self.tensors.items()})

    @classmethod
    def load(cls, path) -> "EncoderParams":
        return cls.from_sections(checkpoint.load(path))

    @classmethod
    def from_sections(cls, sections: dict[str, np.ndarray]) -> "EncoderParams":
        tensors = {k[len("encoder/"):]: v for k, v in sections.items() if k.startswith("encoder/")}
        if "atom_type" not in tensors:
            raise checkpoint.CheckpointError("no encoder sections in checkpoint")
        return cls(tensors)


def init_encoder(seed: int, hidden: int = HIDDEN, layers: int = LAYERS) -> EncoderParams:
    """Seeded uniform init in ``[-1/sqrt(hidden), 1/sqrt(hidden)]``; eps starts at 0."""
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden)

    def u(*shape):
        return rng.uniform(-bound, bound, size=shape)

    t = {
        "atom_type": u(N_ATOM_TYPES, hidden),
        "charge": u(CHARGE_MAX - CHARGE_MIN + 1, hidden),
        "kind": u(len(KINDS), hidden),
    }
    for layer in range(layers):
        edge, eps, w1, b1, w2, b2 = _layer_names(layer)
        t[edge] = u(len(EDGE_TYPES), hidden)
        t[eps] = np.zeros(1)
        t[w1] = u(hidden, hidden)
        t[b1] = u(hidden)
        t[w2] = u(hidden, hidden)
        t[b2] = u(hidden)
    return EncoderParams(t)


@dataclass
class NodeEmbeddings:
    matrix: np.ndarray
    layer: int


@dataclass
class _Feature:
    atom_rows: np.ndarray  # node ids that use atom type + charge rows
    atom_type: np.ndarray
    charge: np.ndarray
    kind: np.ndarray  # kind row per node


@dataclass
class ForwardCache:
    hier: HierGraph
    feature: _Feature
    inputs: list[np.ndarray] = field(default_factory=list)  # h entering each layer
    aggs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)  # a @ W1 + b1


def _features(hier: HierGraph, masked=()) -> _Feature:
    masked = set(int(i) for i in masked)
    kind = np.empty(hier.n_nodes, dtype=np.int64)
    rows, types, charges = [], [], []
    for i, node in enumerate(hier.nodes):
        if node.kind == ATOM and node.ref in masked:
            kind[i] = KIND_INDEX["mask"]
            continue
        kind[i] = KIND_INDEX[node.kind]
        if node.kind == ATOM:
            atom = hier.base.atoms[node.ref]
            z = atom.element if 0 < atom.element < N_ATOM_TYPES else 0
            q = min(max(atom.formal_charge, CHARGE_MIN), CHARGE_MAX) - CHARGE_MIN
            rows.append(i)
            types.append(z)
            charges.append(q)
    as_int = lambda xs: np.asarray(xs, dtype=np.int64)  # noqa: E731
    return _Feature(as_int(rows), as_int(types), as_int(charges), kind)


def embed_features(hier: HierGraph, params: EncoderParams, masked=()) -> NodeEmbeddings:
    """Layer-0 node features. ``masked`` holds atom indices to replace by the mask row."""
    return NodeEmbeddings(_embed(_features(hier, masked), params), 0)


def _embed(feat: _Feature, params: EncoderParams) -> np.ndarray:
    h = np.zeros((len(feat.kind), params.hidden))
    r = feat.atom_rows
    h[r] = params["atom_type"][feat.atom_type] + params["charge"][feat.charge]
    h += params["kind"][feat.kind]
    return h


def gin_forward(hier: HierGraph, params: EncoderParams, masked=(), *, keep: bool = False):
    """Final-layer embeddings for every node of ``hier``.

    With ``keep=True`` returns ``(NodeEmbeddings, ForwardCache)`` for :func:`gin_backward`.
    """
    feat = _features(hier, masked)
    cache = ForwardCache(hier, feat)
    indptr, indices, etype = hier.csr()
    h = _embed(feat, params)
    for layer in range(params.layers):
        edge, eps, w1, b1, w2, b2 = _layer_names(layer)
        agg = kernels.gin_aggregate(h, float(params[eps][0]), indptr, indices, etype, params[edge])
        z = agg @ params[w1] + params[b1]
        if keep:
            cache.inputs.append(h)
            cache.aggs.append(agg)
            cache.pre.append(z)
        h = np.maximum(z, 0.0) @ params[w2] + params[b2]
    out = NodeEmbeddings(h, params.layers)
    return (out, cache) if keep else out


def gin_backward(cache: ForwardCache, grad_out: np.ndarray, params: EncoderParams,
                 grads: dict[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Accumulate d(scalar)/d(param) into ``grads`` given d(scalar)/d(output)."""
    if grads is None:
        grads = params.zeros_like()
    indptr, indices, etype = cache.hier.csr()
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    g = grad_out
    for layer in reversed(range(params.layers)):
        edge, eps, w1, b1, w2, b2 = _layer_names(layer)
        h, agg, z = cache.inputs[layer], cache.aggs[layer], cache.pre[layer]
        act = np.maximum(z, 0.0)
        grads[w2] += act.T @ g
        grads[b2] += g.sum(axis=0)
        gz = (g @ params[w2].T) * (z > 0)
        grads[w1] += agg.T @ gz
        grads[b1] += gz.sum(axis=0)
        gagg = gz @ params[w1].T
        grads[eps] += np.sum(gagg * h)
        gh = (1.0 + params[eps][0]) * gagg
        msg = gagg[rows]
        np.add.at(gh, indices, msg)
        np.add.at(grads[edge], etype, msg)
        g = gh
    feat = cache.feature
    np.add.at(grads["kind"], feat.kind, g)
    np.add.at(grads["atom_type"], feat.atom_type, g[feat.atom_rows])
    np.add.at(grads["charge"], feat.charge, g[feat.atom_rows])
    return grads


def readout(embeddings: NodeEmbeddings | np.ndarray, subset) -> np.ndarray:
    """Mean of the rows listed in ``subset``."""
    mat = embeddings.matrix if isinstance(embeddings, NodeEmbeddings) else embeddings
    idx = np.asarray(list(subset), dtype=np.int64)
    if idx.size == 0:
        raise EmptySubsetError("readout over an empty node subset")
    return mat[idx].sum(axis=0) / idx.size
