"""Token streams: node-only and hierarchical (node, motif, graph) sequences.

Each token's input is the final GIN embedding concatenated with the node's
8-dim Laplacian encoding, mapped through the adapter for its kind.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .encoder import EncoderParams, gin_forward
from .hier import ATOM, GRAPH, MOTIF, PE_DIM, HierGraph, atom_graph, laplacian_pe
from .chem import Molecule

NODE, MOTIF_TOKEN, GRAPH_TOKEN = "node", "motif", "graph"
TOKEN_KINDS = (NODE, MOTIF_TOKEN, GRAPH_TOKEN)
ADAPTER_KINDS = ("f_n", "f_m", "f_g")
_KIND_OF_NODE = {ATOM: NODE, MOTIF: MOTIF_TOKEN, GRAPH: GRAPH_TOKEN}
_ADAPTER_OF_KIND = dict(zip(TOKEN_KINDS, ADAPTER_KINDS))


class AdapterError(ValueError):
    pass


class TokenFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


@dataclass
class Adapter:
    kind: str
    weight: np.ndarray  # d_in x d_out
    bias: np.ndarray

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def identity(cls, kind: str, dim: int) -> "Adapter":
        return cls(kind, np.eye(dim), np.zeros(dim))

    @classmethod
    def zeros(cls, kind: str, d_in: int, d_out: int) -> "Adapter":
        return cls(kind, np.zeros((d_in, d_out)), np.zeros(d_out))

    @classmethod
    def random(cls, kind: str, d_in: int, d_out: int, rng: np.random.Generator) -> "Adapter":
        bound = 1.0 / np.sqrt(d_in)
        return cls(kind, rng.uniform(-bound, bound, (d_in, d_out)), np.zeros(d_out))

    def apply(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.d_in:
            raise AdapterError(f"adapter {self.kind} expects width {self.d_in}, got {x.shape[-1]}")
        return x @ self.weight + self.bias

    def backward(self, x: np.ndarray, grad_out: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Gradients w.r.t. (weight, bias, input)."""
        return x.T @ grad_out, grad_out.sum(axis=0), grad_out @ self.weight.T


def default_adapters(d_in: int) -> dict[str, Adapter]:
    return {k: Adapter.identity(k, d_in) for k in ADAPTER_KINDS}


@dataclass
class Token:
    kind: str
    source: int
    vector: np.ndarray


@dataclass
class TokenStream:
    mol_id: str
    tokens: list[Token] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def kinds(self) -> list[str]:
        return [t.kind for t in self.tokens]

    def matrix(self) -> np.ndarray:
        if not self.tokens:
            return np.zeros((0, 0))
        return np.stack([t.vector for t in self.tokens])


def token_inputs(hier: HierGraph, params: EncoderParams) -> np.ndarray:
    """Embedding and positional encoding side by side, one row per node."""
    pe = hier.pe if hier.pe is not None else laplacian_pe(hier)
    emb = gin_forward(hier, params).matrix
    return np.concatenate([emb, pe], axis=1)


def _stream(hier: HierGraph, params: EncoderParams, adapters: dict[str, Adapter], mol_id: str) -> TokenStream:
    x = token_inputs(hier, params)
    stream = TokenStream(mol_id)
    # Node order is already atoms, motif supernodes by id, then the graph supernode.
    for kind in TOKEN_KINDS:
        rows = [i for i, node in enumerate(hier.nodes) if _KIND_OF_NODE[node.kind] == kind]
        if not rows:
            continue
        adapter = adapters[_ADAPTER_OF_KIND[kind]]
        out = adapter.apply(x[rows])
        stream.tokens.extend(Token(kind, hier.nodes[r].ref, out[j]) for j, r in enumerate(rows))
    return stream


def node_centric_stream(mol: Molecule, params: EncoderParams, adapter_n: Adapter, mol_id: str = "") -> TokenStream:
    """One token per atom from the plain molecular graph (PE over that graph too)."""
    return _stream(atom_graph(mol), params, {"f_n": adapter_n}, mol_id)


def hight_stream(hier: HierGraph, params: EncoderParams, adapters: dict[str, Adapter], mol_id: str = "") -> TokenStream:
    """Atom tokens, then motif tokens by motif id, then the graph token."""
    missing = [k for k in ADAPTER_KINDS if k not in adapters]
    if missing:
        raise AdapterError(f"missing adapters: {', '.join(missing)}")
    widths = {a.d_out for a in adapters.values()}
    if len(widths) != 1:
        raise AdapterError(f"adapters disagree on output width: {sorted(widths)}")
    return _stream(hier, params, adapters, mol_id)


def _fmt(x: float) -> str:
    s = format(float(x), ".17g")
    # Keep a float literal so -0.0 survives the JSON round trip.
    return s if any(c in s for c in ".eni") else s + ".0"


def serialize(stream: TokenStream) -> bytes:
    """JSON Lines, one token per line; floats carry 17 significant digits."""
    mol = json.dumps(stream.mol_id)
    lines = []
    for i, tok in enumerate(stream.tokens):
        vec = ",".join(_fmt(x) for x in tok.vector)
        lines.append(f'{{"mol":{mol},"i":{i},"kind":"{tok.kind}","src":{tok.source},"v":[{vec}]}}\n')
    return "".join(lines).encode("utf-8")


def _parse_line(lineno: int, text: str) -> tuple[str, int, Token]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TokenFormatError(lineno, f"invalid JSON at column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise TokenFormatError(lineno, "expected a JSON object")
    missing = {"mol", "i", "kind", "src", "v"} - obj.keys()
    if missing:
        raise TokenFormatError(lineno, f"missing keys {sorted(missing)}")
    if obj["kind"] not in TOKEN_KINDS:
        raise TokenFormatError(lineno, f"unknown token kind {obj['kind']!r}")
    if not isinstance(obj["i"], int) or not isinstance(obj["src"], int) or isinstance(obj["src"], bool):
        raise TokenFormatError(lineno, "'i' and 'src' must be integers")
    v = obj["v"]
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise TokenFormatError(lineno, "'v' must be a list of numbers")
    return str(obj["mol"]), obj["i"], Token(obj["kind"], obj["src"], np.array(v, dtype=np.float64))


def iter_streams(data: bytes):
    """Yield streams from JSON Lines, grouping consecutive lines by molecule id."""
    current: TokenStream | None = None
    for lineno, raw in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        mol, pos, tok = _parse_line(lineno, raw)
        if current is None or mol != current.mol_id or pos == 0:
            if current is not None:
                yield current
            current = TokenStream(mol)
        if pos != len(current.tokens):
            raise TokenFormatError(lineno, f"expected position {len(current.tokens)}, got {pos}")
        current.tokens.append(tok)
    if current is not None:
        yield current


def deserialize(data: bytes) -> TokenStream:
    streams = list(iter_streams(data))
    if not streams:
        return TokenStream("")
    if len(streams) > 1:
        raise TokenFormatError(0, f"found {len(streams)} streams; use iter_streams")
    return streams[0]


__all__ = [
    "Adapter", "AdapterError", "Token", "TokenStream", "TokenFormatError", "PE_DIM",
    "default_adapters", "deserialize", "hight_stream", "iter_streams", "node_centric_stream",
    "serialize", "token_inputs",
]
