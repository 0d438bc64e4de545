"""Partitioned VQ codebooks and the masked-reconstruction tokenizer trainer."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import checkpoint
from .brics import fragment
from .chem import Molecule
from .encoder import EncoderParams, gin_backward, gin_forward, init_encoder
from .hier import ATOM, HierGraph, build_hier

log = logging.getLogger(__name__)

ATOM_CLASSES = ("carbon", "nitrogen", "oxygen", "other")
MOTIF_CLASSES = ("motif",)
# One-hot atom-type targets: the common organic elements, then a catch-all.
TARGET_ELEMENTS = (6, 7, 8, 16, 15, 9, 17, 35, 53, 5)
ATOM_TARGET_DIM = len(TARGET_ELEMENTS) + 1
MOTIF_BUCKETS = 32


class CodebookError(ValueError):
    pass


class TrainingDiverged(ArithmeticError):
    def __init__(self, step: int, trace: list["TraceRow"]):
        super().__init__(f"loss became non-finite at step {step}")
        self.step = step
        self.trace = trace


def element_class(element: int) -> str:
    return {6: "carbon", 7: "nitrogen", 8: "oxygen"}.get(element, "other")


@dataclass
class Codebook:
    embeddings: np.ndarray
    partition: dict[str, tuple[int, int]]
    level: str

    def __post_init__(self):
        spans = sorted(self.partition.values())
        pos = 0
        for lo, hi in spans:
            if lo != pos or hi <= lo:
                raise CodebookError(f"partition ranges must tile [0, K): {self.partition}")
            pos = hi
        if pos != len(self.embeddings):
            raise CodebookError(f"partition covers {pos} rows, codebook has {len(self.embeddings)}")

    @property
    def size(self) -> int:
        return len(self.embeddings)

    def span(self, cls: str) -> tuple[int, int]:
        try:
            return self.partition[cls]
        except KeyError:
            raise CodebookError(f"unknown code class {cls!r} for {self.level} codebook") from None


def make_codebook(level: str, classes, size: int, dim: int, rng: np.random.Generator) -> Codebook:
    if size % len(classes):
        raise CodebookError(f"codebook size {size} does not split evenly over {len(classes)} classes")
    per = size // len(classes)
    part = {c: (i * per, (i + 1) * per) for i, c in enumerate(classes)}
    return Codebook(rng.normal(size=(size, dim)) / np.sqrt(dim), part, level)


def quantize(h: np.ndarray, codebook: Codebook, cls: str) -> tuple[int, float]:
    """Nearest row inside the class range; ties go to the lowest index."""
    lo, hi = codebook.span(cls)
    d = np.sqrt(np.sum((codebook.embeddings[lo:hi] - h) ** 2, axis=1))
    j = int(np.argmin(d))
    return lo + j, float(d[j])


def quantize_many(h: np.ndarray, codebook: Codebook, classes) -> tuple[np.ndarray, np.ndarray]:
    idx = np.empty(len(h), dtype=np.int64)
    dist = np.empty(len(h))
    for cls in dict.fromkeys(classes):
        rows = np.array([i for i, c in enumerate(classes) if c == cls], dtype=np.int64)
        lo, hi = codebook.span(cls)
        block = codebook.embeddings[lo:hi]
        d = np.sqrt(np.sum((h[rows][:, None, :] - block[None, :, :]) ** 2, axis=2))
        j = np.argmin(d, axis=1)
        idx[rows] = lo + j
        dist[rows] = d[np.arange(len(rows)), j]
    return idx, dist


@dataclass
class Decoder:
    weight: np.ndarray  # dim x target_dim
    bias: np.ndarray


@dataclass
class LossTerms:
    term1: float
    term2: float
    term3: float

    @property
    def total(self) -> float:
        return self.term1 + self.term2 + self.term3


@dataclass
class LossGrads:
    h: np.ndarray
    codebook: np.ndarray  # full K x dim
    dec_weight: np.ndarray
    dec_bias: np.ndarray


def reconstruction_loss(
    h: np.ndarray,
    codes: np.ndarray,
    targets: np.ndarray,
    codebook: np.ndarray,
    decoder: Decoder,
    gamma: float,
    beta: float,
    *,
    h_const: np.ndarray | None = None,
    e_const: np.ndarray | None = None,
    straight_through: bool = True,
    normalize_commitment: bool = False,
) -> tuple[LossTerms, LossGrads]:
    """Masked-reconstruction VQ loss and its gradients.

    ``term1 = mean((1 - cos(v, v_hat))**gamma)`` with ``v_hat`` decoded from the
    code row (straight-through to ``h``), ``term2 = mean(|sg(h) - e|^2)`` and
    ``term3 = beta/2 * sum(|sg(e) - h|^2)``; term 3 is divided by the node count
    only when ``normalize_commitment`` is set.

    ``h_const``/``e_const`` are the stop-gradient copies; they default to the
    live values. Passing frozen copies lets finite differences probe the
    same function the analytic gradient describes.
    """
    n = len(h)
    e = codebook[codes]
    hc = h if h_const is None else h_const
    ec = e if e_const is None else e_const
    q = e + (h - hc) if straight_through else e
    vhat = q @ decoder.weight + decoder.bias

    vn = np.linalg.norm(targets, axis=1)
    hn = np.linalg.norm(vhat, axis=1)
    ok = (vn > 0) & (hn > 0)
    cos = np.zeros(n)
    cos[ok] = np.sum(targets[ok] * vhat[ok], axis=1) / (vn[ok] * hn[ok])
    gap = 1.0 - cos
    t1 = float(np.sum(gap**gamma) / n)
    diff2 = hc - e
    t2 = float(np.sum(diff2**2) / n)
    diff3 = h - ec
    scale3 = beta / n if normalize_commitment else beta
    t3 = float(0.5 * scale3 * np.sum(diff3**2))

    coef = np.zeros(n)
    coef[ok] = -gamma * gap[ok] ** (gamma - 1.0) / n
    g_vhat = np.zeros_like(vhat)
    g_vhat[ok] = coef[ok, None] * (
        targets[ok] / (vn[ok, None] * hn[ok, None]) - cos[ok, None] * vhat[ok] / (hn[ok, None] ** 2)
    )
    g_q = g_vhat @ decoder.weight.T
    g_e = g_q - 2.0 * diff2 / n
    g_code = np.zeros_like(codebook)
    np.add.at(g_code, codes, g_e)
    g_h = scale3 * diff3
    if straight_through:
        g_h = g_h + g_q
    return LossTerms(t1, t2, t3), LossGrads(g_h, g_code, q.T @ g_vhat, g_vhat.sum(axis=0))


def mask_count(n: int, rate: float) -> int:
    # Round first so 0.15 * 20 counts as exactly 3.
    return min(n, math.ceil(round(rate * n, 9)))


def mask_atoms(mol: Molecule | int, rate: float, rng: np.random.Generator) -> np.ndarray:
    """Sorted indices of ``ceil(rate * n)`` atoms drawn without replacement."""
    if not 0.0 < rate < 1.0:
        raise ValueError(f"mask rate must be in (0, 1), got {rate}")
    n = mol if isinstance(mol, int) else mol.n_atoms
    k = mask_count(n, rate)
    return np.sort(rng.choice(n, size=k, replace=False)) if k else np.zeros(0, dtype=np.int64)


def atom_target(element: int) -> np.ndarray:
    v = np.zeros(ATOM_TARGET_DIM)
    v[TARGET_ELEMENTS.index(element) if element in TARGET_ELEMENTS else -1] = 1.0
    return v


def motif_target(size: int) -> np.ndarray:
    v = np.zeros(MOTIF_BUCKETS)
    v[min(max(size, 1), MOTIF_BUCKETS) - 1] = 1.0
    return v


@dataclass
class TrainConfig:
    gamma: float = 2.0
    beta: float = 0.25
    mask_rate: float = 0.15
    steps: int = 200
    step_size: float = 1e-3
    seed: int = 0
    batch_size: int = 8
    atom_codebook_size: int = 512
    motif_codebook_size: int = 512
    hidden: int = 300
    layers: int = 5
    normalize_commitment: bool = False

    def __post_init__(self):
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not 0 < self.mask_rate < 1:
            raise ValueError(f"mask_rate must be in (0, 1), got {self.mask_rate}")
        for name in ("gamma", "beta", "mask_rate", "step_size"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.steps < 0 or self.batch_size < 1:
            raise ValueError("steps must be >= 0 and batch_size >= 1")


@dataclass
class TraceRow:
    step: int
    term1: float
    term2: float
    term3: float

    @property
    def total(self) -> float:
        return self.term1 + self.term2 + self.term3


class Adam:
    def __init__(self, lr: float, b1: float = 0.9, b2: float = 0.999, eps: float = 1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            m = self.m.setdefault(k, np.zeros_like(g))
            v = self.v.setdefault(k, np.zeros_like(g))
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class Tokenizer:
    encoder: EncoderParams
    atom_codebook: Codebook
    motif_codebook: Codebook
    atom_decoder: Decoder
    motif_decoder: Decoder
    config: TrainConfig
    trace: list[TraceRow] = field(default_factory=list)
    usage: dict[str, np.ndarray] = field(default_factory=dict)

    def sections(self) -> dict[str, np.ndarray]:
        out = {"encoder/" + k: v for k, v in self.encoder.tensors.items()}
        for name, cb in (("atom", self.atom_codebook), ("motif", self.motif_codebook)):
            out[f"codebook/{name}"] = cb.embeddings
            out[f"codebook/{name}/partition"] = np.array(list(cb.partition.values()), dtype=np.int64)
        for name, dec in (("atom", self.atom_decoder), ("motif", self.motif_decoder)):
            out[f"decoder/{name}/weight"] = dec.weight
            out[f"decoder/{name}/bias"] = dec.bias
        return out

    def save(self, path) -> None:
        checkpoint.save(path, self.sections())

    @classmethod
    def load(cls, path, config: TrainConfig | None = None) -> "Tokenizer":
        s = checkpoint.load(path)

        def book(name, classes, level):
            spans = s[f"codebook/{name}/partition"]
            return Codebook(s[f"codebook/{name}"], {c: (int(a), int(b)) for c, (a, b) in zip(classes, spans)}, level)

        return cls(
            EncoderParams.from_sections(s),
            book("atom", ATOM_CLASSES, "atom"),
            book("motif", MOTIF_CLASSES, "motif"),
            Decoder(s["decoder/atom/weight"], s["decoder/atom/bias"]),
            Decoder(s["decoder/motif/weight"], s["decoder/motif/bias"]),
            config or TrainConfig(),
        )


def init_tokenizer(config: TrainConfig) -> Tokenizer:
    seqs = np.random.SeedSequence(config.seed).spawn(3)
    enc = init_encoder(int(seqs[0].generate_state(1)[0]), config.hidden, config.layers)
    rng = np.random.default_rng(seqs[1])
    atom_cb = make_codebook("atom", ATOM_CLASSES, config.atom_codebook_size, config.hidden, rng)
    motif_cb = make_codebook("motif", MOTIF_CLASSES, config.motif_codebook_size, config.hidden, rng)
    bound = 1.0 / np.sqrt(config.hidden)
    dec_a = Decoder(rng.uniform(-bound, bound, (config.hidden, ATOM_TARGET_DIM)), np.zeros(ATOM_TARGET_DIM))
    dec_m = Decoder(rng.uniform(-bound, bound, (config.hidden, MOTIF_BUCKETS)), np.zeros(MOTIF_BUCKETS))
    return Tokenizer(enc, atom_cb, motif_cb, dec_a, dec_m, config)


def node_targets(hier: HierGraph) -> tuple[list[int], list[str], np.ndarray, list[int], np.ndarray]:
    """Atom node ids, their code classes and targets; supernode ids and their targets."""
    atoms = hier.indices(ATOM)
    classes = [element_class(hier.base.atoms[hier.nodes[i].ref].element) for i in atoms]
    a_t = np.stack([atom_target(hier.base.atoms[hier.nodes[i].ref].element) for i in atoms]) if atoms else np.zeros((0, ATOM_TARGET_DIM))
    supers = [i for i in range(hier.n_nodes) if hier.nodes[i].kind != ATOM]
    m_t = np.stack([motif_target(len(hier.motifs[i - hier.n_atoms])) for i in supers]) if supers else np.zeros((0, MOTIF_BUCKETS))
    return atoms, classes, a_t, supers, m_t


def _batch_objective(tok: Tokenizer, hiers, masks):
    """Forward over a batch; returns summed terms and the gradient dict."""
    cfg = tok.config
    enc = tok.encoder
    outs = []
    for hier, mask in zip(hiers, masks):
        emb, cache = gin_forward(hier, enc, mask, keep=True)
        outs.append((hier, emb.matrix, cache) + node_targets(hier))

    H_a = np.concatenate([o[1][o[3]] for o in outs])
    cls_a = [c for o in outs for c in o[4]]
    T_a = np.concatenate([o[5] for o in outs])
    H_m = np.concatenate([o[1][o[6]] for o in outs])
    T_m = np.concatenate([o[7] for o in outs])

    z_a, _ = quantize_many(H_a, tok.atom_codebook, cls_a)
    z_m, _ = quantize_many(H_m, tok.motif_codebook, ["motif"] * len(H_m))
    la, ga = reconstruction_loss(H_a, z_a, T_a, tok.atom_codebook.embeddings, tok.atom_decoder,
                                 cfg.gamma, cfg.beta, normalize_commitment=cfg.normalize_commitment)
    lm, gm = reconstruction_loss(H_m, z_m, T_m, tok.motif_codebook.embeddings, tok.motif_decoder,
                                 cfg.gamma, cfg.beta, normalize_commitment=cfg.normalize_commitment)

    grads = {"encoder/" + k: v for k, v in enc.zeros_like().items()}
    enc_grads = {k[len("encoder/"):]: v for k, v in grads.items()}
    pa = pm = 0
    for hier, mat, cache, atoms, _, _, supers, _ in outs:
        g = np.zeros_like(mat)
        g[atoms] = ga.h[pa : pa + len(atoms)]
        g[supers] = gm.h[pm : pm + len(supers)]
        pa += len(atoms)
        pm += len(supers)
        gin_backward(cache, g, enc, enc_grads)
    grads["codebook/atom"] = ga.codebook
    grads["codebook/motif"] = gm.codebook
    grads["decoder/atom/weight"] = ga.dec_weight
    grads["decoder/atom/bias"] = ga.dec_bias
    grads["decoder/motif/weight"] = gm.dec_weight
    grads["decoder/motif/bias"] = gm.dec_bias
    terms = LossTerms(la.term1 + lm.term1, la.term2 + lm.term2, la.term3 + lm.term3)
    return terms, grads, z_a, z_m


def _param_view(tok: Tokenizer) -> dict[str, np.ndarray]:
    view = {"encoder/" + k: v for k, v in tok.encoder.tensors.items()}
    view["codebook/atom"] = tok.atom_codebook.embeddings
    view["codebook/motif"] = tok.motif_codebook.embeddings
    view["decoder/atom/weight"] = tok.atom_decoder.weight
    view["decoder/atom/bias"] = tok.atom_decoder.bias
    view["decoder/motif/weight"] = tok.motif_decoder.weight
    view["decoder/motif/bias"] = tok.motif_decoder.bias
    return view


def prepare_corpus(mols: list[Molecule]) -> list[HierGraph]:
    return [build_hier(m, fragment(m)) for m in mols]


def train(corpus: list[Molecule] | list[HierGraph], config: TrainConfig, tokenizer: Tokenizer | None = None) -> Tokenizer:
    """Train encoder, codebooks and decoders with Adam on masked reconstruction.

    Batches walk the corpus cyclically in input order; masks come from one
    seeded generator, so a run is reproducible from (corpus, config).
    The trace row for step ``s`` is the loss before update ``s``.

    Raises:
        TrainingDiverged: when a loss value is NaN or infinite; the exception
            carries the trace so far.
    """
    hiers = [c if isinstance(c, HierGraph) else build_hier(c, fragment(c)) for c in corpus]
    hiers = [h for h in hiers if h.n_atoms > 0]
    if not hiers and config.steps:
        raise ValueError("training corpus has no non-empty molecules")
    tok = tokenizer or init_tokenizer(config)
    tok.config = config
    mask_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(3)[2])
    opt = Adam(config.step_size)
    params = _param_view(tok)
    usage_a = np.zeros(tok.atom_codebook.size, dtype=np.int64)
    usage_m = np.zeros(tok.motif_codebook.size, dtype=np.int64)
    for step in range(config.steps):
        batch = [hiers[(step * config.batch_size + j) % len(hiers)] for j in range(config.batch_size)]
        masks = [mask_atoms(h.n_atoms, config.mask_rate, mask_rng) for h in batch]
        terms, grads, z_a, z_m = _batch_objective(tok, batch, masks)
        tok.trace.append(TraceRow(step, terms.term1, terms.term2, terms.term3))
        if not math.isfinite(terms.total):
            raise TrainingDiverged(step, tok.trace)
        np.add.at(usage_a, z_a, 1)
        np.add.at(usage_m, z_m, 1)
        opt.step(params, grads)
    tok.usage = {"atom": usage_a, "motif": usage_m}
    if config.steps:
        log.info("codes used: atom %d/%d, motif %d/%d", int((usage_a > 0).sum()), usage_a.size,
                 int((usage_m > 0).sum()), usage_m.size)
    return tok


def config_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)
