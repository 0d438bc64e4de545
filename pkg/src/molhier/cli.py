"""``molhier`` command-line interface.

Exit codes: 0 success, 1 input-contract error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from functools import lru_cache, partial
from pathlib import Path

import numpy as np

from . import __version__
from .brics import brics_cleavable_bonds, fragment
from .checkpoint import CheckpointError
from .chem import SmilesError, implicit_hydrogens, parse_smiles, read_corpus
from .config import DEFAULTS, ConfigError, RunConfig, build_config, read_config
from .datagen import augment_caption, molecule_rng, qa_for_molecule
from .encoder import EncoderParams, init_encoder
from .fgroups import RegistryError, default_registry, detect_functional_groups, load_registry
from .hier import EigenSolverError, HierarchyError, build_hier, laplacian_pe
from .metrics import EvalError, read_gold, read_predictions, score
from .tokens import Adapter, TokenFormatError, hight_stream, node_centric_stream, serialize
from .vq import TrainConfig, TrainingDiverged, train

INPUT_ERRORS = (SmilesError, RegistryError, EvalError, TokenFormatError, ConfigError, CheckpointError,
                HierarchyError, FileNotFoundError, IsADirectoryError, UnicodeDecodeError)
NUMERIC_ERRORS = (EigenSolverError, TrainingDiverged, FloatingPointError)


class InputError(Exception):
    pass


# ---------------------------------------------------------------- workers


@lru_cache(maxsize=4)
def _registry(path: str):
    return load_registry(path) if path else default_registry()


@lru_cache(maxsize=2)
def _encoder(checkpoint: str, seed: int, hidden: int, layers: int) -> EncoderParams:
    if checkpoint:
        return EncoderParams.load(checkpoint)
    return init_encoder(seed, hidden, layers)


def _mol(entry):
    try:
        return parse_smiles(entry.smiles)
    except SmilesError as exc:
        raise InputError(f"{entry.id}: {exc}") from None


def _do_parse(cfg, ordinal, entry):
    mol = _mol(entry)
    return json.dumps({
        "id": entry.id,
        "smiles": entry.smiles,
        "atoms": [{"element": a.element, "charge": a.formal_charge, "aromatic": a.aromatic,
                   "hydrogens": implicit_hydrogens(mol, a.index), "in_ring": a.in_ring} for a in mol.atoms],
        "bonds": [[b.a, b.b, b.order, b.in_ring] for b in mol.bonds],
    })


def _do_detect(cfg, ordinal, entry):
    mol = _mol(entry)
    return json.dumps({"id": entry.id, "smiles": entry.smiles,
                       "groups": detect_functional_groups(mol, _registry(cfg.registry))})


def _do_fragment(cfg, ordinal, entry):
    mol = _mol(entry)
    motifs = fragment(mol)
    return json.dumps({"id": entry.id, "smiles": entry.smiles,
                       "cleavable": [list(b.atoms) for b in brics_cleavable_bonds(mol)],
                       "motifs": [list(m.atoms) for m in motifs[:-1]]})


def _do_hier(cfg, ordinal, entry, dump=False):
    mol = _mol(entry)
    hier = build_hier(mol, fragment(mol))
    rec = {"id": entry.id, "smiles": entry.smiles, "n_nodes": hier.n_nodes, "n_edges": len(hier.edges),
           "k": len(hier.motifs) - 1}
    if dump:
        rec["nodes"] = [[n.kind, n.ref] for n in hier.nodes]
        rec["edges"] = [[e.u, e.v, e.kind, e.order] for e in hier.edges]
        rec["pe"] = [[format(float(x), ".17g") for x in row] for row in laplacian_pe(hier)]
    return json.dumps(rec)


def _do_tokenize(cfg, ordinal, entry):
    mol = _mol(entry)
    params = _encoder(cfg.checkpoint, cfg.seed, cfg.hidden, cfg.layers)
    d_in = params.hidden + 8
    rng = np.random.default_rng(cfg.seed)
    if cfg.adapter_dim == d_in:
        adapters = {k: Adapter.identity(k, d_in) for k in ("f_n", "f_m", "f_g")}
    else:
        adapters = {k: Adapter.random(k, d_in, cfg.adapter_dim, rng) for k in ("f_n", "f_m", "f_g")}
    if cfg.mode == "node":
        stream = node_centric_stream(mol, params, adapters["f_n"], entry.id)
    else:
        stream = hight_stream(build_hier(mol, fragment(mol)), params, adapters, entry.id)
    return serialize(stream).decode("utf-8").rstrip("\n")


def _do_motifhallu(cfg, ordinal, entry):
    mol = _mol(entry)
    items = qa_for_molecule(entry.id, entry.smiles, mol, _registry(cfg.registry),
                            molecule_rng(cfg.seed, ordinal), cfg.n_neg)
    return "\n".join(i.to_json() for i in items)


def _do_augment(cfg, ordinal, entry):
    mol = _mol(entry)
    rec = augment_caption(entry.smiles, entry.caption or "", mol, _registry(cfg.registry), cfg.k_neg,
                          cfg.seed ^ ordinal)
    return rec.to_json()


def _run_one(fn, cfg, item):
    ordinal, entry = item
    try:
        return True, fn(cfg, ordinal, entry)
    except InputError as exc:
        return False, ("input", str(exc))
    except NUMERIC_ERRORS as exc:
        return False, ("numeric", f"{entry.id}: {exc}")


def _map_corpus(fn, cfg: RunConfig, entries) -> list[str]:
    """Apply ``fn`` to every entry, in input order, optionally across processes."""
    work = partial(_run_one, fn, cfg)
    items = list(enumerate(entries))
    if cfg.jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(work, items, chunksize=max(1, len(items) // (cfg.jobs * 4))))
    else:
        results = [work(it) for it in items]
    out = []
    for ok, value in results:
        if not ok:
            kind, msg = value
            if kind == "numeric":
                raise EigenSolverError(msg, float("nan"))
            raise InputError(msg)
        if value:
            out.append(value)
    return out


# ---------------------------------------------------------------- plumbing


def _emit(args, cfg: RunConfig, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text, encoding="utf-8")
    (out / "config.txt").write_text(cfg.render(), encoding="utf-8")


def _lines(rows: list[str]) -> str:
    return "".join(r + "\n" for r in rows)


def _corpus_command(fn, name):
    def run(args, cfg):
        entries = read_corpus(args.corpus)
        _emit(args, cfg, name, _lines(_map_corpus(fn, cfg, entries)))
    return run


def cmd_build_hier(args, cfg):
    entries = read_corpus(args.corpus)
    _emit(args, cfg, "hier.jsonl", _lines(_map_corpus(partial(_do_hier, dump=args.dump), cfg, entries)))


def cmd_train(args, cfg):
    if args.out is None:
        raise InputError("train-tokenizer needs --out DIR for the checkpoint")
    entries = read_corpus(args.corpus)
    mols = []
    for e in entries:
        mols.append(_mol(e))
    tcfg = TrainConfig(gamma=cfg.gamma, beta=cfg.beta, mask_rate=cfg.mask_rate, steps=cfg.steps,
                       step_size=cfg.step_size, seed=cfg.seed, batch_size=cfg.batch_size,
                       atom_codebook_size=cfg.atom_codebook_size, motif_codebook_size=cfg.motif_codebook_size,
                       hidden=cfg.hidden, layers=cfg.layers, normalize_commitment=cfg.normalize_commitment)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        tok = train(mols, tcfg)
    except TrainingDiverged as exc:
        _write_trace(out / "trace.csv", exc.trace)
        raise
    tok.save(out / "tokenizer.bin")
    _write_trace(out / "trace.csv", tok.trace)
    usage = {k: [int(x) for x in v] for k, v in tok.usage.items()}
    (out / "usage.json").write_text(json.dumps(usage) + "\n", encoding="utf-8")
    (out / "config.txt").write_text(cfg.render(), encoding="utf-8")
    if tok.trace:
        print(f"steps={len(tok.trace)} initial={tok.trace[0].total:.6g} final={tok.trace[-1].total:.6g}")


def _write_trace(path: Path, trace) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "term1", "term2", "term3", "total"])
    for r in trace:
        w.writerow([r.step] + [format(x, ".17g") for x in (r.term1, r.term2, r.term3, r.total)])
    path.write_text(buf.getvalue(), encoding="utf-8")


def cmd_eval(args, cfg):
    gold = read_gold(args.gold)
    report = score(read_predictions(args.pred), gold)
    sys.stdout.write(report.to_table())
    if args.out is not None:
        _emit(args, cfg, "report.json", report.to_json() + "\n")


# ---------------------------------------------------------------- parser


def _help(text: str, key: str) -> str:
    return f"{text} (default: {getattr(DEFAULTS, key)!s})"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key = value config file (default: none)")
    p.add_argument("--seed", type=int, help=_help("global random seed", "seed"))
    p.add_argument("--jobs", type=int, help=_help("worker processes", "jobs"))
    p.add_argument("--registry", metavar="PATH", help="functional-group registry file (default: bundled table)")
    p.add_argument("--out", metavar="PATH", help="output directory (default: write to stdout)")


SUBCOMMANDS = ("parse", "detect-fg", "fragment", "build-hier", "tokenize", "train-tokenizer",
               "gen-motifhallu", "augment-captions", "eval-hallu")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="molhier", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"molhier {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def corpus_cmd(name, helptext, func):
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("corpus", help="SMILES file, one molecule per line, optional TAB caption")
        _common(p)
        p.set_defaults(func=func)
        return p

    corpus_cmd("parse", "parse SMILES and print atoms and bonds as JSON Lines",
               _corpus_command(_do_parse, "parse.jsonl"))
    corpus_cmd("detect-fg", "count functional groups per molecule",
               _corpus_command(_do_detect, "fg.jsonl"))
    corpus_cmd("fragment", "list BRICS bonds and motifs per molecule",
               _corpus_command(_do_fragment, "fragments.jsonl"))
    p = corpus_cmd("build-hier", "build supernode graphs and report their sizes", cmd_build_hier)
    p.add_argument("--dump", action="store_true", help="include node, edge and PE lists (default: off)")
    p = corpus_cmd("tokenize", "write token streams as JSON Lines", _corpus_command(_do_tokenize, "tokens.jsonl"))
    p.add_argument("--mode", choices=("node", "hight"), help=_help("stream layout", "mode"))
    p.add_argument("--checkpoint", metavar="PATH", help="trained tokenizer or encoder file (default: seeded init)")
    p.add_argument("--adapter-dim", type=int, help=_help("adapter output width; 308 gives identity adapters", "adapter_dim"))
    p = corpus_cmd("train-tokenizer", "train the VQ tokenizer; writes tokenizer.bin and trace.csv", cmd_train)
    p.add_argument("--steps", type=int, help=_help("optimizer steps", "steps"))
    p.add_argument("--batch-size", type=int, help=_help("molecules per step", "batch_size"))
    p.add_argument("--step-size", type=float, help=_help("Adam learning rate", "step_size"))
    p.add_argument("--gamma", type=float, help=_help("reconstruction exponent", "gamma"))
    p.add_argument("--beta", type=float, help=_help("commitment weight", "beta"))
    p.add_argument("--mask-rate", type=float, help=_help("fraction of atoms masked", "mask_rate"))
    p.add_argument("--normalize-commitment", action="store_const", const=True,
                   help=_help("divide the commitment term by the node count", "normalize_commitment"))
    p = corpus_cmd("gen-motifhallu", "generate yes/no functional-group questions",
                   _corpus_command(_do_motifhallu, "motifhallu.jsonl"))
    p.add_argument("--n-neg", type=int, help=_help("negative questions per molecule", "n_neg"))
    p = corpus_cmd("augment-captions", "prefix captions with functional-group sentences",
                   _corpus_command(_do_augment, "captions.jsonl"))
    p.add_argument("--k-neg", type=int, help=_help("groups named in the negative sentence", "k_neg"))

    p = sub.add_parser("eval-hallu", help="score predictions against generated questions",
                       description="score predictions against generated questions")
    p.add_argument("gold", help="question file from gen-motifhallu")
    p.add_argument("pred", help="predictions, JSON Lines with id, answer and optional score")
    _common(p)
    p.set_defaults(func=cmd_eval)
    return parser


_FLAG_KEYS = ("seed", "jobs", "registry", "mode", "checkpoint", "adapter_dim", "steps", "batch_size", "step_size",
              "gamma", "beta", "mask_rate", "normalize_commitment", "n_neg", "k_neg")


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_values = read_config(args.config) if args.config else {}
        overrides = {k: getattr(args, k, None) for k in _FLAG_KEYS}
        cfg = build_config(file_values, overrides)
        if cfg.registry:
            _registry(cfg.registry)
        args.func(args, cfg)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"molhier {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"molhier {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"molhier {args.command}: numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    try:
        code = run()
        sys.stdout.flush()
    except BrokenPipeError:
        # Reader went away (e.g. piped into head); silence the final flush.
        devnull = open(os.devnull, "w")
        os.dup2(devnull.fileno(), sys.stdout.fileno())
        code = 0
    sys.exit(code)


if __name__ == "__main__":
    main()
