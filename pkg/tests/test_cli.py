import json

import pytest

from molhier import cli
from molhier.hier import EigenSolverError

CORPUS = (
    "CCO\tEthanol.\n"
    "CC(=O)OC(CC(=O)[O-])C[N+](C)(C)C\tAn O-acylcarnitine.\n"
    "# comment\n"
    "CC(=O)Nc1ccc(O)cc1\tParacetamol.\n"
    "c1ccccc1\n"
)


@pytest.fixture()
def corpus(tmp_path):
    p = tmp_path / "corpus.smi"
    p.write_text(CORPUS)
    return p


def _run(argv, capsys):
    code = cli.run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("command", cli.SUBCOMMANDS)
def test_help_lists_every_flag_with_default(command, capsys):
    with pytest.raises(SystemExit) as info:
        cli.run([command, "--help"])
    assert info.value.code == 0
    text = " ".join(capsys.readouterr().out.split())
    for flag in ("--config", "--seed", "--jobs", "--registry", "--out"):
        assert flag in text
    sub = cli.build_parser()._subparsers._group_actions[0].choices[command]
    for action in sub._actions:
        if action.option_strings and action.dest != "help":
            assert "(default:" in " ".join((action.help or "").split()), action.dest


def test_detect_fg(corpus, capsys):
    code, out, _ = _run(["detect-fg", corpus], capsys)
    rows = [json.loads(line) for line in out.splitlines()]
    assert code == 0 and len(rows) == 4
    assert rows[1]["groups"]["carboxylic acids"] == 1
    assert rows[0]["id"] == "corpus.smi:1" and rows[2]["id"] == "corpus.smi:4"


def test_tokenize_hight_ethanol(tmp_path, capsys):
    p = tmp_path / "e.smi"
    p.write_text("CCO\n")
    code, out, _ = _run(["tokenize", p, "--mode", "hight"], capsys)
    assert code == 0
    kinds = [json.loads(line)["kind"] for line in out.splitlines()]
    assert kinds == ["node", "node", "node", "motif", "graph"]
    code, out, _ = _run(["tokenize", p, "--mode", "node", "--adapter-dim", "16"], capsys)
    assert len(out.splitlines()) == 3 and len(json.loads(out.splitlines()[0])["v"]) == 16


def test_eval_all_yes(corpus, tmp_path, capsys):
    out_dir = tmp_path / "qa"
    assert _run(["gen-motifhallu", corpus, "--out", out_dir], capsys)[0] == 0
    items = [json.loads(line) for line in (out_dir / "motifhallu.jsonl").read_text().splitlines()]
    pred = tmp_path / "pred.jsonl"
    pred.write_text("".join(json.dumps({"id": i["id"], "answer": "Yes"}) + "\n" for i in items))
    code, out, _ = _run(["eval-hallu", out_dir / "motifhallu.jsonl", pred, "--out", tmp_path / "rep"], capsys)
    report = json.loads((tmp_path / "rep" / "report.json").read_text())
    assert code == 0 and report["yes_ratio"] == 100.0 and report["f1_neg"] == 0.0


def test_input_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.smi"
    bad.write_text("CCO\nC1CC\n")
    code, _, err = _run(["fragment", bad], capsys)
    assert code == 1 and "bad.smi:2" in err
    code, _, err = _run(["parse", tmp_path / "missing.smi"], capsys)
    assert code == 1
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour = blue\n")
    code, _, err = _run(["parse", bad, "--config", cfg], capsys)
    assert code == 1 and "c.cfg:1" in err
    gold = tmp_path / "g.jsonl"
    gold.write_text('{"id": "a", "answer": "Yes"}\n')
    pred = tmp_path / "p.jsonl"
    pred.write_text('{"id": "a", "answer": "Yes"}\n{"id": "a", "answer": "No"}\n')
    assert _run(["eval-hallu", gold, pred], capsys)[0] == 1


def test_numerical_failure_exits_2(corpus, monkeypatch, capsys):
    def boom(hier, dim=8):
        raise EigenSolverError("forced", 1.0)

    monkeypatch.setattr(cli, "laplacian_pe", boom)
    code, _, err = _run(["build-hier", corpus, "--dump"], capsys)
    assert code == 2 and "numerical" in err


def test_config_file_and_flag_precedence(corpus, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# toy\nseed = 5\nn_neg = 2\n")
    _run(["gen-motifhallu", corpus, "--config", cfg, "--out", tmp_path / "a"], capsys)
    echoed = (tmp_path / "a" / "config.txt").read_text()
    assert "seed = 5" in echoed and "n_neg = 2" in echoed
    _run(["gen-motifhallu", corpus, "--config", cfg, "--seed", "9", "--out", tmp_path / "b"], capsys)
    assert "seed = 9" in (tmp_path / "b" / "config.txt").read_text()
    rows = [json.loads(x) for x in (tmp_path / "a" / "motifhallu.jsonl").read_text().splitlines()]
    assert sum(r["answer"] == "No" for r in rows) == 2 * 4


def test_train_tokenizer_writes_trace(corpus, tmp_path, capsys):
    out = tmp_path / "tok"
    code, _, _ = _run(["train-tokenizer", corpus, "--steps", "3", "--out", out], capsys)
    assert code == 0
    lines = (out / "trace.csv").read_text().splitlines()
    assert lines[0] == "step,term1,term2,term3,total" and len(lines) == 4
    code, stdout, _ = _run(["tokenize", corpus, "--checkpoint", out / "tokenizer.bin"], capsys)
    assert code == 0 and len(stdout.splitlines()) > 4
    assert _run(["train-tokenizer", corpus, "--steps", "1"], capsys)[0] == 1
