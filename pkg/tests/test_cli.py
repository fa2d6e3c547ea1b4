import json

import pytest

from siterank.cli import main
from siterank.config import ConfigError, EngineConfig, load_config


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def market(tmp_path_factory):
    """A small synthetic market ingested and trained once for the whole module."""
    root = tmp_path_factory.mktemp("cli")
    data, store = root / "data", root / "store"
    assert main(["--seed", "3", "synth", "--out", str(data), "--docs-per-website", "60",
                 "--n-queries", "20"]) == 0
    assert main(["--store", str(store), "ingest", str(data / "corpus.jsonl")]) == 0
    assert main(["--store", str(store), "--seed", "1", "train", "--k", "8"]) == 0
    return root, data, store


def test_ingest_counts(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text("".join(json.dumps({"website": w, "description": d, "category": "phone",
                                       "price": 10}) + "\n"
                           for w, d in [("A", "red"), ("A", "blue"), ("B", "red")]))
    code, out, _ = run(capsys, "--store", str(tmp_path / "s"), "ingest", str(src))
    assert code == 0
    assert "accepted: 3, rejected: 0" in out
    code, out, _ = run(capsys, "--json", "--store", str(tmp_path / "s"), "ingest", str(src))
    payload = json.loads(out)
    assert payload["accepted"] == 3 and payload["total_documents"] == 6
    assert payload["websites"] == ["A", "B"]


def test_ingest_nothing_accepted(tmp_path, capsys, caplog):
    src = tmp_path / "bad.jsonl"
    src.write_text('{"website": "A", "description": "x", "category": "c", "price": -5}\n')
    code, out, _ = run(capsys, "--store", str(tmp_path / "s"), "ingest", str(src))
    assert code == 4
    assert "accepted: 0, rejected: 1" in out
    assert "bad.jsonl:1: rejected" in caplog.text


def test_missing_input_and_store(tmp_path, capsys):
    code, _, err = run(capsys, "--store", str(tmp_path / "s"), "ingest", str(tmp_path / "nope"))
    assert code == 2 and "nope" in err
    code, _, err = run(capsys, "--store", str(tmp_path / "empty"), "train")
    assert code == 3 and "ingest" in err


def test_train_deterministic_checksum(market, capsys):
    _, _, store = market
    code, out, _ = run(capsys, "--json", "--store", str(store), "--seed", "1", "train", "--k", "8")
    first = json.loads(out)
    code2, out2, _ = run(capsys, "--json", "--store", str(store), "--seed", "1", "train",
                         "--k", "8")
    second = json.loads(out2)
    assert code == code2 == 0
    assert first["model_sha256"] == second["model_sha256"]
    assert first["kind"] == "nmf" and first["k"] == 8
    assert first["final_objective"] <= first["objective_head"][0]
    assert (store / "nmf_objective.png").exists()


def test_topics(market, capsys):
    _, _, store = market
    code, out, _ = run(capsys, "--json", "--store", str(store), "topics", "--n-words", "5",
                       "--n-docs", "2")
    payload = json.loads(out)
    assert code == 0 and len(payload["topics"]) == 8
    for t in payload["topics"]:
        weights = [w["weight"] for w in t["words"]]
        assert len(weights) == 5 and weights == sorted(weights, reverse=True)
        assert len(t["documents"]) == 2


def test_recommend_modes(market, capsys):
    root, data, store = market
    query = json.loads((data / "queries.jsonl").read_text().splitlines()[0])
    common = ["--store", str(store), "recommend", "--description", query["description"],
              "--category", query["category"]]
    code, out, _ = run(capsys, "--json", *common, "--mode", "quantity")
    payload = json.loads(out)
    assert code == 0 and payload["criterion"] == "quantity"
    assert len(payload["entries"]) == 7
    code, out, _ = run(capsys, "--json", *common, "--mode", "avg-price", "--direction",
                       "ascending")
    payload = json.loads(out)
    prices = [e["score"] for e in payload["entries"]]
    assert code == 0 and prices == sorted(prices)
    code, out, _ = run(capsys, *common, "--mode", "quantity")
    assert out.splitlines()[0].split() == ["rank", "website", "quantity"]

    code, _, err = run(capsys, *common, "--mode", "votes", "--price", "100")
    assert code == 3 and "train-forest" in err
    assert main(["--store", str(store), "train-forest", "--n-trees", "5"]) == 0
    capsys.readouterr()
    code, _, err = run(capsys, *common, "--mode", "votes")
    assert code == 2 and "--price" in err
    code, out, _ = run(capsys, "--json", *common, "--mode", "votes", "--price",
                       str(query["price"]))
    payload = json.loads(out)
    assert code == 0 and sum(e["score"] for e in payload["entries"]) == 5


def test_evaluate_writes_csv_and_figures(market, capsys):
    root, data, store = market
    out_dir = root / "report"
    code, out, _ = run(capsys, "--json", "--store", str(store), "evaluate", "--judgments",
                       str(data / "judgments.json"), "--sweep", "topics", "--kind", "nmf,bow",
                       "--values", "4,8", "--out", str(out_dir))
    payload = json.loads(out)
    assert code == 0
    for name in ("sweep_nmf_quantity.csv", "sweep_bow_average_price.csv",
                 "sweep_topics_quantity.png", "sweep_topics_average_price.png"):
        assert (out_dir / name).exists()
    lines = (out_dir / "sweep_nmf_quantity.csv").read_text().splitlines()
    assert lines[0] == "param,mean_ndpm,n_queries,n_skipped" and len(lines) == 3
    assert len(payload["nmf/quantity"]) == 2

    code, _, _ = run(capsys, "--store", str(store), "evaluate", "--judgments",
                     str(data / "judgments.json"), "--sweep", "trees", "--values", "1,3",
                     "--out", str(out_dir))
    assert code == 0
    assert (out_dir / "sweep_trees_nmf.csv").exists() and (out_dir / "sweep_trees_nmf.png").exists()
    code, _, _ = run(capsys, "--store", str(store), "evaluate", "--judgments",
                     str(data / "judgments.json"), "--sweep", "trees", "--values", ",",
                     "--out", str(out_dir))
    assert code == 2


def test_synth_json(tmp_path, capsys):
    code, out, _ = run(capsys, "--json", "--seed", "9", "synth", "--out", str(tmp_path),
                       "--docs-per-website", "10", "--n-queries", "4")
    payload = json.loads(out)
    assert code == 0 and payload["documents"] == 70 and payload["queries"] == 4
    assert payload["planted_topics"] == 10
    assert (tmp_path / "spec.json").exists()
    code, _, _ = run(capsys, "synth", "--spec", str(tmp_path / "corpus.jsonl"), "--out",
                     str(tmp_path / "x"))
    assert code == 2


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "engine.cfg"
    cfg.write_text(f"# engine settings\nstore_path = {tmp_path / 'st'}\nk = 4\n"
                   "similarity_threshold = 0.3\n")
    loaded = load_config(cfg)
    assert loaded.k == 4 and loaded.similarity_threshold == 0.3
    assert loaded.update(k=None, seed=7).seed == 7 and loaded.k == 4
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    code, _, err = run(capsys, "--config", str(bad), "synth", "--out", str(tmp_path / "o"))
    assert code == 2 and "colour" in err
    with pytest.raises(ConfigError):
        EngineConfig(similarity_threshold=2.0).validate()
