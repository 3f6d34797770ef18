import json
from pathlib import Path

from godspell.cli import main
from godspell.corpus import read_passages

FIXTURES = Path(__file__).parent / "fixtures"
CONFIG = str(FIXTURES / "runconfig.json")


def run(*args):
    return main(list(args))


class TestDispatch:
    def test_unknown_subcommand_exit_64(self, capsys):
        assert run("frobnicate", "--config", CONFIG) == 64
        assert "usage:" in capsys.readouterr().err

    def test_no_args_exit_64(self, capsys):
        assert run() == 64

    def test_help_exit_0(self, capsys):
        assert run("--help") == 0
        assert "subcommands:" in capsys.readouterr().out

    def test_bad_flag_exit_64(self, capsys):
        assert run("segment", "--config", CONFIG, "--no-such-flag") == 64

    def test_missing_config_exit_1(self, capsys):
        assert run("segment", "--config", "/nonexistent/run.json") == 1
        assert "config error" in capsys.readouterr().err


class TestSubcommands:
    def test_segment_contiguity(self, tmp_path, capsys):
        assert run("segment", "--config", CONFIG, "--output", str(tmp_path)) == 0
        passages = read_passages(tmp_path / "passages.jsonl")
        by_novel = {}
        for p in passages:
            by_novel.setdefault(p.novel_id, []).append(p)
        for group in by_novel.values():
            cursor = 0
            for p in group:
                assert p.word_start == cursor
                cursor = p.word_end

    def test_ingest_writes_corpus_json(self, tmp_path, capsys):
        assert run("ingest", "--config", CONFIG, "--output", str(tmp_path)) == 0
        payload = json.loads((tmp_path / "corpus.json").read_text())
        assert len(payload["novels"]) == 3
        assert payload["total_words"] > 0
        assert payload["novels"][1]["gender_group"] == "male"

    def test_runtime_error_exit_2_with_error_file(self, tmp_path, capsys):
        # annotate before segment: missing passages.jsonl is a runtime error
        assert run("annotate", "--config", CONFIG, "--output", str(tmp_path)) == 2
        error = json.loads((tmp_path / "error.json").read_text())
        assert error["subcommand"] == "annotate"
        assert "passages.jsonl" in error["message"]

    def test_topics_train_and_inspect(self, tmp_path, capsys):
        assert run("topics-train", "--config", CONFIG, "--output", str(tmp_path),
                   "--k", "2", "--sweeps", "6") == 0
        state = json.loads((tmp_path / "topics" / "state.json").read_text())
        assert state["k"] == 2
        assert len(state["log_likelihood"]) == 6
        assert run("topics-inspect", "--config", CONFIG, "--output", str(tmp_path)) == 0
        top_words = (tmp_path / "topics" / "top_words.csv").read_text()
        assert top_words.startswith("topic,rank,word,count")
        out = capsys.readouterr().out
        assert "topic 0:" in out

    def test_annotate_then_eval(self, tmp_path, capsys):
        assert run("segment", "--config", CONFIG, "--output", str(tmp_path)) == 0
        assert run("annotate", "--config", CONFIG, "--output", str(tmp_path)) == 0
        assert run("eval", "--config", CONFIG, "--output", str(tmp_path)) == 0
        metrics = json.loads((tmp_path / "metrics.json").read_text())
        assert metrics["gold_size"] == 18
        assert set(metrics["alpha_per_round"]) == {"round1", "round2"}
        assert metrics["confusion"]["tp"] > 0

    def test_mock_flag_forces_backend(self, tmp_path, capsys):
        # same run via --mock on a config that says http
        http_config = json.loads((FIXTURES / "runconfig.json").read_text())
        http_config["model"]["backend"] = "http"
        cfg_path = tmp_path / "http.json"
        # keep relative paths working: write config beside the fixtures
        for key in ("manifest", "analysis"):
            http_config[key] = str(FIXTURES / http_config[key])
        http_config["topics"]["stopwords"] = str(FIXTURES / "stopwords.txt")
        http_config["topics"]["labels"] = str(FIXTURES / "topic_labels.csv")
        http_config["evaluation"] = {
            "rounds": [str(FIXTURES / "rounds/round1.csv"),
                       str(FIXTURES / "rounds/round2.csv")],
            "gold_overrides": str(FIXTURES / "gold_overrides.csv"),
            "spotcheck": str(FIXTURES / "spotcheck.csv"),
        }
        cfg_path.write_text(json.dumps(http_config), encoding="utf-8")
        out = tmp_path / "out"
        assert run("segment", "--config", str(cfg_path), "--output", str(out)) == 0
        assert run("annotate", "--config", str(cfg_path), "--output", str(out),
                   "--mock") == 0
        annotations = (out / "annotations.jsonl").read_text().splitlines()
        assert len(annotations) == 22
