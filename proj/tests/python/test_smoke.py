import json
import os
import subprocess
from pathlib import Path

import pytest

import cssbot

SRC = Path(os.environ.get("CSS_SOURCE_DIR", Path(__file__).resolve().parents[2]))
FIX = SRC / "tests" / "fixtures"

TINY = {
    "seed": 3,
    "data": {"vocab_size": 200, "validation_fraction": 0.2},
    "da": {"embed_dim": 8, "windows": [2, 3], "filters_per_window": 4, "hidden_dim": 16, "epochs": 2, "batch_size": 8},
    "seq2seq": {"embed_dim": 8, "encoder_hidden": 8, "decoder_hidden": 8, "max_out_len": 10, "epochs": 2,
                "batch_size": 4},
    "decode": {"max_out_len": 10},
}


@pytest.fixture(scope="module")
def models(tmp_path_factory):
    d = tmp_path_factory.mktemp("models")
    code, log = cssbot.train_da(FIX / "swda", d / "da.ckpt", config=TINY)
    assert code == cssbot.EXIT_OK, log
    code, log = cssbot.train_seq2seq(FIX / "cornell" / "movie_lines.txt", FIX / "cornell" / "movie_conversations.txt",
                                     d / "css.ckpt", da_ckpt=d / "da.ckpt", config=TINY)
    assert code == cssbot.EXIT_OK, log
    return d


def test_config_defaults_and_strictness():
    c = cssbot.default_config()
    assert c["decode"]["beam_width"] == 3
    assert c["decode"]["chosen_beam"] == 3
    assert cssbot.resolve_config({"seed": 5})["seed"] == 5
    with pytest.raises(cssbot.ConfigError):
        cssbot.resolve_config({"seeed": 5})


def test_text_helpers_and_metrics():
    assert cssbot.tokenize("How are you?") == ["how", "are", "you", "?"]
    assert len(cssbot.act_names()) == 10
    mean, median = cssbot.length_stats([["a", "b"], ["c"], ["d", "e", "f", "</s>"]])
    assert mean == pytest.approx(2.0)
    assert median == pytest.approx(2.0)
    assert cssbot.diversity([["a", "b"], ["a", "a"]]) == pytest.approx(0.5)
    assert cssbot.aggregate_specificity([0.2, 0.4], 2) == pytest.approx(0.3)
    with pytest.raises(cssbot.InputError):
        cssbot.aggregate_specificity([0.2], 2)


def test_training_is_deterministic(models, tmp_path):
    code, _ = cssbot.train_da(FIX / "swda", tmp_path / "again.ckpt", config=TINY)
    assert code == cssbot.EXIT_OK
    assert (tmp_path / "again.ckpt").read_bytes() == (models / "da.ckpt").read_bytes()


def test_chat_session(models):
    bot = cssbot.Bot(models / "css.ckpt", da_ckpt=models / "da.ckpt", config=TINY)
    assert bot.health()["model_mode"] == "css"
    s = bot.new_session()
    r = bot.message(s, "how are you ?")
    assert len(r["beams"]) == 3
    assert r["user_act"]["label"] in cssbot.act_names()
    assert len(r["user_act"]["probs"]) == 10
    g = bot.message(s, "fine", method="greedy")
    assert len(g["beams"]) == 1
    assert len(bot.transcript(s)["turns"]) == 4
    with pytest.raises(cssbot.ServiceError):
        bot.message("nope", "hi")
    assert bot.classify("what ?")["act"] in cssbot.act_names()


def test_bad_checkpoint_raises(tmp_path):
    p = tmp_path / "junk.ckpt"
    p.write_bytes(b"garbage")
    with pytest.raises(cssbot.CheckpointError):
        cssbot.Bot(p)


def test_evaluate(models, tmp_path):
    turns = tmp_path / "turns.txt"
    turns.write_text("hello\nhow are you ?\n\nyes\n")
    code, log = cssbot.evaluate(turns, [models / "css.ckpt"], tmp_path / "r.csv", da_ckpt=models / "da.ckpt",
                                config=TINY)
    assert code == cssbot.EXIT_OK, log
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "model,median_len,mean_len,diversity,mean_specificity"
    assert rows[1].startswith("css,")


@pytest.mark.skipif("CSSBOT_EXE" not in os.environ, reason="CLI not built")
def test_cli_missing_mapping_exit_code(tmp_path):
    cfg = tmp_path / "tiny.json"
    cfg.write_text(json.dumps(TINY))
    missing = tmp_path / "absent_map.tsv"
    p = subprocess.run([os.environ["CSSBOT_EXE"], "--config", str(cfg), "train-da", "--swda", str(FIX / "swda"),
                        "--mapping", str(missing), "--out", str(tmp_path / "x.ckpt")],
                       capture_output=True, text=True)
    assert p.returncode == 2
    assert str(missing) in p.stderr


@pytest.mark.skipif("CSSBOT_EXE" not in os.environ, reason="CLI not built")
def test_cli_usage_errors(tmp_path):
    exe = os.environ["CSSBOT_EXE"]
    assert subprocess.run([exe], capture_output=True).returncode == 2
    assert subprocess.run([exe, "train-da", "--swda", "x"], capture_output=True).returncode == 2
    p = subprocess.run([exe, "chat", "--ckpt", str(tmp_path / "none.ckpt")], capture_output=True, text=True,
                       input="")
    assert p.returncode == 2
