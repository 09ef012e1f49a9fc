"""Context-aware seq2seq chatbot: training, evaluation and chat."""

import json

from . import _core
from ._core import (
    EXIT_CHECKPOINT,
    EXIT_CONFIG,
    EXIT_FAILURE,
    EXIT_INPUT,
    EXIT_OK,
    CheckpointError,
    ConfigError,
    InputError,
    IoError,
    JsonError,
    ServiceError,
    act_names,
    aggregate_specificity,
    detokenize,
    diversity,
    file_fingerprint,
    length_stats,
    tokenize,
)

__all__ = [
    "Bot", "CheckpointError", "ConfigError", "InputError", "IoError", "JsonError", "ServiceError",
    "EXIT_OK", "EXIT_FAILURE", "EXIT_CONFIG", "EXIT_CHECKPOINT", "EXIT_INPUT",
    "act_names", "aggregate_specificity", "default_config", "detokenize", "diversity", "evaluate",
    "file_fingerprint", "length_stats", "resolve_config", "tokenize", "train_da", "train_seq2seq",
]


def _dump(config):
    return json.dumps(config or {})


def default_config():
    return json.loads(_core.default_config())


def resolve_config(config):
    """Full config with `config` overlaid on the defaults."""
    return json.loads(_core.resolve_config(_dump(config)))


def train_da(swda, out, mapping=None, config=None):
    """Returns (exit_code, log)."""
    return _core.train_da(str(swda), str(out), None if mapping is None else str(mapping), _dump(config))


def train_seq2seq(lines, conversations, out, da_ckpt=None, config=None):
    return _core.train_seq2seq(str(lines), str(conversations), str(out),
                               None if da_ckpt is None else str(da_ckpt), _dump(config))


def evaluate(transcripts, ckpts, report, da_ckpt=None, specificity_scores=(), out_dir=None, config=None):
    return _core.evaluate(str(transcripts), [str(c) for c in ckpts], str(report),
                          None if da_ckpt is None else str(da_ckpt), [str(s) for s in specificity_scores],
                          None if out_dir is None else str(out_dir), _dump(config))


class Bot:
    """A loaded model with its chat sessions."""

    def __init__(self, ckpt, da_ckpt=None, config=None):
        self._bot = _core.Bot(str(ckpt), None if da_ckpt is None else str(da_ckpt), _dump(config))

    def new_session(self):
        return self._bot.new_session()

    def message(self, session, text, **decode):
        body = {"text": text}
        if decode:
            body["decode"] = decode
        return json.loads(self._bot.message(session, json.dumps(body)))

    def transcript(self, session):
        return json.loads(self._bot.transcript(session))

    def classify(self, text):
        return json.loads(self._bot.classify(text))

    def health(self):
        return json.loads(self._bot.health())
