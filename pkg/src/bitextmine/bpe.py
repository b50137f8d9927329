"""Byte-pair-encoding trainer, encoder, and decoder for subword segmentation."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

__all__ = ["BpeModel", "BpeError", "bpe_train", "bpe_encode", "bpe_decode",
           "save_model", "load_model"]

log = logging.getLogger(__name__)

UNK_TOKEN = "<unk>"
WORD_MARKER = "\u2581"  # begin-of-word marker, prefixed to every word


class BpeError(ValueError):
    pass


@dataclass
class BpeModel:
    vocab: list[str]                      # index = token id
    merges: list[tuple[str, str]]         # in training order
    requested_vocab_size: int
    unk_id: int = 0
    _token_to_id: dict[str, int] = field(default_factory=dict, repr=False)
    _encode_cache: dict[str, tuple[int, ...]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._token_to_id:
            self._token_to_id = {tok: i for i, tok in enumerate(self.vocab)}

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def token_id(self, token: str) -> int:
        return self._token_to_id.get(token, self.unk_id)


def _word_symbols(word: str) -> tuple[str, ...]:
    return (WORD_MARKER,) + tuple(word)


def _count_pairs(words: dict[tuple[str, ...], int]) -> Counter:
    pairs: Counter = Counter()
    for sym, freq in words.items():
        for a, b in zip(sym, sym[1:]):
            pairs[(a, b)] += freq
    return pairs


def _merge_word(sym: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    left, right = pair
    merged = left + right
    out = []
    i = 0
    while i < len(sym):
        if i + 1 < len(sym) and sym[i] == left and sym[i + 1] == right:
            out.append(merged)
            i += 2
        else:
            out.append(sym[i])
            i += 1
    return tuple(out)


def bpe_train(lines: list[str], vocab_size: int) -> BpeModel:
    """Train a BPE model by greedy highest-frequency pair merging.

    Words are whitespace-pretokenized and prefixed with a begin-of-word
    marker. Ties between equally frequent pairs break lexicographically,
    so training is deterministic for a fixed corpus.
    """
    if not lines:
        raise BpeError("training corpus is empty")
    words: Counter = Counter()
    for line in lines:
        for word in line.split():
            words[_word_symbols(word)] += 1
    if not words:
        raise BpeError("training corpus contains no words")

    alphabet = sorted({ch for sym in words for ch in sym if ch != WORD_MARKER})
    vocab = [UNK_TOKEN, WORD_MARKER] + alphabet
    if vocab_size <= len(vocab):
        raise BpeError(
            f"vocab_size {vocab_size} must exceed base vocabulary size {len(vocab)}"
        )

    merges: list[tuple[str, str]] = []
    current = dict(words)
    while len(vocab) < vocab_size:
        pairs = _count_pairs(current)
        if not pairs:
            break
        best_count = max(pairs.values())
        best = min(p for p, c in pairs.items() if c == best_count)
        merges.append(best)
        vocab.append(best[0] + best[1])
        current = {_merge_word(sym, best): freq for sym, freq in current.items()}
    if len(vocab) < vocab_size:
        log.warning(
            "vocab size %d not reachable; stopped at %d", vocab_size, len(vocab)
        )
    return BpeModel(vocab=vocab, merges=merges, requested_vocab_size=vocab_size)


def _encode_word(model: BpeModel, word: str) -> tuple[int, ...]:
    cached = model._encode_cache.get(word)
    if cached is not None:
        return cached
    known = set(model.vocab)
    # Out-of-alphabet characters become None placeholders that never merge.
    sym: list[str | None] = [WORD_MARKER] + [c if c in known else None for c in word]
    for left, right in model.merges:
        merged = left + right
        out: list[str | None] = []
        i = 0
        while i < len(sym):
            if i + 1 < len(sym) and sym[i] == left and sym[i + 1] == right:
                out.append(merged)
                i += 2
            else:
                out.append(sym[i])
                i += 1
        sym = out
    ids = tuple(
        model.unk_id if s is None else model.token_id(s) for s in sym
    )
    model._encode_cache[word] = ids
    return ids


def bpe_encode(model: BpeModel, text: str) -> list[int]:
    """Segment text into token ids, applying merges in training order per word."""
    ids: list[int] = []
    for word in text.split():
        ids.extend(_encode_word(model, word))
    return ids


def bpe_decode(model: BpeModel, ids: list[int]) -> str:
    """Invert bpe_encode: begin-of-word markers become single spaces."""
    tokens = []
    for i in ids:
        if not 0 <= i < len(model.vocab):
            raise BpeError(f"token id {i} out of range (vocab size {len(model.vocab)})")
        tokens.append(model.vocab[i])
    text = "".join(tokens).replace(WORD_MARKER, " ")
    return text.lstrip(" ")


def _escape(token: str) -> str:
    return token.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(token: str) -> str:
    out = []
    i = 0
    while i < len(token):
        if token[i] == "\\" and i + 1 < len(token):
            nxt = token[i + 1]
            out.append({"\\": "\\", "t": "\t", "n": "\n"}.get(nxt, "\\" + nxt))
            i += 2
        else:
            out.append(token[i])
            i += 1
    return "".join(out)


def save_model(model: BpeModel, path) -> None:
    """Write the model file: header, vocabulary, '#merges', merge pairs."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"bpe v1 {len(model.vocab)}\n")
        for tok in model.vocab:
            fh.write(_escape(tok) + "\n")
        fh.write("#merges\n")
        for left, right in model.merges:
            fh.write(f"{_escape(left)}\t{_escape(right)}\n")


def load_model(path) -> BpeModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    header = lines[0].split()
    if len(header) != 3 or header[0] != "bpe" or header[1] != "v1":
        raise BpeError(f"bad model header: {lines[0]!r}")
    size = int(header[2])
    vocab = [_unescape(t) for t in lines[1 : 1 + size]]
    if len(vocab) != size or lines[1 + size] != "#merges":
        raise BpeError("model file truncated or '#merges' marker missing")
    merges = []
    for line in lines[2 + size :]:
        if not line:
            continue
        left, right = line.split("\t")
        merges.append((_unescape(left), _unescape(right)))
    return BpeModel(vocab=vocab, merges=merges, requested_vocab_size=size)
