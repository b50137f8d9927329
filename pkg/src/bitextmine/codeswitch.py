"""Dictionary-based partial translation into a code-switched form."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .corpus import Corpus

__all__ = [
    "BilingualDictionary",
    "CodeSwitchResult",
    "DictionaryError",
    "load_dictionary",
    "code_switch",
    "corpus_coverage",
]

log = logging.getLogger(__name__)

# Leading/trailing non-word characters are peeled off before lookup and
# re-attached around the replacement.
_TOKEN_RE = re.compile(r"^(\W*)(.*?)(\W*)$", re.UNICODE | re.DOTALL)


class DictionaryError(ValueError):
    pass


@dataclass(frozen=True)
class BilingualDictionary:
    source_lang: str
    target_lang: str
    entries: dict[str, str]       # case-folded source word -> target string
    duplicate_count: int = 0

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class CodeSwitchResult:
    text: str
    tokens_total: int
    tokens_replaced: int

    @property
    def coverage(self) -> float:
        if self.tokens_total == 0:
            return 0.0
        return self.tokens_replaced / self.tokens_total


def load_dictionary(path, source_lang: str, target_lang: str) -> BilingualDictionary:
    """Load a TSV dictionary (source<TAB>target per line).

    Keys are case-folded; duplicate keys keep the first entry and are counted.
    """
    entries: dict[str, str] = {}
    duplicates = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DictionaryError(
                    f"{path}: line {lineno}: expected 'source<TAB>target', got {line!r}"
                )
            src, tgt = parts
            src = src.strip().casefold()
            tgt = tgt.strip()
            if not src or not tgt:
                raise DictionaryError(f"{path}: line {lineno}: empty source or target")
            if len(src.split()) != 1:
                raise DictionaryError(
                    f"{path}: line {lineno}: multi-word keys are not supported: {src!r}"
                )
            if src in entries:
                duplicates += 1
                continue
            entries[src] = tgt
    if duplicates:
        log.warning("%s: %d duplicate dictionary keys ignored", path, duplicates)
    return BilingualDictionary(
        source_lang=source_lang,
        target_lang=target_lang,
        entries=entries,
        duplicate_count=duplicates,
    )


def code_switch(text: str, dicts: list[BilingualDictionary]) -> CodeSwitchResult:
    """Replace dictionary-known words with their translations.

    Per whitespace token: strip surrounding punctuation, case-fold, look the
    core up in each dictionary in order, and splice in the first hit with the
    original punctuation re-attached. Unmatched tokens pass through unchanged.
    """
    if len({d.source_lang for d in dicts}) > 1:
        raise DictionaryError(
            "all dictionaries must share the same source language, got "
            + ", ".join(sorted({d.source_lang for d in dicts}))
        )
    tokens = text.split()
    out = []
    replaced = 0
    for token in tokens:
        prefix, core, suffix = _TOKEN_RE.match(token).groups()
        hit = None
        if core:
            key = core.casefold()
            for d in dicts:
                hit = d.entries.get(key)
                if hit is not None:
                    break
        if hit is None:
            out.append(token)
        else:
            out.append(prefix + hit + suffix)
            replaced += 1
    return CodeSwitchResult(
        text=" ".join(out), tokens_total=len(tokens), tokens_replaced=replaced
    )


def corpus_coverage(corpus: Corpus, dicts: list[BilingualDictionary]) -> float:
    """Token-weighted replacement rate over all sentences."""
    total = 0
    replaced = 0
    for rec in corpus:
        res = code_switch(rec.text, dicts)
        total += res.tokens_total
        replaced += res.tokens_replaced
    if total == 0:
        log.warning("corpus_coverage: empty corpus")
        return 0.0
    return replaced / total
