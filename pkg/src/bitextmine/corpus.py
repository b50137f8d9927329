"""Sentence data model, cleaning, segmentation, dedup, and corpus file I/O."""

from __future__ import annotations

import json
import re
import unicodedata
from dataclasses import dataclass, field

__all__ = [
    "SentenceRecord",
    "Corpus",
    "CorpusError",
    "clean_text",
    "segment_sentences",
    "dedup",
    "read_corpus",
    "write_corpus",
]

_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_EMAIL_RE = re.compile(r"\S+@\S+\.\S+")
_WS_RE = re.compile(r"\s+")

# Terminator followed by whitespace or end of text; terminator stays on the left.
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])(?:\s+|$)")

_METADATA_FIELDS = {"id", "text", "lang", "source_url", "site_id"}


class CorpusError(ValueError):
    """Malformed corpus file or invariant violation; carries a line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SentenceRecord:
    id: int
    text: str
    lang: str
    source_url: str = ""
    site_id: str = ""


@dataclass(frozen=True)
class Corpus:
    lang: str
    records: tuple[SentenceRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def texts(self) -> list[str]:
        return [r.text for r in self.records]


def _is_stripped_char(ch: str) -> bool:
    # Control chars plus zero-width/format chars (Cf covers ZWSP, ZWJ, BOM...).
    return unicodedata.category(ch) in ("Cc", "Cf")


def clean_text(raw: str) -> str:
    """Normalize to NFC, drop URLs/emails and control chars, collapse whitespace.

    Idempotent; returns "" when nothing survives.
    """
    text = unicodedata.normalize("NFC", raw)
    text = _URL_RE.sub(" ", text)
    text = _EMAIL_RE.sub(" ", text)
    text = "".join(" " if ch in "\t\n\r\v\f" else ch for ch in text)
    text = "".join(ch for ch in text if not _is_stripped_char(ch))
    text = _WS_RE.sub(" ", text)
    return text.strip()


def _alpha_ratio(segment: str) -> float:
    chars = [c for c in segment if not c.isspace()]
    if not chars:
        return 0.0
    return sum(c.isalpha() for c in chars) / len(chars)


def segment_sentences(
    text: str,
    min_tokens: int = 3,
    max_tokens: int = 200,
    min_alpha_ratio: float = 0.25,
    apply_filters: bool = True,
) -> list[str]:
    """Split cleaned text into sentences on ./!/? + whitespace.

    With apply_filters, segments outside [min_tokens, max_tokens] whitespace
    tokens or below min_alpha_ratio alphabetic characters are dropped.
    """
    if not text:
        return []
    segments = [s.strip() for s in _SENT_SPLIT_RE.split(text)]
    segments = [s for s in segments if s]
    if not apply_filters:
        return segments
    kept = []
    for seg in segments:
        n_tokens = len(seg.split())
        if n_tokens < min_tokens or n_tokens > max_tokens:
            continue
        if _alpha_ratio(seg) < min_alpha_ratio:
            continue
        kept.append(seg)
    return kept


def dedup(corpus: Corpus) -> Corpus:
    """Keep the first occurrence of each exact text; reassign ids 0..n-1."""
    seen: set[str] = set()
    records = []
    for rec in corpus.records:
        if rec.text in seen:
            continue
        seen.add(rec.text)
        records.append(
            SentenceRecord(
                id=len(records),
                text=rec.text,
                lang=rec.lang,
                source_url=rec.source_url,
                site_id=rec.site_id,
            )
        )
    return Corpus(lang=corpus.lang, records=tuple(records))


def _validate_text(text: str, line: int):
    if not text:
        raise CorpusError("empty sentence text", line)
    if text != clean_text(text):
        raise CorpusError("text is not in cleaned form", line)


def read_corpus(path, lang: str = "", fmt: str = "auto", strict: bool = False) -> Corpus:
    """Read a plain (one sentence per line) or metadata (JSONL) corpus file.

    Validates record invariants; errors name the first offending line.
    In strict mode duplicate texts and unknown JSON fields are rejected.
    """
    path = str(path)
    if fmt == "auto":
        fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "plain"
    if fmt not in ("plain", "jsonl"):
        raise ValueError(f"unknown corpus format: {fmt}")

    records: list[SentenceRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if fmt == "plain":
                if not line:
                    raise CorpusError("empty line", lineno)
                _validate_text(line, lineno)
                rec = SentenceRecord(id=len(records), text=line, lang=lang)
            else:
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise CorpusError(f"invalid JSON: {exc}", lineno) from exc
                if not isinstance(obj, dict):
                    raise CorpusError("expected a JSON object", lineno)
                unknown = set(obj) - _METADATA_FIELDS
                if unknown and strict:
                    raise CorpusError(f"unknown fields: {sorted(unknown)}", lineno)
                try:
                    rec = SentenceRecord(
                        id=int(obj["id"]),
                        text=str(obj["text"]),
                        lang=str(obj.get("lang", lang)),
                        source_url=str(obj.get("source_url", "")),
                        site_id=str(obj.get("site_id", "")),
                    )
                except KeyError as exc:
                    raise CorpusError(f"missing field {exc}", lineno) from exc
                _validate_text(rec.text, lineno)
                if rec.id != len(records):
                    raise CorpusError(
                        f"id {rec.id} out of order (expected {len(records)})", lineno
                    )
                if lang and rec.lang != lang:
                    raise CorpusError(
                        f"bad lang {rec.lang!r} (expected {lang!r})", lineno
                    )
            if rec.text in seen:
                if strict:
                    raise CorpusError(f"duplicate text {rec.text!r}", lineno)
            seen.add(rec.text)
            records.append(rec)
    return Corpus(lang=lang or (records[0].lang if records else ""), records=tuple(records))


def write_corpus(corpus: Corpus, path, fmt: str = "auto") -> None:
    """Write a corpus as plain text or JSONL (LF line endings, UTF-8)."""
    path = str(path)
    if fmt == "auto":
        fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "plain"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in corpus.records:
            if fmt == "plain":
                fh.write(rec.text + "\n")
            else:
                fh.write(
                    json.dumps(
                        {
                            "id": rec.id,
                            "text": rec.text,
                            "lang": rec.lang,
                            "source_url": rec.source_url,
                            "site_id": rec.site_id,
                        },
                        ensure_ascii=False,
                    )
                    + "\n"
                )
