"""Corpus-level BLEU and pipeline summary reporting."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass

__all__ = ["BleuReport", "bleu", "pipeline_report"]


@dataclass(frozen=True)
class BleuReport:
    bleu: float
    precisions: tuple[float, ...]
    brevity_penalty: float
    hyp_len: int
    ref_len: int

    def as_dict(self) -> dict:
        return {
            "bleu": round(self.bleu, 4),
            "precisions": [round(p, 6) for p in self.precisions],
            "brevity_penalty": round(self.brevity_penalty, 6),
            "hyp_len": self.hyp_len,
            "ref_len": self.ref_len,
        }


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    hypotheses: list[str],
    references: list[str],
    max_n: int = 4,
    smooth: bool = False,
) -> BleuReport:
    """Corpus-level BLEU over whitespace tokens, single reference per hypothesis.

    Unsmoothed by default: any zero n-gram precision zeroes the score. With
    smooth=True, orders >= 2 get add-one smoothing (for tiny corpora).
    """
    if len(hypotheses) != len(references):
        raise ValueError(
            f"{len(hypotheses)} hypotheses vs {len(references)} references"
        )
    if not hypotheses:
        raise ValueError("empty corpus")

    matched = [0] * max_n
    total = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h_toks = hyp.split()
        r_toks = ref.split()
        hyp_len += len(h_toks)
        ref_len += len(r_toks)
        for n in range(1, max_n + 1):
            h_counts = _ngrams(h_toks, n)
            r_counts = _ngrams(r_toks, n)
            total[n - 1] += max(len(h_toks) - n + 1, 0)
            matched[n - 1] += sum(
                min(c, r_counts[g]) for g, c in h_counts.items()
            )

    precisions = []
    for n in range(max_n):
        if smooth and n >= 1:
            p = (matched[n] + 1) / (total[n] + 1)
        else:
            p = matched[n] / total[n] if total[n] else 0.0
        precisions.append(p)

    if hyp_len == 0:
        bp = 0.0
    elif hyp_len >= ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)

    if any(p <= 0.0 for p in precisions) or bp == 0.0:
        score = 0.0
    else:
        score = 100.0 * bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuReport(
        bleu=score,
        precisions=tuple(precisions),
        brevity_penalty=bp,
        hyp_len=hyp_len,
        ref_len=ref_len,
    )


def pipeline_report(stats: dict) -> str:
    """Serialize per-stage statistics as deterministic JSON (sorted keys)."""
    return json.dumps(stats, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
