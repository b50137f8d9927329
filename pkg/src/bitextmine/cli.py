"""Command-line pipeline: crawl -> clean -> codeswitch -> [bpe] -> embed -> mine -> translate -> report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

from . import bpe as bpe_mod
from . import codeswitch as cs_mod
from . import corpus as corpus_mod
from . import crawler as crawler_mod
from . import evaluation as eval_mod
from . import mine as mine_mod
from . import providers as prov_mod

log = logging.getLogger("bitextmine")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2

STAGE_ORDER = [
    "crawl", "clean", "codeswitch", "bpe-train", "bpe-apply",
    "embed", "mine", "translate", "report",
]


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    output_dir: Path
    src_corpus: Path | None = None
    tgt_corpus: Path | None = None
    site_list: Path | None = None
    dictionaries: list[Path] = field(default_factory=list)
    dict_target_langs: list[str] = field(default_factory=list)
    src_lang: str = "kl"
    tgt_lang: str = "da"
    translate_to: str = "en"
    seed: int = 13
    provider_command: list[str] = field(default_factory=list)
    provider_url: str = ""
    provider_timeout: float = 120.0
    embed_batch: int = 100
    translate_batch: int = 32
    mining: mine_mod.MiningParams = field(default_factory=mine_mod.MiningParams)
    bpe_vocab_size: int = 10000
    bpe_before_embed: bool = False
    strict_io: bool = False
    crawl_max_depth: int = 2
    crawl_max_pages: int = 100
    crawl_delay_ms: int = 0
    crawl_same_host_only: bool = True
    crawl_max_concurrent: int = 1
    crawl_respect_robots: bool = True
    url_lang_patterns: dict[str, str] = field(default_factory=dict)
    segment_min_tokens: int = 3
    segment_max_tokens: int = 200

    @classmethod
    def from_toml(cls, path) -> "PipelineConfig":
        base = Path(path).resolve().parent
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc

        def p(section: dict, key: str):
            val = section.get(key)
            if not val:
                return None
            q = Path(val)
            return q if q.is_absolute() else base / q

        paths = raw.get("paths", {})
        langs = raw.get("langs", {})
        provider = raw.get("provider", {})
        mining = raw.get("mining", {})
        bpe = raw.get("bpe", {})
        crawl = raw.get("crawl", {})
        flags = raw.get("flags", {})
        segment = raw.get("segment", {})
        out_dir = p(paths, "output_dir")
        if out_dir is None:
            raise ConfigError("paths.output_dir is required")
        try:
            params = mine_mod.MiningParams(
                k=int(mining.get("k", 4)),
                threshold=float(mining.get("threshold", 1.04)),
                batch_size=int(mining.get("batch_size", 100)),
                mode=str(mining.get("mode", "exact")),
                nprobe=int(mining.get("nprobe", 8)),
                nlist=mining.get("nlist"),
                best_of_k=bool(flags.get("best_of_k", False)),
                unique_pairs=bool(flags.get("unique_pairs", False)),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cls(
            output_dir=out_dir,
            src_corpus=p(paths, "src_corpus"),
            tgt_corpus=p(paths, "tgt_corpus"),
            site_list=p(paths, "site_list"),
            dictionaries=[base / d if not Path(d).is_absolute() else Path(d)
                          for d in paths.get("dictionaries", [])],
            dict_target_langs=list(langs.get("dict_targets", [])),
            src_lang=str(langs.get("src", "kl")),
            tgt_lang=str(langs.get("tgt", "da")),
            translate_to=str(langs.get("translate_to", "en")),
            seed=int(raw.get("seed", 13)),
            provider_command=list(provider.get("command", [])),
            provider_url=str(provider.get("url", "")),
            provider_timeout=float(provider.get("timeout", 120.0)),
            embed_batch=int(provider.get("embed_batch", 100)),
            translate_batch=int(provider.get("translate_batch", 32)),
            mining=params,
            bpe_vocab_size=int(bpe.get("vocab_size", 10000)),
            bpe_before_embed=bool(flags.get("bpe_before_embed", False)),
            strict_io=bool(flags.get("strict_io", False)),
            crawl_max_depth=int(crawl.get("max_depth", 2)),
            crawl_max_pages=int(crawl.get("max_pages", 100)),
            crawl_delay_ms=int(crawl.get("delay_ms", 0)),
            crawl_same_host_only=bool(crawl.get("same_host_only", True)),
            crawl_max_concurrent=int(crawl.get("max_concurrent_fetches", 1)),
            crawl_respect_robots=bool(crawl.get("respect_robots", True)),
            url_lang_patterns=dict(crawl.get("url_lang_patterns", {})),
            segment_min_tokens=int(segment.get("min_tokens", 3)),
            segment_max_tokens=int(segment.get("max_tokens", 200)),
        )

    def validate(self, stage: str | None = None) -> None:
        """Fail fast: every referenced input path must exist before work starts."""
        for path in [self.src_corpus, self.tgt_corpus, self.site_list, *self.dictionaries]:
            if path is not None and not Path(path).exists():
                raise ConfigError(f"input path does not exist: {path}")
        if self.dictionaries and len(self.dict_target_langs) not in (0, len(self.dictionaries)):
            raise ConfigError("langs.dict_targets must match paths.dictionaries in length")
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def as_dict(self) -> dict:
        return {
            "output_dir": str(self.output_dir),
            "src_corpus": str(self.src_corpus or ""),
            "tgt_corpus": str(self.tgt_corpus or ""),
            "site_list": str(self.site_list or ""),
            "dictionaries": [str(d) for d in self.dictionaries],
            "src_lang": self.src_lang,
            "tgt_lang": self.tgt_lang,
            "translate_to": self.translate_to,
            "seed": self.seed,
            "provider": {
                "command": self.provider_command,
                "url": self.provider_url,
                "embed_batch": self.embed_batch,
                "translate_batch": self.translate_batch,
            },
            "mining": {
                "k": self.mining.k,
                "threshold": self.mining.threshold,
                "batch_size": self.mining.batch_size,
                "mode": self.mining.mode,
                "nprobe": self.mining.nprobe,
                "best_of_k": self.mining.best_of_k,
                "unique_pairs": self.mining.unique_pairs,
            },
            "bpe": {"vocab_size": self.bpe_vocab_size,
                    "bpe_before_embed": self.bpe_before_embed},
            "strict_io": self.strict_io,
        }

    # artifact paths
    def art(self, name: str) -> Path:
        return self.output_dir / name


def _provider(cfg: PipelineConfig) -> prov_mod.ProviderHandle:
    import os

    url = os.environ.get("BITEXTMINE_PROVIDER_URL", cfg.provider_url)
    if url:
        return prov_mod.ProviderHandle(
            base_url=url, timeout=cfg.provider_timeout,
            embed_batch=cfg.embed_batch, translate_batch=cfg.translate_batch,
        )
    if not cfg.provider_command:
        raise ConfigError("no provider configured (provider.command or provider.url)")
    return prov_mod.ProviderHandle(
        command=cfg.provider_command, timeout=cfg.provider_timeout,
        embed_batch=cfg.embed_batch, translate_batch=cfg.translate_batch,
    )


def _write_json(path: Path, obj: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _requests_fetcher(url: str) -> crawler_mod.FetchResult:
    import requests

    resp = requests.get(url, timeout=30)
    return crawler_mod.FetchResult(
        status=resp.status_code,
        body=resp.text,
        content_type=resp.headers.get("Content-Type", "text/html"),
    )


def stage_crawl(cfg: PipelineConfig, fetcher=None) -> dict:
    if cfg.site_list is None:
        raise StageError("crawl: paths.site_list is not configured")
    seeds = []
    for line in Path(cfg.site_list).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            seeds.append(line)
    config = crawler_mod.CrawlConfig(
        seed_urls=tuple(seeds),
        max_depth=cfg.crawl_max_depth,
        max_pages=cfg.crawl_max_pages,
        same_host_only=cfg.crawl_same_host_only,
        delay_ms=cfg.crawl_delay_ms,
        max_concurrent_fetches=cfg.crawl_max_concurrent,
        respect_robots=cfg.crawl_respect_robots,
    )
    result = crawler_mod.crawl(config, fetcher or _requests_fetcher)
    per_lang: dict[str, list[corpus_mod.SentenceRecord]] = {}
    for page in result.pages:
        lang = ""
        for cand_lang, pattern in sorted(cfg.url_lang_patterns.items()):
            if pattern in page.url:
                lang = cand_lang
                break
        if not lang:
            continue
        site = page.url.split("/")[2] if "//" in page.url else ""
        recs = per_lang.setdefault(lang, [])
        for block in page.text_blocks:
            text = corpus_mod.clean_text(block)
            for sent in corpus_mod.segment_sentences(
                text, cfg.segment_min_tokens, cfg.segment_max_tokens
            ):
                recs.append(corpus_mod.SentenceRecord(
                    id=len(recs), text=sent, lang=lang,
                    source_url=page.url, site_id=site,
                ))
    counts = {}
    for lang, recs in per_lang.items():
        corp = corpus_mod.Corpus(lang=lang, records=tuple(recs))
        corpus_mod.write_corpus(corp, cfg.art(f"crawl.{lang}.jsonl"), fmt="jsonl")
        counts[lang] = len(recs)
    _write_json(cfg.art("crawl_report.json"), result.report.as_dict())
    return {"pages": len(result.pages), "sentences_per_lang": counts,
            "failures": len(result.report.failures)}


def _load_raw_lines(path: Path) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _clean_one(cfg: PipelineConfig, raw_path: Path, lang: str, out_path: Path) -> dict:
    records: list[corpus_mod.SentenceRecord] = []
    raw_lines = 0
    for line in _load_raw_lines(raw_path):
        raw_lines += 1
        text = corpus_mod.clean_text(line)
        for sent in corpus_mod.segment_sentences(
            text, cfg.segment_min_tokens, cfg.segment_max_tokens
        ):
            records.append(corpus_mod.SentenceRecord(id=len(records), text=sent, lang=lang))
    corp = corpus_mod.dedup(corpus_mod.Corpus(lang=lang, records=tuple(records)))
    corpus_mod.write_corpus(corp, out_path, fmt="plain")
    return {"raw_lines": raw_lines, "segmented": len(records), "deduped": len(corp)}


def stage_clean(cfg: PipelineConfig) -> dict:
    if cfg.src_corpus is None or cfg.tgt_corpus is None:
        raise StageError("clean: paths.src_corpus and paths.tgt_corpus are required")
    return {
        cfg.src_lang: _clean_one(cfg, cfg.src_corpus, cfg.src_lang, cfg.art("src.clean.txt")),
        cfg.tgt_lang: _clean_one(cfg, cfg.tgt_corpus, cfg.tgt_lang, cfg.art("tgt.clean.txt")),
    }


def _load_dicts(cfg: PipelineConfig) -> list[cs_mod.BilingualDictionary]:
    targets = cfg.dict_target_langs or ["en"] * len(cfg.dictionaries)
    return [
        cs_mod.load_dictionary(path, cfg.src_lang, tgt)
        for path, tgt in zip(cfg.dictionaries, targets)
    ]


def stage_codeswitch(cfg: PipelineConfig) -> dict:
    src = corpus_mod.read_corpus(cfg.art("src.clean.txt"), lang=cfg.src_lang,
                                 strict=cfg.strict_io)
    dicts = _load_dicts(cfg)
    total = replaced = 0
    with open(cfg.art("src.codeswitched.txt"), "w", encoding="utf-8", newline="\n") as fh:
        for rec in src:
            res = cs_mod.code_switch(rec.text, dicts)
            fh.write(res.text + "\n")
            total += res.tokens_total
            replaced += res.tokens_replaced
    coverage = replaced / total if total else 0.0
    stats = {
        "sentences": len(src),
        "tokens_total": total,
        "tokens_replaced": replaced,
        "coverage": round(coverage, 6),
        "coverage_pct": f"{100.0 * coverage:.2f}%",
        "dictionaries": [{"path": str(p), "entries": len(d), "duplicates": d.duplicate_count}
                         for p, d in zip(cfg.dictionaries, dicts)],
    }
    _write_json(cfg.art("codeswitch.json"), stats)
    return stats


def stage_bpe_train(cfg: PipelineConfig) -> dict:
    lines = _load_raw_lines(cfg.art("src.clean.txt"))
    model = bpe_mod.bpe_train(lines, cfg.bpe_vocab_size)
    bpe_mod.save_model(model, cfg.art("bpe.model"))
    return {"vocab_size": model.vocab_size,
            "requested_vocab_size": model.requested_vocab_size,
            "merges": len(model.merges)}


def stage_bpe_apply(cfg: PipelineConfig, in_name: str = "src.codeswitched.txt",
                    out_name: str = "src.bpe.txt") -> dict:
    model = bpe_mod.load_model(cfg.art("bpe.model"))
    lines = _load_raw_lines(cfg.art(in_name))
    n_tokens = 0
    with open(cfg.art(out_name), "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            ids = bpe_mod.bpe_encode(model, line)
            n_tokens += len(ids)
            fh.write(" ".join(model.vocab[i] for i in ids) + "\n")
    return {"lines": len(lines), "tokens": n_tokens}


def stage_embed(cfg: PipelineConfig) -> dict:
    src_name = "src.bpe.txt" if cfg.bpe_before_embed else "src.codeswitched.txt"
    src_lines = _load_raw_lines(cfg.art(src_name))
    tgt_lines = _load_raw_lines(cfg.art("tgt.clean.txt"))
    with _provider(cfg) as provider:
        src_emb = prov_mod.embed_texts(provider, src_lines)
        tgt_emb = prov_mod.embed_texts(provider, tgt_lines)
    prov_mod.save_embeddings(src_emb, cfg.art("src.emb"))
    prov_mod.save_embeddings(tgt_emb, cfg.art("tgt.emb"))
    return {"src_rows": src_emb.n, "tgt_rows": tgt_emb.n, "dim": src_emb.dim,
            "src_input": src_name}


def stage_mine(cfg: PipelineConfig) -> dict:
    src_emb = prov_mod.load_embeddings(cfg.art("src.emb"))
    tgt_emb = prov_mod.load_embeddings(cfg.art("tgt.emb"))
    src_texts = _load_raw_lines(cfg.art("src.clean.txt"))
    tgt_texts = _load_raw_lines(cfg.art("tgt.clean.txt"))
    result = mine_mod.mine(src_emb, tgt_emb, cfg.mining)
    mine_mod.write_pairs(result, cfg.art("pairs.tsv"), src_texts, tgt_texts,
                         summary_path=cfg.art("mine_summary.json"))
    return result.summary


def stage_translate(cfg: PipelineConfig) -> dict:
    pairs = mine_mod.read_pairs(cfg.art("pairs.tsv"))
    src_texts = _load_raw_lines(cfg.art("src.clean.txt"))
    tgt_texts = _load_raw_lines(cfg.art("tgt.clean.txt"))
    to_translate = [tgt_texts[p.tgt_id] for p in pairs]
    if to_translate:
        with _provider(cfg) as provider:
            translated = prov_mod.translate_texts(
                provider, to_translate, cfg.tgt_lang, cfg.translate_to
            )
    else:
        translated = []
    with open(cfg.art("bitext.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"src_text\ttranslated_{cfg.translate_to}\n")
        for p, tr in zip(pairs, translated):
            fh.write(f"{src_texts[p.src_id]}\t{tr}\n")
    return {"pairs_translated": len(translated)}


def stage_report(cfg: PipelineConfig, stage_stats: dict | None = None) -> dict:
    stats = dict(stage_stats or {})
    # fall back to on-disk artifacts so `report` is independently re-runnable
    if "codeswitch" not in stats and cfg.art("codeswitch.json").exists():
        stats["codeswitch"] = json.loads(cfg.art("codeswitch.json").read_text())
    if "mine" not in stats and cfg.art("mine_summary.json").exists():
        stats["mine"] = json.loads(cfg.art("mine_summary.json").read_text())
    report = {"config": cfg.as_dict(), "stages": stats}
    with open(cfg.art("report.json"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(eval_mod.pipeline_report(report))
    return report


_STAGE_OUTPUTS = {
    "crawl": ["crawl_report.json"],
    "clean": ["src.clean.txt", "tgt.clean.txt"],
    "codeswitch": ["src.codeswitched.txt", "codeswitch.json"],
    "bpe-train": ["bpe.model"],
    "bpe-apply": ["src.bpe.txt"],
    "embed": ["src.emb", "tgt.emb"],
    "mine": ["pairs.tsv", "mine_summary.json"],
    "translate": ["bitext.tsv"],
    "report": ["report.json"],
}


def run_stage(name: str, cfg: PipelineConfig, fetcher=None, stage_stats=None) -> dict:
    log.info("stage %s: start", name)
    if name == "crawl":
        out = stage_crawl(cfg, fetcher=fetcher)
    elif name == "clean":
        out = stage_clean(cfg)
    elif name == "codeswitch":
        out = stage_codeswitch(cfg)
    elif name == "bpe-train":
        out = stage_bpe_train(cfg)
    elif name == "bpe-apply":
        out = stage_bpe_apply(cfg)
    elif name == "embed":
        out = stage_embed(cfg)
    elif name == "mine":
        out = stage_mine(cfg)
    elif name == "translate":
        out = stage_translate(cfg)
    elif name == "report":
        out = stage_report(cfg, stage_stats)
    else:
        raise ConfigError(f"unknown stage: {name}")
    log.info("stage %s: done", name)
    return out


def pipeline(cfg: PipelineConfig, force: bool = False, fetcher=None) -> dict:
    """Run all applicable stages in order; stages with existing outputs are
    skipped unless force."""
    stats: dict = {}
    stages = list(STAGE_ORDER)
    if cfg.site_list is None:
        stages.remove("crawl")
    if not cfg.bpe_before_embed:
        stages.remove("bpe-apply")
    for name in stages:
        outputs = [cfg.art(a) for a in _STAGE_OUTPUTS[name]]
        if not force and all(p.exists() for p in outputs):
            log.info("stage %s: outputs exist, skipping (use --force to re-run)", name)
            continue
        stats[name] = run_stage(name, cfg, fetcher=fetcher, stage_stats=stats)
    return stats


def _cmd_bleu(args) -> int:
    hyps = _load_raw_lines(Path(args.hyp))
    refs = _load_raw_lines(Path(args.ref))
    report = eval_mod.bleu(hyps, refs, max_n=args.max_n, smooth=args.smooth)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bitextmine",
        description="Mine pseudoparallel sentence pairs from comparable corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stage_names = list(_STAGE_OUTPUTS)
    for name in stage_names + ["pipeline"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML pipeline config")
        if name == "pipeline":
            sp.add_argument("--force", action="store_true",
                            help="re-run stages even if their outputs exist")

    sp = sub.add_parser("bleu", help="score hypotheses against references")
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--max-n", type=int, default=4, dest="max_n")
    sp.add_argument("--smooth", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    if args.command == "bleu":
        try:
            return _cmd_bleu(args)
        except (OSError, ValueError) as exc:
            log.error("%s", exc)
            return EXIT_STAGE
    try:
        cfg = PipelineConfig.from_toml(args.config)
        cfg.validate()
    except (ConfigError, crawler_mod.ConfigError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    try:
        if args.command == "pipeline":
            pipeline(cfg, force=args.force)
        else:
            run_stage(args.command, cfg)
    except (ConfigError, crawler_mod.ConfigError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except Exception as exc:
        log.error("stage %s failed: %s", args.command, exc)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
