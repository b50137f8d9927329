"""Same-site recursive crawling with an injectable fetcher.

The fetcher is any callable url -> FetchResult; tests use in-memory fakes,
the CLI wires in a requests-backed one. Traversal is breadth-first with a
FIFO frontier and links kept in document order, so a deterministic fetcher
yields a deterministic page list.
"""

from __future__ import annotations

import logging
import threading
import time
import urllib.robotparser
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from html.parser import HTMLParser
from urllib.parse import urldefrag, urljoin, urlsplit

__all__ = [
    "CrawlConfig",
    "Page",
    "FetchResult",
    "CrawlReport",
    "CrawlResult",
    "ConfigError",
    "extract_links",
    "extract_text",
    "crawl",
]

log = logging.getLogger(__name__)

MAX_DEPTH_BOUND = 10

_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "br", "dd", "div", "dl",
    "dt", "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2",
    "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p",
    "pre", "section", "table", "td", "th", "title", "tr", "ul",
}
_SKIP_TAGS = {"script", "style", "template", "noscript"}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CrawlConfig:
    seed_urls: tuple[str, ...]
    max_depth: int = 2
    max_pages: int = 100
    same_host_only: bool = True
    delay_ms: int = 0
    max_concurrent_fetches: int = 1
    respect_robots: bool = True

    def __post_init__(self):
        object.__setattr__(self, "seed_urls", tuple(self.seed_urls))
        if self.max_pages < 1:
            raise ConfigError("max_pages must be >= 1")
        if not 0 <= self.max_depth <= MAX_DEPTH_BOUND:
            raise ConfigError(f"max_depth must be in [0, {MAX_DEPTH_BOUND}]")
        if self.delay_ms < 0:
            raise ConfigError("delay_ms must be >= 0")
        if self.max_concurrent_fetches < 1:
            raise ConfigError("max_concurrent_fetches must be >= 1")
        for url in self.seed_urls:
            if urlsplit(url).scheme not in ("http", "https"):
                raise ConfigError(f"seed url must be absolute http(s): {url!r}")


@dataclass(frozen=True)
class Page:
    url: str
    depth: int
    text_blocks: tuple[str, ...]


@dataclass(frozen=True)
class FetchResult:
    status: int
    body: str
    content_type: str = "text/html"


@dataclass
class CrawlReport:
    pages_fetched: int = 0
    failures: list[dict] = field(default_factory=list)
    bytes_fetched: int = 0
    per_site: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "pages_fetched": self.pages_fetched,
            "failures": self.failures,
            "bytes_fetched": self.bytes_fetched,
            "per_site": dict(sorted(self.per_site.items())),
        }


@dataclass
class CrawlResult:
    pages: list[Page]
    report: CrawlReport


class _LinkParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "a":
            for name, value in attrs:
                if name == "href" and value:
                    self.hrefs.append(value)


def extract_links(html: str, base_url: str, same_host_only: bool = False) -> list[str]:
    """Absolute, deduplicated anchor URLs in document order.

    Fragments are stripped and non-http(s) schemes dropped; unparseable
    markup degrades to best-effort extraction.
    """
    parser = _LinkParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:  # lenient by contract
        pass
    base_host = urlsplit(base_url).netloc
    seen = set()
    out = []
    for href in parser.hrefs:
        try:
            url = urldefrag(urljoin(base_url, href.strip()))[0]
        except ValueError:
            continue
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https"):
            continue
        if same_host_only and parts.netloc != base_host:
            continue
        if url not in seen:
            seen.add(url)
            out.append(url)
    return out


class _TextParser(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.blocks: list[str] = []
        self._buf: list[str] = []
        self._skip_depth = 0

    def _flush(self):
        text = " ".join("".join(self._buf).split())
        if text:
            self.blocks.append(text)
        self._buf = []

    def handle_starttag(self, tag, attrs):
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
        elif tag in _BLOCK_TAGS:
            self._flush()

    def handle_endtag(self, tag):
        if tag in _SKIP_TAGS:
            self._skip_depth = max(0, self._skip_depth - 1)
        elif tag in _BLOCK_TAGS:
            self._flush()

    def handle_data(self, data):
        if not self._skip_depth:
            self._buf.append(data)


def extract_text(html: str) -> list[str]:
    """Visible text grouped by block-level elements, in document order."""
    parser = _TextParser()
    try:
        parser.feed(html)
        parser.close()
    except Exception:
        pass
    parser._flush()
    return parser.blocks


class _HostThrottle:
    """Per-host minimum delay between fetches, shared across worker threads."""

    def __init__(self, delay_ms: int):
        self._delay = delay_ms / 1000.0
        self._last: dict[str, float] = {}
        self._lock = threading.Lock()

    def wait(self, host: str):
        if self._delay <= 0:
            return
        while True:
            with self._lock:
                now = time.monotonic()
                last = self._last.get(host, 0.0)
                remaining = last + self._delay - now
                if remaining <= 0:
                    self._last[host] = now
                    return
            time.sleep(remaining)


def _robots_for(host_root: str, fetcher, cache: dict):
    if host_root in cache:
        return cache[host_root]
    rp = urllib.robotparser.RobotFileParser()
    try:
        res = fetcher(host_root + "/robots.txt")
        if res.status == 200:
            rp.parse(res.body.splitlines())
        else:
            rp.parse([])
    except Exception:
        rp.parse([])
    cache[host_root] = rp
    return rp


def crawl(config: CrawlConfig, fetcher) -> CrawlResult:
    """Breadth-first crawl from the seeds; each URL fetched at most once.

    Per-level fetches run on up to max_concurrent_fetches threads, but pages
    are assembled in frontier order, keeping the output deterministic.
    """
    report = CrawlReport()
    pages: list[Page] = []
    visited: set[str] = set()
    robots_cache: dict = {}
    throttle = _HostThrottle(config.delay_ms)

    frontier: list[str] = []
    for url in config.seed_urls:
        clean = urldefrag(url)[0]
        if clean not in visited:
            visited.add(clean)
            frontier.append(clean)
    depth = 0

    def fetch_one(url: str):
        parts = urlsplit(url)
        if config.respect_robots:
            rp = _robots_for(f"{parts.scheme}://{parts.netloc}", fetcher, robots_cache)
            if not rp.can_fetch("*", url):
                return ("skipped", url, "disallowed by robots.txt")
        throttle.wait(parts.netloc)
        try:
            res = fetcher(url)
        except Exception as exc:
            return ("error", url, str(exc))
        if res.status != 200:
            return ("error", url, f"HTTP {res.status}")
        if "html" not in res.content_type.lower():
            return ("skipped", url, f"non-HTML content type {res.content_type}")
        return ("ok", url, res)

    with ThreadPoolExecutor(max_workers=config.max_concurrent_fetches) as pool:
        while frontier and len(pages) < config.max_pages:
            frontier = frontier[: config.max_pages - len(pages)]
            results = list(pool.map(fetch_one, frontier))
            next_frontier: list[str] = []
            for kind, url, payload in results:
                if len(pages) >= config.max_pages:
                    break
                if kind != "ok":
                    log.info("crawl: %s: %s", url, payload)
                    report.failures.append({"url": url, "reason": str(payload)})
                    continue
                res = payload
                host = urlsplit(url).netloc
                page = Page(url=url, depth=depth, text_blocks=tuple(extract_text(res.body)))
                pages.append(page)
                report.pages_fetched += 1
                report.bytes_fetched += len(res.body.encode("utf-8"))
                report.per_site[host] = report.per_site.get(host, 0) + 1
                if depth < config.max_depth:
                    for link in extract_links(
                        res.body, url, same_host_only=config.same_host_only
                    ):
                        if link not in visited:
                            visited.add(link)
                            next_frontier.append(link)
            frontier = next_frontier
            depth += 1
            if depth > config.max_depth:
                break
    return CrawlResult(pages=pages, report=report)
