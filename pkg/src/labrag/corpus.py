"""Encyclopedia page ingestion: parse lab-test pages and build the document corpus."""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
import urllib.robotparser
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from typing import Optional

import requests

USER_AGENT = "labrag/0.1 (+corpus ingestion; contact: ops@localhost)"

_HEADING_LEVELS = {"h1": 1, "h2": 2, "h3": 3, "h4": 4, "h5": 5, "h6": 6}
_SKIP_CONTENT = {"script", "style", "noscript"}


class MalformedHtml(Exception):
    """Input could not be interpreted as an encyclopedia page."""


class EmptySection(Exception):
    """A 'Normal Results' heading exists but carries no text content."""


class SchemaError(Exception):
    """Corpus file violates the expected record schema."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class IoError(Exception):
    """File could not be read or written."""


class CrawlFailed(Exception):
    """Every fetch in a crawl failed."""


def doc_id_for(lab_name: str) -> str:
    """Stable 16-hex-char id derived from the lowercased lab name."""
    return hashlib.sha256(lab_name.lower().encode("utf-8")).hexdigest()[:16]


def _squash_ws(text: str) -> str:
    return re.sub(r"\s+", " ", text).strip()


@dataclass(frozen=True)
class RawPage:
    url: str
    html: str
    fetched_at: datetime

    def __post_init__(self):
        if not self.url or not re.match(r"https?://", self.url):
            raise ValueError(f"invalid url: {self.url!r}")
        if not self.html:
            raise ValueError("empty html body")


@dataclass(frozen=True)
class LabDocument:
    lab_name: str
    normal_results: str
    url: str
    doc_id: str = ""

    def __post_init__(self):
        name = self.lab_name.strip()
        object.__setattr__(self, "lab_name", name)
        if not name:
            raise ValueError("empty lab_name")
        if not self.normal_results.strip():
            raise ValueError("empty normal_results")
        expected = doc_id_for(name)
        if self.doc_id and self.doc_id != expected:
            raise ValueError(f"doc_id {self.doc_id!r} does not match lab_name hash {expected!r}")
        object.__setattr__(self, "doc_id", expected)


def format_document(doc: LabDocument) -> str:
    """The exact text that gets embedded for a document."""
    return f"{doc.lab_name}: {doc.normal_results}"


@dataclass(frozen=True)
class Corpus:
    documents: tuple[LabDocument, ...]
    source_tag: str = "untagged"

    def __post_init__(self):
        docs = tuple(sorted(self.documents, key=lambda d: d.doc_id))
        ids = [d.doc_id for d in docs]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate doc_ids: {dupes}")
        names = [d.lab_name for d in docs]
        if len(set(names)) != len(names):
            raise ValueError("duplicate lab_name in corpus")
        object.__setattr__(self, "documents", docs)

    def __len__(self) -> int:
        return len(self.documents)


class _PageTokenizer(HTMLParser):
    """Flattens a tag-soup page into (kind, payload) tokens.

    Kinds: heading_start(level) / heading_end, li_start / li_end,
    block_break, text(str).
    """

    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.tokens: list[tuple[str, object]] = []
        self._skip_depth = 0
        self.saw_tag = False
        self.title_parts: list[str] = []
        self._in_title = False
        self._heading_open = False

    def _close_heading(self):
        if self._heading_open:
            self.tokens.append(("heading_end", None))
            self._heading_open = False

    def handle_starttag(self, tag, attrs):
        self.saw_tag = True
        if tag in _SKIP_CONTENT:
            self._skip_depth += 1
            return
        if tag == "title":
            self._in_title = True
        elif tag in _HEADING_LEVELS:
            # tag soup: a new heading implicitly closes an unclosed one
            self._close_heading()
            self.tokens.append(("heading_start", _HEADING_LEVELS[tag]))
            self._heading_open = True
        elif tag == "li":
            self._close_heading()
            self.tokens.append(("li_start", None))
        elif tag in {"p", "div", "section", "article", "table", "tr", "blockquote", "br", "dt", "dd", "ul", "ol"}:
            self._close_heading()
            self.tokens.append(("block_break", None))

    def handle_endtag(self, tag):
        if tag in _SKIP_CONTENT:
            self._skip_depth = max(0, self._skip_depth - 1)
            return
        if tag == "title":
            self._in_title = False
        elif tag in _HEADING_LEVELS:
            self._close_heading()
        elif tag == "li":
            self.tokens.append(("li_end", None))
        elif tag in {"p", "div", "section", "article", "table", "tr", "blockquote", "dt", "dd", "ul", "ol"}:
            self.tokens.append(("block_break", None))

    def handle_data(self, data):
        if self._skip_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
            return
        if data.strip():
            self.tokens.append(("text", data))


def _section_text(tokens, start: int, level: int) -> str:
    """Collect block text after token index `start` until a heading of level <= `level`.

    Paragraph blocks are joined with a single space; list items with "; ".
    """
    segments: list[tuple[str, str]] = []  # (kind, text)
    buf: list[str] = []
    kind_stack: list[str] = []
    cur_kind = "p"

    def flush():
        nonlocal buf
        text = _squash_ws(" ".join(buf))
        if text:
            segments.append((cur_kind, text))
        buf = []

    i = start
    in_heading = 0
    while i < len(tokens):
        kind, payload = tokens[i]
        if kind == "heading_start":
            if payload <= level:
                break
            in_heading += 1
        elif kind == "heading_end":
            in_heading = max(0, in_heading - 1)
        elif kind == "li_start":
            flush()
            kind_stack.append(cur_kind)
            cur_kind = "li"
        elif kind == "li_end":
            flush()
            cur_kind = kind_stack.pop() if kind_stack else "p"
        elif kind == "block_break":
            flush()
        elif kind == "text" and not in_heading:
            buf.append(payload)
        i += 1
    flush()

    out: list[str] = []
    prev_kind = None
    for seg_kind, text in segments:
        if out:
            out.append("; " if (seg_kind == "li" and prev_kind == "li") else " ")
        out.append(text)
        prev_kind = seg_kind
    return "".join(out)


def parse_page(page: RawPage) -> Optional[LabDocument]:
    """Extract the 'Normal Results' section from one encyclopedia page.

    Returns None when the page has no 'Normal Results' heading. Raises
    EmptySection when the heading exists but the section has no text.
    """
    tok = _PageTokenizer()
    try:
        tok.feed(page.html)
        tok.close()
    except Exception as exc:  # pragma: no cover - html.parser is very lenient
        raise MalformedHtml(str(exc)) from exc
    if not tok.saw_tag:
        raise MalformedHtml("no markup found in page body")

    tokens = tok.tokens

    # Lab name: first <h1> text, falling back to <title>.
    lab_name = None
    for i, (kind, payload) in enumerate(tokens):
        if kind == "heading_start" and payload == 1:
            parts = []
            for k, p in tokens[i + 1:]:
                if k == "heading_end":
                    break
                if k == "text":
                    parts.append(p)
            lab_name = _squash_ws(" ".join(parts))
            break
    if not lab_name:
        lab_name = _squash_ws(" ".join(tok.title_parts))
    if not lab_name:
        raise MalformedHtml("page has no <h1> or <title>")

    # Locate the Normal Results heading and its level.
    target = None
    i = 0
    while i < len(tokens):
        kind, payload = tokens[i]
        if kind == "heading_start":
            parts = []
            j = i + 1
            while j < len(tokens) and tokens[j][0] != "heading_end":
                if tokens[j][0] == "text":
                    parts.append(tokens[j][1])
                j += 1
            if _squash_ws(" ".join(parts)).lower() == "normal results":
                target = (j + 1, payload)
                break
            i = j
        i += 1
    if target is None:
        return None

    text = _section_text(tokens, target[0], target[1])
    if not text:
        raise EmptySection(f"'Normal Results' section of {page.url} is empty")
    return LabDocument(lab_name=lab_name, normal_results=text, url=page.url)


# --- corpus file io (JSON Lines) ---

_DOC_FIELDS = ["doc_id", "lab_name", "normal_results", "url"]


def write_corpus(corpus: Corpus, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(json.dumps({"source_tag": corpus.source_tag}) + "\n")
            for doc in corpus.documents:
                rec = {k: getattr(doc, k) for k in _DOC_FIELDS}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_corpus(path) -> Corpus:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc

    source_tag = "untagged"
    docs: list[LabDocument] = []
    seen: set[str] = set()
    for n, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid json: {exc}", line=n) from exc
        if n == 1 and set(rec) == {"source_tag"}:
            source_tag = rec["source_tag"]
            continue
        missing = [k for k in _DOC_FIELDS if k not in rec]
        if missing:
            raise SchemaError(f"missing fields {missing}", line=n)
        unknown = [k for k in rec if k not in _DOC_FIELDS]
        if unknown:
            raise SchemaError(f"unknown fields {unknown}", line=n)
        if rec["doc_id"] in seen:
            raise SchemaError(f"duplicate doc_id {rec['doc_id']!r}", line=n)
        seen.add(rec["doc_id"])
        try:
            docs.append(LabDocument(**rec))
        except ValueError as exc:
            raise SchemaError(str(exc), line=n) from exc
    return Corpus(documents=tuple(docs), source_tag=source_tag)


# --- crawling ---

@dataclass
class CrawlReport:
    pages: list[RawPage] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)  # (url, reason)


class _RateLimiter:
    def __init__(self, per_sec: float):
        self.interval = 1.0 / per_sec
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self):
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            time.sleep(delay)


def crawl(index_urls: list[str], rate_limit: float = 1.0, *,
          obey_robots: bool = True, timeout: float = 20.0,
          session: Optional[requests.Session] = None) -> CrawlReport:
    """Fetch pages politely, deduplicated by URL. Per-URL failures are recorded,
    not fatal; raises CrawlFailed only when every fetch fails."""
    if rate_limit <= 0:
        raise ValueError("rate_limit must be > 0")
    sess = session or requests.Session()
    sess.headers.setdefault("User-Agent", USER_AGENT)
    limiter = _RateLimiter(rate_limit)
    robots_cache: dict[str, urllib.robotparser.RobotFileParser] = {}
    report = CrawlReport()

    seen: set[str] = set()
    for url in index_urls:
        if url in seen:
            continue
        seen.add(url)

        if obey_robots:
            host = re.match(r"(https?://[^/]+)", url)
            if host:
                base = host.group(1)
                rp = robots_cache.get(base)
                if rp is None:
                    rp = urllib.robotparser.RobotFileParser(base + "/robots.txt")
                    try:
                        rp.read()
                    except Exception:
                        rp.allow_all = True
                    robots_cache[base] = rp
                if not rp.can_fetch(USER_AGENT, url):
                    report.failures.append((url, "disallowed by robots.txt"))
                    continue

        limiter.wait()
        try:
            resp = sess.get(url, timeout=timeout)
            resp.raise_for_status()
            report.pages.append(RawPage(
                url=url, html=resp.text,
                fetched_at=datetime.now(timezone.utc).replace(microsecond=0)))
        except (requests.RequestException, ValueError) as exc:
            report.failures.append((url, str(exc)))

    if not report.pages and report.failures:
        raise CrawlFailed(f"all {len(report.failures)} fetches failed")
    return report
