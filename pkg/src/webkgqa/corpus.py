"""HTML ingestion and token-level chunking of web search results.

A question arrives with a list of pre-fetched pages. Each page contributes
three kinds of retrieval units: chunks of its parsed HTML body, a single
chunk for its name, and chunks of its snippet.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from html import unescape
from html.parser import HTMLParser


class SourceKind(str, Enum):
    PAGE_RESULT = "page_result"
    PAGE_NAME = "page_name"
    PAGE_SNIPPET = "page_snippet"


@dataclass(frozen=True)
class Page:
    """One web search result as stored in the dataset."""

    page_name: str
    page_html: str
    page_snippet: str

    def __post_init__(self) -> None:
        if self.page_name is None or self.page_snippet is None:
            raise ValueError("page_name and page_snippet may be empty but not None")


@dataclass(frozen=True)
class Chunk:
    """A token-bounded span of text, the unit of retrieval."""

    chunk_id: str
    page_index: int
    source_kind: SourceKind
    text: str
    token_count: int


@dataclass(frozen=True)
class ChunkingConfig:
    chunk_size: int = 500
    overlap: int = 0

    def __post_init__(self) -> None:
        if self.chunk_size <= 0:
            raise ValueError("chunking.chunk_size must be positive")
        if self.overlap < 0:
            raise ValueError("chunking.overlap must be non-negative")
        if self.overlap >= self.chunk_size:
            raise ValueError("chunking.overlap must be smaller than chunk_size")


# Tags that delimit visually separate blocks of text. Boundaries of these
# become newlines in the extracted text.
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "br", "caption", "dd",
    "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer", "form",
    "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "li", "main", "nav",
    "ol", "option", "p", "pre", "section", "select", "table", "tbody", "td",
    "tfoot", "th", "thead", "tr", "ul",
}
# Tags whose body is never visible text.
_SKIP_TAGS = {"script", "style"}


class _TextExtractor(HTMLParser):
    """Collects visible text, dropping script/style bodies and comments."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag: str, attrs) -> None:
        if tag in _SKIP_TAGS:
            self._skip_depth += 1
            self.parts.append("\n")
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_startendtag(self, tag: str, attrs) -> None:
        if tag in _BLOCK_TAGS or tag in _SKIP_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag: str) -> None:
        if tag in _SKIP_TAGS:
            if self._skip_depth:
                self._skip_depth -= 1
            self.parts.append("\n")
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data: str) -> None:
        if not self._skip_depth:
            self.parts.append(data)


def _normalize_text(text: str) -> str:
    """Collapse intra-line whitespace, drop blank lines, trim edges."""
    lines = []
    for raw in text.split("\n"):
        line = re.sub(r"\s+", " ", raw).strip()
        if line:
            lines.append(line)
    return "\n".join(lines)


def parse_html(html: str) -> str:
    """Extract visible plain text from (possibly malformed) HTML.

    Script/style bodies and comments are dropped, block-level tag
    boundaries become single newlines, entities are decoded, and runs of
    whitespace collapse to single spaces within lines. Never raises; any
    parser failure falls back to a bare tag strip.
    """
    if not html:
        return ""
    extractor = _TextExtractor()
    try:
        extractor.feed(html)
        extractor.close()
    except Exception:
        stripped = re.sub(r"(?is)<(script|style)\b.*?</\1\s*>", "\n", html)
        stripped = re.sub(r"<[^>]*>", "\n", stripped)
        return _normalize_text(unescape(stripped))
    return _normalize_text("".join(extractor.parts))


# A token is a maximal run of alphanumerics/apostrophes; any other
# non-whitespace character is emitted as a single-character token.
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+|\S")


def tokenize(text: str) -> list[str]:
    """Lowercased word/punctuation tokens; deterministic and total."""
    return _TOKEN_RE.findall(text.lower())


def chunk(
    tokens: list[str],
    cfg: ChunkingConfig,
    *,
    page_index: int = 0,
    source_kind: SourceKind = SourceKind.PAGE_RESULT,
    id_prefix: str = "c",
) -> list[Chunk]:
    """Split a token stream into windows of at most cfg.chunk_size tokens.

    Consecutive windows share exactly cfg.overlap tokens; the final window
    reaches the end of the stream. With overlap 0 the windows partition
    the stream.
    """
    if not tokens:
        return []
    step = cfg.chunk_size - cfg.overlap
    chunks: list[Chunk] = []
    start = 0
    while True:
        window = tokens[start:start + cfg.chunk_size]
        chunks.append(
            Chunk(
                chunk_id=f"{id_prefix}:{len(chunks)}",
                page_index=page_index,
                source_kind=source_kind,
                text=" ".join(window),
                token_count=len(window),
            )
        )
        if start + cfg.chunk_size >= len(tokens):
            break
        start += step
    return chunks


def build_corpus(pages: list[Page], cfg: ChunkingConfig) -> list[Chunk]:
    """Chunk every page's parsed body, name, and snippet, in page order.

    The page name stays a single chunk (truncated to the chunk budget if
    somehow longer); empty fields contribute no chunks.
    """
    corpus: list[Chunk] = []
    for index, page in enumerate(pages):
        body_tokens = tokenize(parse_html(page.page_html))
        corpus.extend(
            chunk(
                body_tokens,
                cfg,
                page_index=index,
                source_kind=SourceKind.PAGE_RESULT,
                id_prefix=f"p{index}:result",
            )
        )
        name_tokens = tokenize(page.page_name)[: cfg.chunk_size]
        if name_tokens:
            corpus.append(
                Chunk(
                    chunk_id=f"p{index}:name:0",
                    page_index=index,
                    source_kind=SourceKind.PAGE_NAME,
                    text=" ".join(name_tokens),
                    token_count=len(name_tokens),
                )
            )
        corpus.extend(
            chunk(
                tokenize(page.page_snippet),
                cfg,
                page_index=index,
                source_kind=SourceKind.PAGE_SNIPPET,
                id_prefix=f"p{index}:snippet",
            )
        )
    return corpus
