"""Text concept extraction from clinical documents.

Documents are whitespace-tokenized and cut into overlapping chunks; each chunk
is rendered into a Yes/No prompt and sent to an extractor client. A concept is
positive if any chunk of any routed document answers Yes (OR aggregation), so
route order only affects how many queries are issued, never the result.

Routing, trigger phrases and prompt wording live in resources/text_routing.json
so the synthetic document generator and the extractor stay in sync. A planted
trigger phrase is at most five tokens, safely below the default chunk overlap,
so chunking can never split every occurrence.
"""

from __future__ import annotations

import json
import urllib.request
from dataclasses import dataclass
from importlib import resources
from typing import Protocol

from .schema import Cohort, SchemaError

PROMPT_TEMPLATE = (
    "Context: You are a clinician receiving chunks of clinical text for "
    "patients in an ICU. Please do the reviewing as quickly as possible.\n"
    "Task: {task}\n"
    "Instructions: Answer with `Yes' or `No'. If there is not enough "
    "information, answer `No'.\n"
    "{kind} Text:\n"
    "{chunk}\n"
    "Query: {query} Answer strictly in `Yes' or `No'."
)


def load_routing() -> dict[str, dict]:
    with resources.files("cbmw.resources").joinpath("text_routing.json").open(
            "r", encoding="utf-8") as fh:
        return json.load(fh)


def trigger_phrase(concept: str, routing: dict | None = None) -> str:
    routing = routing if routing is not None else load_routing()
    return routing[concept]["trigger"]


@dataclass(frozen=True)
class ChunkConfig:
    chunk_size: int = 256
    overlap: int = 16


def tokenize(text: str) -> list[str]:
    return text.split()


def chunk_tokens(tokens: list[str], cfg: ChunkConfig) -> list[str]:
    """Overlapping chunks at offsets 0, s, 2s, ... with stride
    s = chunk_size - overlap; generation stops once a chunk's end covers the
    last token. Ten tokens at size 4 / overlap 1 give [0,4), [3,7), [6,10)."""
    if cfg.chunk_size < 1:
        raise ValueError(f"chunk_size must be >= 1, got {cfg.chunk_size}")
    if not (0 <= cfg.overlap < cfg.chunk_size):
        raise ValueError(f"overlap must be in [0, chunk_size), got {cfg.overlap}")
    if not tokens:
        return []
    stride = cfg.chunk_size - cfg.overlap
    chunks, off = [], 0
    while True:
        chunks.append(" ".join(tokens[off:off + cfg.chunk_size]))
        if off + cfg.chunk_size >= len(tokens):
            break
        off += stride
    return chunks


def render_prompt(kind: str, chunk: str, task: str, query: str) -> str:
    return PROMPT_TEMPLATE.format(kind=kind.capitalize(), chunk=chunk,
                                  task=task, query=query)


def parse_response(text: str) -> int:
    """Positive only when the trimmed reply starts with yes, any casing;
    everything else (no, refusals, chatter) counts as No."""
    return 1 if text.strip().lower().startswith("yes") else 0


class ExtractorClient(Protocol):
    def answer(self, prompt: str) -> str: ...


class MockExtractor:
    """Deterministic stand-in for an LLM: answers Yes exactly when the routed
    trigger phrase occurs in the prompt's document chunk (case-insensitive).

    It recovers the concept from the query line and the chunk from the text
    section, so it exercises the same prompt surface a real client sees.
    """

    def __init__(self, routing: dict | None = None):
        self.routing = routing if routing is not None else load_routing()
        self.calls = 0

    def answer(self, prompt: str) -> str:
        self.calls += 1
        _, _, rest = prompt.partition(" Text:\n")
        chunk, _, _ = rest.partition("\nQuery:")
        concept = None
        for name, entry in self.routing.items():
            if entry["query"] in prompt:
                concept = name
                break
        if concept is None:
            return "No"
        hit = self.routing[concept]["trigger"].lower() in chunk.lower()
        return "Yes" if hit else "No"


class HttpExtractor:
    """POSTs {"prompt": ...} to an endpoint and reads {"answer": ...} back."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def answer(self, prompt: str) -> str:
        body = json.dumps({"prompt": prompt}).encode("utf-8")
        req = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return json.loads(resp.read().decode("utf-8"))["answer"]


def extract_concept(documents: dict[str, str], entry: dict,
                    client: ExtractorClient, cfg: ChunkConfig) -> float:
    """Query routed documents in order, chunk by chunk, short-circuiting on
    the first Yes. Missing documents are skipped; no documents means No."""
    for kind in entry["route"]:
        text = documents.get(kind)
        if not text:
            continue
        for chunk in chunk_tokens(tokenize(text), cfg):
            prompt = render_prompt(kind, chunk, entry["task"], entry["query"])
            if parse_response(client.answer(prompt)) == 1:
                return 1.0
    return 0.0


def extract_all(cohort: Cohort, client: ExtractorClient,
                cfg: ChunkConfig | None = None,
                routing: dict | None = None) -> dict[str, dict[str, float]]:
    """Extract every text concept for every record, in cohort and schema
    order. Returns {record id: {concept: 0.0 or 1.0}}."""
    cfg = cfg if cfg is not None else ChunkConfig()
    routing = routing if routing is not None else load_routing()
    names = [c.name for c in cohort.concept_schema.text]
    missing = [n for n in names if n not in routing]
    if missing:
        raise SchemaError(f"no routing entry for text concepts: {missing}")
    out: dict[str, dict[str, float]] = {}
    for r in cohort.records:
        out[r.id] = {n: extract_concept(r.documents, routing[n], client, cfg)
                     for n in names}
    return out
