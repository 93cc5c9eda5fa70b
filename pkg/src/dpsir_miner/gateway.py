"""Prompt rendering, batched provider execution and structured-response parsing.

All network I/O in the system goes through this module. Batches are submitted
as one awaited group with a semaphore bounding in-flight requests, so a k-fold
repetition of every prompt costs close to one network round trip of wall time.
A deterministic fixture provider makes the whole system runnable offline.
"""
from __future__ import annotations

import asyncio
import hashlib
import json
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .taxonomy import IndicatorKind, PromptTemplate, Step, PLACEHOLDER_RE

NET_RETRIES = 3
BACKOFF_START = 0.5

JSON_BLOCK_RE = re.compile(r"```(?:json)?\s*(\{.*?\})\s*```", re.DOTALL)

INDICATOR_LETTERS = {"D", "P", "S", "I", "R"}


class RenderError(KeyError):
    pass


def render(template: PromptTemplate, bindings: dict[str, str]) -> str:
    """Substitute every ``${name}`` placeholder verbatim; no other mutation."""
    def _sub(text: str) -> str:
        def repl(m: re.Match) -> str:
            name = m.group(1)
            if name not in bindings:
                raise RenderError(f"unbound placeholder: {name}")
            return str(bindings[name])
        return PLACEHOLDER_RE.sub(repl, text)

    parts = [_sub(s) for s in template.sections if s]
    return "\n\n".join(parts)


@dataclass
class StructuredResponse:
    raw_text: str
    parsed: Optional[dict] = None
    parse_attempts: int = 0
    valid: bool = False
    error: Optional[str] = None
    warnings: list = field(default_factory=list)

    def label_set(self) -> frozenset:
        """Labels for uncertainty math; invalid responses contribute the empty set."""
        if not self.valid or self.parsed is None:
            return frozenset()
        if "labels" in self.parsed:
            return frozenset(self.parsed["labels"])
        if self.parsed.get("none"):
            return frozenset()
        if "source" in self.parsed:
            return frozenset({(self.parsed["source"], self.parsed["target"])})
        return frozenset()


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:16]


def extract_json_block(raw: str):
    """Parse the first fenced json block, falling back to a brace scan."""
    m = JSON_BLOCK_RE.search(raw)
    candidates = []
    if m:
        candidates.append(m.group(1))
    start = raw.find("{")
    if start >= 0:
        depth = 0
        for i in range(start, len(raw)):
            if raw[i] == "{":
                depth += 1
            elif raw[i] == "}":
                depth -= 1
                if depth == 0:
                    candidates.append(raw[start:i + 1])
                    break
    for cand in candidates:
        try:
            return json.loads(cand)
        except json.JSONDecodeError:
            continue
    return None


def _as_str_list(value) -> list[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        return [str(v) for v in value]
    return []


def parse_structured(raw: str, step: Step,
                     universe: Optional[Sequence[str]] = None) -> StructuredResponse:
    """Extract the step-specific payload from a raw model reply.

    ``universe``, when given, restricts label values: unknown labels are
    dropped with a warning rather than failing the whole response.
    """
    resp = StructuredResponse(raw_text=raw)
    payload = extract_json_block(raw)
    resp.parse_attempts = 1 if payload is not None else 2  # brace-scan is the retry
    if payload is None or not isinstance(payload, dict):
        resp.error = "no parseable structured block"
        return resp

    if step == Step.INDICATOR_ID:
        labels = []
        for item in _as_str_list(payload.get("labels", [])):
            token = item.strip()
            if token.upper() in INDICATOR_LETTERS:
                labels.append(IndicatorKind.from_letter(token).value)
            elif token.capitalize() in {k.value for k in IndicatorKind}:
                labels.append(token.capitalize())
            else:
                resp.warnings.append(f"unknown indicator label dropped: {token}")
        resp.parsed = {"labels": sorted(set(labels)),
                       "evidence": _as_str_list(payload.get("evidence", [])),
                       "explanation": str(payload.get("explanation", ""))}
        resp.valid = True
    elif step == Step.VARIABLE_ID:
        labels = []
        allowed = {u.lower(): u for u in universe} if universe is not None else None
        for item in _as_str_list(payload.get("labels", [])):
            token = item.strip()
            if allowed is None:
                labels.append(token)
            elif token.lower() in allowed:
                labels.append(allowed[token.lower()])
            else:
                resp.warnings.append(f"unknown variable label dropped: {token}")
        resp.parsed = {"labels": sorted(set(labels)),
                       "evidence": _as_str_list(payload.get("evidence", [])),
                       "explanation": str(payload.get("explanation", ""))}
        resp.valid = True
    elif step == Step.LINK_ID:
        if payload.get("none"):
            resp.parsed = {"none": True}
            resp.valid = True
        elif "source" in payload and "target" in payload:
            source, target = str(payload["source"]), str(payload["target"])
            if source == target:
                resp.error = "self-link rejected"
            elif universe is not None and (source not in universe or target not in universe):
                resp.parsed = {"none": True}
                resp.valid = True
                resp.warnings.append(f"link with unknown variable dropped: {source}->{target}")
            else:
                resp.parsed = {"source": source, "target": target,
                               "relationship": str(payload.get("relationship", "")),
                               "evidence": _as_str_list(payload.get("evidence", [])),
                               "explanation": str(payload.get("explanation", ""))}
                resp.valid = True
        else:
            resp.error = "link reply missing source/target and none-marker"
    elif step == Step.TOPIC_LABEL:
        label = str(payload.get("label", "")).strip()
        if label:
            resp.parsed = {"label": " ".join(label.split()[:6])}  # hard cap at 6 words
            resp.valid = True
        else:
            resp.error = "empty topic label"
    elif step == Step.KEYWORD_EXTRACT:
        keywords = [k.strip().lower() for k in _as_str_list(payload.get("keywords", [])) if k.strip()]
        resp.parsed = {"keywords": keywords[:5]}
        resp.valid = True
    else:
        resp.parsed = payload
        resp.valid = True
    return resp


class FixtureProvider:
    """Pure-function provider for offline runs.

    Completions are looked up by (prompt hash, repetition index) in a scripted
    response table; unknown prompts get a deterministic fallback derived from
    the hash bits so new prompts never crash a test. Embeddings are seeded from
    the text hash. ``latency`` simulates network delay without burning CPU.
    """

    kind = "fixture"

    def __init__(self, responses: Optional[dict] = None, latency: float = 0.0,
                 embedding_dim: int = 1536, embedding_overrides: Optional[dict] = None,
                 model_name: str = "fixture", temperature: float = 0.0,
                 max_in_flight: int = 256):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.responses = dict(responses or {})
        self.latency = latency
        self.embedding_dim = embedding_dim
        self.embedding_overrides = dict(embedding_overrides or {})
        self.model_name = model_name
        self.temperature = temperature
        self.max_in_flight = max_in_flight
        # instrumentation for backpressure assertions
        self.call_count = 0
        self._in_flight = 0
        self.max_observed_in_flight = 0
        self.seen_prompts: list[str] = []

    @classmethod
    def from_directory(cls, path: Path | str, **kwargs) -> "FixtureProvider":
        """Load scripted responses from ``<hash>.<rep>.txt`` files."""
        responses: dict = {}
        for file in sorted(Path(path).glob("*.txt")):
            parts = file.stem.split(".")
            if len(parts) == 2:
                responses[f"{parts[0]}:{parts[1]}"] = file.read_text(encoding="utf-8")
            else:
                responses[parts[0]] = file.read_text(encoding="utf-8")
        return cls(responses=responses, **kwargs)

    def script(self, prompt: str, reply: str, rep: Optional[int] = None) -> None:
        h = prompt_hash(prompt)
        key = h if rep is None else f"{h}:{rep}"
        self.responses[key] = reply

    def lookup(self, prompt: str, rep: int) -> str:
        h = prompt_hash(prompt)
        for key in (f"{h}:{rep}", h):
            if key in self.responses:
                return self.responses[key]
        return self._fallback(h)

    @staticmethod
    def _fallback(h: str) -> str:
        return ('```json\n{"labels": [], "evidence": [], '
                f'"explanation": "fallback-{h[:8]}"}}\n```')

    async def acomplete(self, prompt: str, rep: int = 0) -> str:
        self.call_count += 1
        self.seen_prompts.append(prompt)
        self._in_flight += 1
        self.max_observed_in_flight = max(self.max_observed_in_flight, self._in_flight)
        try:
            if self.latency:
                await asyncio.sleep(self.latency)
            return self.lookup(prompt, rep)
        finally:
            self._in_flight -= 1

    async def aembed(self, texts: Sequence[str]) -> list[list[float]]:
        self.call_count += 1
        if self.latency:
            await asyncio.sleep(self.latency)
        return [self.embed_text(t) for t in texts]

    def embed_text(self, text: str) -> list[float]:
        if text in self.embedding_overrides:
            return list(self.embedding_overrides[text])
        digest = hashlib.sha256(text.encode("utf-8")).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        v = rng.standard_normal(self.embedding_dim)
        v /= np.linalg.norm(v)
        return v.tolist()


class TimeoutProvider(FixtureProvider):
    """Fixture variant that always fails; used to exercise degraded mode."""

    async def acomplete(self, prompt: str, rep: int = 0) -> str:
        self.call_count += 1
        raise TimeoutError("simulated provider timeout")

    async def aembed(self, texts: Sequence[str]) -> list[list[float]]:
        raise TimeoutError("simulated provider timeout")


class RemoteProvider:
    """Chat-completions / embeddings over HTTPS; API key from DPSIR_API_KEY."""

    kind = "remote-http"

    def __init__(self, model_name: str = "gpt-4o-mini",
                 embedding_model: str = "text-embedding-3-small",
                 base_url: str = "https://api.openai.com/v1",
                 temperature: float = 0.0, max_in_flight: int = 64,
                 api_key: Optional[str] = None):
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        self.model_name = model_name
        self.embedding_model = embedding_model
        self.base_url = base_url.rstrip("/")
        self.temperature = temperature
        self.max_in_flight = max_in_flight
        self.api_key = api_key or os.environ.get("DPSIR_API_KEY", "")

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.api_key}",
                "Content-Type": "application/json"}

    async def acomplete(self, prompt: str, rep: int = 0) -> str:
        import httpx
        async with httpx.AsyncClient(timeout=120) as client:
            r = await client.post(
                f"{self.base_url}/chat/completions", headers=self._headers(),
                json={"model": self.model_name, "temperature": self.temperature,
                      "messages": [{"role": "user", "content": prompt}]})
            r.raise_for_status()
            return r.json()["choices"][0]["message"]["content"]

    async def aembed(self, texts: Sequence[str]) -> list[list[float]]:
        import httpx
        async with httpx.AsyncClient(timeout=120) as client:
            r = await client.post(
                f"{self.base_url}/embeddings", headers=self._headers(),
                json={"model": self.embedding_model, "input": list(texts)})
            r.raise_for_status()
            return [item["embedding"] for item in r.json()["data"]]


async def _call_with_retries(provider, prompt: str, rep: int, semaphore: asyncio.Semaphore,
                             retries: int, backoff: float) -> tuple[Optional[str], Optional[str]]:
    last_error = None
    for attempt in range(retries):
        try:
            async with semaphore:
                return await provider.acomplete(prompt, rep=rep), None
        except Exception as exc:  # transport failures must not poison the batch
            last_error = f"{type(exc).__name__}: {exc}"
            if attempt + 1 < retries:
                await asyncio.sleep(backoff * (2 ** attempt))
    return None, last_error


async def _execute_batch_async(requests: Sequence[str], k: int, provider,
                               step: Optional[Step], universe: Optional[Sequence[str]],
                               retries: int, backoff: float, repair: bool) -> list[list[StructuredResponse]]:
    semaphore = asyncio.Semaphore(provider.max_in_flight)

    async def one(prompt: str, rep: int) -> StructuredResponse:
        raw, err = await _call_with_retries(provider, prompt, rep, semaphore, retries, backoff)
        if raw is None:
            return StructuredResponse(raw_text="", valid=False,
                                      error=f"retries exhausted: {err}")
        if step is None:
            return StructuredResponse(raw_text=raw, parsed={"raw": raw}, valid=True)
        resp = parse_structured(raw, step, universe=universe)
        if not resp.valid and repair:
            repair_prompt = (prompt + "\n\nYour previous reply could not be parsed. "
                             "Reply again with ONLY a fenced json block in the requested schema.")
            raw2, err2 = await _call_with_retries(provider, repair_prompt, rep,
                                                  semaphore, retries, backoff)
            if raw2 is not None:
                resp2 = parse_structured(raw2, step, universe=universe)
                resp2.parse_attempts += resp.parse_attempts
                if resp2.valid:
                    return resp2
            resp.error = resp.error or err2
        return resp

    tasks = [one(prompt, rep) for prompt in requests for rep in range(k)]
    flat = await asyncio.gather(*tasks)
    return [list(flat[i * k:(i + 1) * k]) for i in range(len(requests))]


def execute_batch(requests: Sequence[str], k: int, provider, step: Optional[Step] = None,
                  universe: Optional[Sequence[str]] = None, retries: int = NET_RETRIES,
                  backoff: float = BACKOFF_START, repair: bool = True) -> list[list[StructuredResponse]]:
    """Dispatch all N*k prompt repetitions concurrently; one completion barrier.

    Results are grouped per request in dispatch order. A request that exhausts
    its retries yields an invalid StructuredResponse; the batch never aborts.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    return asyncio.run(_execute_batch_async(list(requests), k, provider, step,
                                            universe, retries, backoff, repair))


def complete_one(provider, prompt: str, rep: int = 0) -> str:
    """Single synchronous completion with the standard retry policy."""
    async def runner() -> str:
        sem = asyncio.Semaphore(provider.max_in_flight)
        raw, err = await _call_with_retries(provider, prompt, rep, sem,
                                            NET_RETRIES, BACKOFF_START)
        if raw is None:
            raise RuntimeError(f"provider failed: {err}")
        return raw
    return asyncio.run(runner())


def embed_texts(provider, texts: Sequence[str], batch_size: int = 64) -> list[list[float]]:
    """Embed texts in batches through the provider."""
    async def runner() -> list[list[float]]:
        out: list[list[float]] = []
        for i in range(0, len(texts), batch_size):
            out.extend(await provider.aembed(list(texts[i:i + batch_size])))
        return out
    return asyncio.run(runner())
