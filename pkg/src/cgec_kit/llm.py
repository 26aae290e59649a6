"""Chat-completion client for clue-guided generation: retries, cache, checks.

Speaks the OpenAI-compatible wire schema (POST /chat/completions with a
single user message), retries transient failures with exponential backoff,
and caches results on disk keyed by (model, prompt, temperature, max_tokens)
so warm runs are reproducible and never hit the network twice.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import requests

from ._util import atomic_write
from .corpus import PairSource, ParallelPair
from .errors import AuthenticationError, ConfigurationError, TransportError, ValidationError
from .synthesis import ClueRule, CluePrompt, corrupt_once, find_rule_for_clues, repair_once

logger = logging.getLogger(__name__)

MAX_ATTEMPTS = 5
_RETRYABLE_STATUS = {408, 429, 500, 502, 503, 504}

# "1. sentence" or "1、sentence"; anything else counts as a bare line.
_NUMBERED_LINE = re.compile(r"^\s*\d+\s*[.、]\s*(.*)$")

_key_locks: dict[str, threading.Lock] = {}
_key_locks_guard = threading.Lock()


@dataclass(frozen=True)
class GenerationRequest:
    """One generation call: a rendered clue prompt plus sampling settings."""

    prompt: CluePrompt
    model_name: str
    temperature: float = 1.0
    max_tokens: int = 512

    def __post_init__(self) -> None:
        if not self.model_name:
            raise ValidationError("model_name must be non-empty")
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens < 1:
            raise ValidationError(f"max_tokens must be >= 1, got {self.max_tokens}")


@dataclass(frozen=True)
class GenerationResult:
    """Raw reply text plus the deduplicated sentences parsed out of it."""

    raw_text: str
    parsed_sentences: tuple[str, ...]
    cache_hit: bool
    attempts: int = 0


def parse_sentences(raw_text: str) -> tuple[str, ...]:
    """Split a reply into sentences: numbered lines or bare lines, deduplicated."""
    sentences: list[str] = []
    for line in raw_text.splitlines():
        match = _NUMBERED_LINE.match(line)
        sentence = match.group(1).strip() if match else line.strip()
        if sentence and sentence not in sentences:
            sentences.append(sentence)
    return tuple(sentences)


def complete_chat(
    request: GenerationRequest,
    endpoint: str,
    credentials: str | None,
    *,
    timeout: float = 60.0,
    backoff_base: float = 0.5,
) -> GenerationResult:
    """Send one chat-completion request, retrying transient failures.

    Up to MAX_ATTEMPTS attempts with exponential backoff; authentication
    rejections are never retried.  An unparseable reply yields empty
    parsed_sentences with the raw text preserved.
    """
    if not credentials:
        raise ConfigurationError(
            "no API credentials; set CGEC_API_KEY or pass credentials explicitly"
        )
    url = endpoint.rstrip("/") + "/chat/completions"
    body = {
        "model": request.model_name,
        "messages": [{"role": "user", "content": request.prompt.rendered}],
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    }
    headers = {
        "Authorization": f"Bearer {credentials}",
        "Content-Type": "application/json",
    }
    last_error = ""
    for attempt in range(1, MAX_ATTEMPTS + 1):
        if attempt > 1:
            time.sleep(backoff_base * 2 ** (attempt - 2))
        try:
            response = requests.post(url, json=body, headers=headers, timeout=timeout)
        except requests.RequestException as exc:
            last_error = f"connection failed: {exc}"
            logger.warning("attempt %d/%d: %s", attempt, MAX_ATTEMPTS, last_error)
            continue
        if response.status_code in (401, 403):
            raise AuthenticationError(
                f"endpoint rejected credentials (HTTP {response.status_code})"
            )
        if response.status_code in _RETRYABLE_STATUS:
            last_error = f"HTTP {response.status_code}"
            logger.warning("attempt %d/%d: %s", attempt, MAX_ATTEMPTS, last_error)
            continue
        if response.status_code != 200:
            raise TransportError(f"unexpected HTTP {response.status_code} from {url}")
        try:
            payload = response.json()
            raw_text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat-completion response: {exc}") from exc
        if not isinstance(raw_text, str):
            raise TransportError("malformed chat-completion response: content is not text")
        parsed = parse_sentences(raw_text)
        if not parsed:
            logger.warning("reply contained no parseable sentences")
        return GenerationResult(
            raw_text=raw_text, parsed_sentences=parsed, cache_hit=False, attempts=attempt
        )
    raise TransportError(f"giving up after {MAX_ATTEMPTS} attempts: {last_error}")


def cache_key(request: GenerationRequest) -> str:
    material = json.dumps(
        [request.model_name, request.prompt.rendered, request.temperature, request.max_tokens],
        ensure_ascii=False,
    )
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def _lock_for(key: str) -> threading.Lock:
    with _key_locks_guard:
        return _key_locks.setdefault(key, threading.Lock())


def _read_cache(path: str) -> GenerationResult | None:
    try:
        with open(path, encoding="utf-8") as handle:
            obj = json.load(handle)
        raw_text = obj["raw_text"]
        parsed = obj["parsed_sentences"]
        if not isinstance(raw_text, str) or not isinstance(parsed, list):
            raise ValueError("wrong field types")
        return GenerationResult(
            raw_text=raw_text,
            parsed_sentences=tuple(str(s) for s in parsed),
            cache_hit=True,
            attempts=0,
        )
    except FileNotFoundError:
        return None
    except (ValueError, KeyError, TypeError) as exc:
        logger.warning("corrupt cache entry %s (%s); regenerating", path, exc)
        return None


def cached_generate(
    request: GenerationRequest,
    endpoint: str,
    credentials: str | None,
    cache_dir: str,
    **kwargs,
) -> GenerationResult:
    """complete_chat behind a disk cache; identical requests hit the network once.

    Cache entries live under cache_dir as <sha256-hex>.json; corrupt entries
    are treated as misses and overwritten.
    """
    os.makedirs(cache_dir, exist_ok=True)
    key = cache_key(request)
    path = os.path.join(cache_dir, f"{key}.json")
    cached = _read_cache(path)
    if cached is not None:
        return cached
    with _lock_for(key):
        cached = _read_cache(path)
        if cached is not None:
            return cached
        result = complete_chat(request, endpoint, credentials, **kwargs)
        with atomic_write(path) as handle:
            json.dump(
                {"raw_text": result.raw_text, "parsed_sentences": list(result.parsed_sentences)},
                handle,
                ensure_ascii=False,
            )
        return result


def generate_many(
    requests_batch: Sequence[GenerationRequest],
    endpoint: str,
    credentials: str | None,
    cache_dir: str,
    max_concurrency: int = 4,
    **kwargs,
) -> list[GenerationResult]:
    """Run cached_generate over a batch with at most max_concurrency in flight.

    Results keep input order.
    """
    if max_concurrency < 1:
        raise ValidationError(f"max_concurrency must be >= 1, got {max_concurrency}")
    with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
        futures = [
            pool.submit(cached_generate, request, endpoint, credentials, cache_dir, **kwargs)
            for request in requests_batch
        ]
        return [future.result() for future in futures]


def validate_generated(
    sentences: Sequence[str],
    clue_pair: tuple[str, str],
    rules: Sequence[ClueRule] | None = None,
) -> list[ParallelPair]:
    """Filter generated sentences and derive their grammatical sides.

    A sentence survives when it contains both clue strings, the matching
    repair rule changes it, and re-corrupting the repaired text reproduces
    the sentence byte-exact.  Survivors become llm_generated pairs.
    """
    rule = find_rule_for_clues(clue_pair, rules)
    clue_a, clue_b = clue_pair
    pairs: list[ParallelPair] = []
    seen: set[str] = set()
    for sentence in sentences:
        if sentence in seen:
            continue
        seen.add(sentence)
        if clue_a not in sentence or clue_b not in sentence:
            logger.debug("dropping sentence without both clues: %r", sentence)
            continue
        grammatical = repair_once(rule, sentence)
        if grammatical == sentence:
            logger.debug("dropping sentence the repair rule cannot change: %r", sentence)
            continue
        if corrupt_once(rule, grammatical) != sentence:
            logger.warning(
                "rule %s: corrupt(repair(s)) != s, discarding %r", rule.id, sentence
            )
            continue
        digest = hashlib.sha1(sentence.encode("utf-8")).hexdigest()[:10]
        pairs.append(
            ParallelPair(
                id=f"{rule.id}-llm-{digest}",
                ungrammatical=sentence,
                grammatical=grammatical,
                error_type=rule.error_type,
                source=PairSource.LLM_GENERATED,
            )
        )
    return pairs
