"""Client that fills missing reference explanations from a chat endpoint.

The wire shape is a minimal chat completion:
  POST {endpoint}/chat
    {"model": "...", "messages": [{"role": "system", ...},
     {"role": "user", ...}], "temperature": 0, "max_tokens": N}
  -> {"content": "<explanation text>"}

Credentials come from the TEACHER_API_KEY environment variable (sent as a
bearer token). Responses are cached by a content hash of the rendered
prompt plus model name, so re-running a partially completed generation
pass costs no requests. Transient failures degrade to a partial corpus
plus a failure report; only authentication failures abort the run.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .corpus import Corpus, Instance
from .hashutil import fnv1a_hex

log = logging.getLogger(__name__)

API_KEY_ENV = "TEACHER_API_KEY"

_PLACEHOLDERS = ("claim", "evidence", "label")
_PLACEHOLDER_RE = re.compile(r"\{(claim|evidence|label)\}")


class TeacherError(Exception):
    pass


class MissingPlaceholder(TeacherError):
    pass


class AuthFailure(TeacherError):
    pass


class RateLimited(TeacherError):
    pass


class EndpointError(TeacherError):
    pass


@dataclass
class PromptTemplate:
    """System text plus a user template with {claim} {evidence} {label}."""

    system_text: str
    user_template: str

    def validate(self) -> None:
        for name in _PLACEHOLDERS:
            count = self.user_template.count("{" + name + "}")
            if count != 1:
                raise MissingPlaceholder(
                    f"placeholder {{{name}}} must appear exactly once, found {count}"
                )

    @classmethod
    def load(cls, path: str | Path) -> "PromptTemplate":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        template = cls(system_text=data.get("system", ""), user_template=data["user"])
        template.validate()
        return template


# Original wording; the upstream prompt that produced any given reference
# corpus is unpublished, so treat scores against regenerated references as
# template-dependent.
DEFAULT_TEMPLATE = PromptTemplate(
    system_text=(
        "You explain, in a few plain sentences, how evidence supports or "
        "contradicts a claim. Describe the causal chain step by step."
    ),
    user_template=(
        "Claim: {claim}\n"
        "Evidence:\n{evidence}\n"
        "Verdict: {label}\n\n"
        "Write a short causal explanation of why the evidence leads to this verdict."
    ),
)


@dataclass
class GenerationRequest:
    instance_id: str
    rendered_prompt: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 512


@dataclass
class EndpointConfig:
    endpoint: str
    model_name: str
    temperature: float = 0.0
    max_tokens: int = 512
    cache_path: str | None = None
    requests_per_minute: float | None = None
    max_retries: int = 3
    backoff_base: float = 0.5
    timeout: float = 30.0
    concurrency: int = 2
    api_key_env: str = API_KEY_ENV


@dataclass
class GenerationOutcome:
    """Augmented corpus plus an accounting of what happened per instance."""

    corpus: Corpus
    generated: int = 0
    skipped: int = 0
    cache_hits: int = 0
    failures: dict[str, str] = field(default_factory=dict)


def render_prompt(template: PromptTemplate, instance: Instance) -> str:
    """Substitute claim, numbered evidence, and lowercase label.

    Substitution is a single regex pass so placeholder-like text inside
    the claim or evidence is never re-substituted.
    """
    template.validate()
    evidence = "\n".join(
        f"{i}. {entry}" for i, entry in enumerate(instance.evidence, start=1)
    )
    values = {
        "claim": instance.claim,
        "evidence": evidence,
        "label": instance.label.value,
    }
    return _PLACEHOLDER_RE.sub(lambda m: values[m.group(1)], template.user_template)


class _RateLimiter:
    """Serializes request starts to a fixed minimum interval."""

    def __init__(self, per_minute: float | None):
        self._interval = 60.0 / per_minute if per_minute else 0.0
        self._lock = threading.Lock()
        self._next_slot = 0.0

    def acquire(self) -> None:
        if self._interval == 0.0:
            return
        with self._lock:
            now = time.monotonic()
            wait = self._next_slot - now
            self._next_slot = max(now, self._next_slot) + self._interval
        if wait > 0:
            time.sleep(wait)


class _ResponseCache:
    def __init__(self, path: str | None):
        self._path = Path(path) if path else None
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            with open(self._path, encoding="utf-8") as fh:
                for line_no, line in enumerate(fh, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        self._entries[record["hash"]] = record["content"]
                    except (json.JSONDecodeError, KeyError, TypeError):
                        log.warning("%s: skipping unreadable cache line %d", path, line_no)

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, key: str, model: str, content: str) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = content
            if self._path:
                record = {"hash": key, "model": model, "content": content}
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def prompt_cache_key(rendered_prompt: str, model_name: str) -> str:
    return fnv1a_hex(rendered_prompt.encode("utf-8") + b"\x00" + model_name.encode("utf-8"))


class TeacherClient:
    def __init__(self, config: EndpointConfig, system_text: str = ""):
        self.config = config
        self.system_text = system_text
        self.cache = _ResponseCache(config.cache_path)
        self._limiter = _RateLimiter(config.requests_per_minute)
        self._session = requests.Session()
        self._headers = {}
        api_key = os.environ.get(config.api_key_env)
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    def complete(self, request: GenerationRequest) -> str:
        """One chat completion with caching, rate limiting, and retries."""
        key = prompt_cache_key(request.rendered_prompt, request.model_name)
        cached = self.cache.get(key)
        if cached is not None:
            return cached
        content = self._request(request)
        self.cache.put(key, request.model_name, content)
        return content

    def _request(self, request: GenerationRequest) -> str:
        url = self.config.endpoint.rstrip("/") + "/chat"
        body = {
            "model": request.model_name,
            "messages": [
                {"role": "system", "content": self.system_text},
                {"role": "user", "content": request.rendered_prompt},
            ],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        last_status = "no attempt"
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                time.sleep(self.config.backoff_base * 2 ** (attempt - 1))
            self._limiter.acquire()
            try:
                response = self._session.post(
                    url, json=body, headers=self._headers, timeout=self.config.timeout
                )
            except requests.RequestException as exc:
                last_status = f"{type(exc).__name__}"
                continue
            if response.status_code == 200:
                try:
                    return response.json()["content"]
                except (ValueError, KeyError) as exc:
                    raise EndpointError(f"malformed chat response: {exc}") from None
            if response.status_code in (401, 403):
                raise AuthFailure(f"endpoint rejected credentials ({response.status_code})")
            last_status = f"HTTP {response.status_code}"
            if response.status_code == 429 or response.status_code >= 500:
                continue
            raise EndpointError(f"non-retryable response {last_status}")
        if last_status == "HTTP 429":
            raise RateLimited(f"still rate limited after {self.config.max_retries} retries")
        raise EndpointError(
            f"request failed after {self.config.max_retries} retries ({last_status})"
        )


def generate_explanations(
    corpus: Corpus,
    template: PromptTemplate,
    config: EndpointConfig,
) -> GenerationOutcome:
    """Fill reference_explanation wherever it is missing.

    Existing references are never overwritten. Instances whose requests
    still fail after retries stay unfilled and are listed in the outcome's
    failure map; authentication failures abort the whole run.
    """
    template.validate()
    client = TeacherClient(config, system_text=template.system_text)

    results: dict[str, str] = {}
    failures: dict[str, str] = {}
    cache_hits = 0
    skipped = 0
    lock = threading.Lock()
    auth_broken = threading.Event()

    def fill(instance: Instance) -> None:
        if auth_broken.is_set():
            raise AuthFailure("aborted: endpoint already rejected credentials")
        request = GenerationRequest(
            instance_id=instance.id,
            rendered_prompt=render_prompt(template, instance),
            model_name=config.model_name,
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )
        key = prompt_cache_key(request.rendered_prompt, request.model_name)
        was_cached = client.cache.get(key) is not None
        try:
            content = client.complete(request)
        except AuthFailure:
            auth_broken.set()
            raise
        except TeacherError as exc:
            with lock:
                failures[instance.id] = str(exc)
            return
        with lock:
            results[instance.id] = content
            if was_cached:
                nonlocal cache_hits
                cache_hits += 1

    targets = []
    for instance in corpus:
        if instance.reference_explanation:
            skipped += 1
        else:
            targets.append(instance)

    if targets:
        with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
            futures = [pool.submit(fill, inst) for inst in targets]
            auth_failure: AuthFailure | None = None
            for future in futures:
                try:
                    future.result()
                except AuthFailure as exc:
                    auth_failure = exc
                    pool.shutdown(wait=False, cancel_futures=True)
                    break
        if auth_failure is not None:
            raise auth_failure

    new_instances = [
        inst.with_reference(results[inst.id]) if inst.id in results else inst
        for inst in corpus
    ]
    return GenerationOutcome(
        corpus=Corpus(new_instances, source_path=corpus.source_path),
        generated=len(results),
        skipped=skipped,
        cache_hits=cache_hits,
        failures=failures,
    )
