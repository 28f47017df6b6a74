"""Text normalization and the translation subsystem.

Translation goes through a provider interface (HTTP client, file-backed
replay, identity test double) behind an append-only persistent cache, so a
warm cache makes every translation operation a pure function.
"""

from __future__ import annotations

import hashlib
import re
import threading
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

from .corpus import Dataset, Example
from .errors import ConfigError, TransportError, ValidationError

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


@dataclass(frozen=True)
class PreprocessConfig:
    """Which normalization steps to apply before feature extraction."""

    lowercase: bool = False
    tokenize: bool = False
    lemmatize: bool = False
    remove_stopwords: bool = False
    stopword_lists: Mapping[str, frozenset[str]] = field(default_factory=dict)
    lemma_tables: Mapping[str, Mapping[str, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if (self.lemmatize or self.remove_stopwords) and not self.tokenize:
            raise ConfigError("lemmatize/remove_stopwords require tokenize=True")


IDENTITY_PREPROCESS = PreprocessConfig()


def load_stopword_list(path: str | Path) -> frozenset[str]:
    """One stopword per line; blank lines and ``#`` comments ignored."""
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def load_lemma_table(path: str | Path) -> dict[str, str]:
    """Tab-separated ``token<TAB>lemma`` lines."""
    table: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        token, _, lemma = line.partition("\t")
        if not lemma:
            raise ConfigError(f"{path}: bad lemma line {line!r}")
        table[token] = lemma
    return table


def preprocess_text(text: str, language: str, cfg: PreprocessConfig) -> str:
    """Apply the configured normalization steps, deterministically.

    Idempotent for configurations without lemmatization.
    """
    if cfg.remove_stopwords and language not in cfg.stopword_lists:
        raise ConfigError(f"no stopword list configured for language {language!r}")
    out = text
    if cfg.lowercase:
        out = out.lower()
    if not cfg.tokenize:
        return out
    tokens = _TOKEN_RE.findall(out)
    if cfg.lemmatize:
        table = cfg.lemma_tables.get(language, {})
        tokens = [table.get(t, t) for t in tokens]
    if cfg.remove_stopwords:
        stop = cfg.stopword_lists[language]
        tokens = [t for t in tokens if t not in stop]
    return " ".join(tokens)


def preprocess_dataset(dataset: Dataset, cfg: PreprocessConfig) -> Dataset:
    """Apply ``preprocess_text`` to every example's text.

    A text that normalizes to nothing (all stopwords) keeps its original
    form so the non-empty-text invariant holds.
    """
    if cfg == IDENTITY_PREPROCESS:
        return dataset
    out: list[Example] = []
    for ex in dataset:
        processed = preprocess_text(ex.text, ex.language, cfg)
        out.append(replace(ex, text=processed) if processed.strip() else ex)
    return replace(dataset, examples=tuple(out))


class TranslationProvider(ABC):
    """Stateless text translation between (source, target) language pairs.

    ``capabilities`` of None means unrestricted. Translating an empty
    string is always the empty string and never reaches the implementation.
    """

    provider_id: str = "abstract"

    def capabilities(self) -> set[tuple[str, str]] | None:
        return None

    def supports(self, source: str, target: str) -> bool:
        caps = self.capabilities()
        return caps is None or (source, target) in caps

    def translate(self, text: str, source: str, target: str) -> str:
        if not self.supports(source, target):
            raise ConfigError(
                f"provider {self.provider_id!r} does not support {source}->{target}"
            )
        if text == "":
            return ""
        return self._translate(text, source, target)

    @abstractmethod
    def _translate(self, text: str, source: str, target: str) -> str: ...


class IdentityProvider(TranslationProvider):
    """Test double: returns the source text unchanged."""

    provider_id = "identity"

    def _translate(self, text: str, source: str, target: str) -> str:
        return text


class ReplayProvider(TranslationProvider):
    """Replays translations from a prepared TSV of
    ``source_lang  target_lang  source_text  translated_text`` rows."""

    provider_id = "replay"

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._table: dict[tuple[str, str, str], str] = {}
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for lineno, line in enumerate(lines, start=1):
            if not line or line.startswith("source_lang\t"):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ConfigError(f"{self.path}:{lineno}: expected 4 columns")
            src, tgt, text, translated = fields
            self._table[(src, tgt, text)] = translated

    def capabilities(self) -> set[tuple[str, str]]:
        return {(s, t) for s, t, _ in self._table}

    def _translate(self, text: str, source: str, target: str) -> str:
        try:
            return self._table[(source, target, text)]
        except KeyError:
            raise TransportError(
                f"no replay entry for {source}->{target} text {text[:60]!r}",
                retriable=False,
            ) from None


class HttpProvider(TranslationProvider):
    """POSTs ``q``/``source``/``target`` form fields to a translation
    endpoint and expects the translated UTF-8 string as the response body."""

    def __init__(self, endpoint: str, token: str | None = None, session=None, timeout: float = 10.0):
        if not endpoint:
            raise ConfigError("HTTP provider requires an endpoint URL")
        self.endpoint = endpoint
        self.token = token
        self.timeout = timeout
        if session is None:
            import requests

            session = requests.Session()
        self._session = session
        self.provider_id = f"http:{endpoint}"

    def _translate(self, text: str, source: str, target: str) -> str:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        try:
            resp = self._session.post(
                self.endpoint,
                data={"q": text, "source": source, "target": target},
                headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except TransportError:
            raise
        except Exception as exc:
            raise TransportError(f"translation endpoint failure: {exc}") from exc
        resp.encoding = "utf-8"
        return resp.text


class TranslationCache:
    """Append-only persistent cache keyed by provider, language pair, and a
    content hash of the source text (duplicated texts translate once).

    Many concurrent readers, one serialized writer; entries survive process
    restart when backed by a file.
    """

    HEADER = "provider_id\tsource_lang\ttarget_lang\ttext_sha256\ttranslated_text"

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[tuple[str, str, str, str], str] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line or line == self.HEADER:
                    continue
                provider_id, src, tgt, digest, translated = line.split("\t")
                self._entries[(provider_id, src, tgt, digest)] = _unescape(translated)

    @staticmethod
    def text_key(text: str) -> str:
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, provider_id: str, source: str, target: str, text: str) -> str | None:
        return self._entries.get((provider_id, source, target, self.text_key(text)))

    def put(self, provider_id: str, source: str, target: str, text: str, translated: str) -> None:
        key = (provider_id, source, target, self.text_key(text))
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = translated
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                new_file = not self.path.exists()
                with open(self.path, "a", encoding="utf-8") as fh:
                    if new_file:
                        fh.write(self.HEADER + "\n")
                    fh.write("\t".join([*key, _escape(translated)]) + "\n")


def _escape(text: str) -> str:
    return (
        text.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n").replace("\r", "\\r")
    )


def _unescape(text: str) -> str:
    out: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\" and i + 1 < len(text):
            nxt = text[i + 1]
            mapped = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r"}.get(nxt)
            if mapped is not None:
                out.append(mapped)
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


@dataclass(frozen=True)
class TranslatedExample:
    """A source example rendered in the target language, labels untouched."""

    original_id: str
    language: str
    text: str
    task1: str | None = None
    task2: str | None = None


def translate_batch(
    examples: Sequence[Example],
    target: str,
    provider: TranslationProvider,
    cache: TranslationCache,
    *,
    parallelism: int = 1,
    retries: int = 3,
) -> list[TranslatedExample]:
    """Translate every example into ``target``, cache-first.

    Results come back in input order; each cache miss costs exactly one
    successful provider call. Item failures surface as TransportError
    carrying the example id after per-item retries.
    """
    for ex in examples:
        if ex.language == target:
            raise ValidationError(f"id={ex.id}: already in target language {target!r}")
        if not provider.supports(ex.language, target):
            raise ConfigError(
                f"provider {provider.provider_id!r} does not support {ex.language}->{target}"
            )

    def one(ex: Example) -> TranslatedExample:
        translated = cache.get(provider.provider_id, ex.language, target, ex.text)
        if translated is None:
            last: TransportError | None = None
            for _ in range(max(1, retries)):
                try:
                    translated = provider.translate(ex.text, ex.language, target)
                    break
                except TransportError as exc:
                    last = exc
                    if not exc.retriable:
                        break
            if translated is None:
                assert last is not None
                raise TransportError(str(last), example_id=ex.id, retriable=last.retriable)
            cache.put(provider.provider_id, ex.language, target, ex.text, translated)
        return TranslatedExample(
            original_id=ex.id, language=target, text=translated, task1=ex.task1, task2=ex.task2
        )

    if parallelism > 1 and len(examples) > 1:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            return list(pool.map(one, examples))
    return [one(ex) for ex in examples]


def augment_with_translation(
    train: Dataset,
    target: str,
    provider: TranslationProvider,
    cache: TranslationCache,
    *,
    parallelism: int = 1,
) -> Dataset:
    """Target-language originals plus translations of everything else.

    For a balanced bilingual corpus the output size equals the input size,
    doubling the per-language training set relative to the untranslated
    monolingual baseline. Translated rows get ``<original-id>@<target>`` ids
    so they stay traceable.
    """
    if len(train) == 0:
        raise ValueError("cannot augment an empty dataset")
    originals = [ex for ex in train if ex.language == target]
    others = [ex for ex in train if ex.language != target]
    translated = translate_batch(others, target, provider, cache, parallelism=parallelism)
    out = list(originals)
    for src, tr in zip(others, translated):
        out.append(
            Example(
                id=f"{tr.original_id}@{target}",
                source=src.source,
                language=target,
                text=tr.text,
                task1=tr.task1,
                task2=tr.task2,
            )
        )
    return Dataset(
        examples=tuple(out),
        role=train.role,
        provenance=f"augmented({train.provenance}->{target})",
    )


def translate_test_set(
    test: Dataset,
    target: str,
    provider: TranslationProvider,
    cache: TranslationCache,
    *,
    parallelism: int = 1,
) -> Dataset:
    """Render every test example in the target language, exactly once.

    Ids and order are preserved: target-language originals pass through,
    the rest are replaced by their translations.
    """
    others = [ex for ex in test if ex.language != target]
    translated = translate_batch(others, target, provider, cache, parallelism=parallelism)
    by_id = {tr.original_id: tr for tr in translated}
    out: list[Example] = []
    for ex in test:
        if ex.language == target:
            out.append(ex)
        else:
            tr = by_id[ex.id]
            out.append(replace(ex, language=target, text=tr.text))
    return Dataset(
        examples=tuple(out),
        role=test.role,
        provenance=f"translated({test.provenance}->{target})",
    )
