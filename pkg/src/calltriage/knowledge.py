"""Retrieval core for transcript reconstruction.

Historical emergency conversations are embedded with TF-IDF and stored in an
exhaustive squared-L2 index. A degraded final transcript retrieves its
nearest past cases; the retrieved context plus the transcript feed a
pluggable generator which predicts the caller's full message. Intent
prediction scores a configured label set against the same evidence.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import httpx
import numpy as np

from .textproc import tokenize

RETRIEVE_K = 5
GEN_MAX_TOKENS = 150
GEN_TEMPERATURE = 0.7

PROMPT_TEMPLATE = (
    "Context:\n{context}\n\nGiven the partial transcript: '{query}', "
    "predict what the speaker is most likely saying."
)
_CONTEXT_END = "\n\nGiven the partial transcript: '"


class EmptyCorpus(Exception):
    pass


class NotFitted(Exception):
    pass


class DimensionMismatch(Exception):
    pass


class GeneratorUnavailable(Exception):
    pass


class EmptyTranscript(Exception):
    pass


# ---------------------------------------------------------------------------
# Corpus records and preprocessing.


@dataclass(frozen=True)
class ConversationRecord:
    """One historical call: respondent question plus the victim's first two turns."""

    respondent_msg: str
    victim_msg_1: str
    victim_msg_2: str

    @property
    def combined(self) -> str:
        return " ".join((self.respondent_msg, self.victim_msg_1, self.victim_msg_2))


def preprocess_dataset(conversations: Iterable[Sequence[tuple[str, str]]]) -> list[ConversationRecord]:
    """Keep only conversations with a respondent turn followed by two
    consecutive victim turns; drop the rest.

    Each conversation is an ordered list of (speaker, text) with speaker in
    {"respondent", "victim"}. Output order preserves input order.
    """
    records = []
    for turns in conversations:
        record = _extract_record(list(turns))
        if record is not None:
            records.append(record)
    return records


def _extract_record(turns: list[tuple[str, str]]) -> ConversationRecord | None:
    q_idx = next(
        (i for i, (speaker, text) in enumerate(turns) if speaker == "respondent" and text.strip()),
        None,
    )
    if q_idx is None:
        return None
    for i in range(q_idx + 1, len(turns) - 1):
        (s1, t1), (s2, t2) = turns[i], turns[i + 1]
        if s1 == "victim" and s2 == "victim" and t1.strip() and t2.strip():
            return ConversationRecord(turns[q_idx][1], t1, t2)
    return None


def load_raw_csv(path: str | Path) -> list[list[tuple[str, str]]]:
    """Read a turn-per-row dump: columns conversation_id, speaker, text."""
    conversations: dict[str, list[tuple[str, str]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"conversation_id", "speaker", "text"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise ValueError(f"raw CSV must have columns {sorted(required)}")
        for row in reader:
            conversations.setdefault(row["conversation_id"], []).append(
                (row["speaker"].strip().lower(), row["text"])
            )
    return list(conversations.values())


CORPUS_COLUMNS = ("Q", "A1", "A2", "combined_text")


def save_corpus_csv(records: Iterable[ConversationRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CORPUS_COLUMNS)
        for r in records:
            writer.writerow([r.respondent_msg, r.victim_msg_1, r.victim_msg_2, r.combined])


def load_corpus_csv(path: str | Path) -> list[ConversationRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not set(CORPUS_COLUMNS[:3]).issubset(reader.fieldnames):
            raise ValueError(f"corpus CSV must have columns {CORPUS_COLUMNS[:3]}")
        for row in reader:
            records.append(ConversationRecord(row["Q"], row["A1"], row["A2"]))
    return records


# ---------------------------------------------------------------------------
# TF-IDF embedding and the flat index.


@dataclass
class TfidfModel:
    """Vocabulary plus smoothed idf weights: idf = ln((1+N)/(1+df)) + 1."""

    vocabulary: dict[str, int]
    idf: np.ndarray
    doc_count: int

    @property
    def dim(self) -> int:
        return len(self.vocabulary)

    def embed(self, text: str) -> np.ndarray:
        """tf * idf, L2-normalized; all-unknown text embeds to the zero vector."""
        vec = np.zeros(self.dim)
        for token in tokenize(text):
            col = self.vocabulary.get(token)
            if col is not None:
                vec[col] += 1.0
        vec *= self.idf
        norm = np.linalg.norm(vec)
        if norm > 0:
            vec /= norm
        return vec


def fit_tfidf(corpus: Sequence[str]) -> tuple[TfidfModel, np.ndarray]:
    if not corpus:
        raise EmptyCorpus("cannot fit on an empty corpus")
    doc_tokens = [tokenize(doc) for doc in corpus]
    vocabulary = {token: i for i, token in enumerate(sorted({t for toks in doc_tokens for t in toks}))}
    n = len(corpus)
    df = np.zeros(len(vocabulary))
    for toks in doc_tokens:
        for token in set(toks):
            df[vocabulary[token]] += 1
    idf = np.log((1 + n) / (1 + df)) + 1.0
    model = TfidfModel(vocabulary=vocabulary, idf=idf, doc_count=n)
    matrix = np.vstack([model.embed(doc) for doc in corpus]) if vocabulary else np.zeros((n, 0))
    return model, matrix


@dataclass
class FlatIndex:
    """Exhaustive nearest-neighbor search by squared L2 distance."""

    embeddings: np.ndarray

    def search(self, query: np.ndarray, k: int) -> list[tuple[int, float]]:
        """k nearest rows, ascending distance; ties resolve to corpus order."""
        query = np.asarray(query, dtype=float)
        if query.shape != (self.embeddings.shape[1],):
            raise DimensionMismatch(
                f"query dim {query.shape} vs index dim ({self.embeddings.shape[1]},)"
            )
        d2 = np.sum((self.embeddings - query) ** 2, axis=1)
        order = np.argsort(d2, kind="stable")[: max(0, k)]
        return [(int(i), float(d2[i])) for i in order]


def build_index(embeddings: np.ndarray) -> FlatIndex:
    embeddings = np.asarray(embeddings, dtype=float)
    if embeddings.ndim != 2 or embeddings.shape[0] == 0:
        raise EmptyCorpus("index needs a nonempty 2-D embedding matrix")
    return FlatIndex(embeddings)


# ---------------------------------------------------------------------------
# Retrieval + generation.


class KnowledgeBase:
    """Immutable after build; shared read-only across sessions."""

    def __init__(self, records: Sequence[ConversationRecord]):
        if not records:
            raise EmptyCorpus("knowledge base needs at least one record")
        self.records = list(records)
        self.texts = [r.combined for r in self.records]
        self.model, matrix = fit_tfidf(self.texts)
        self.index = build_index(matrix)

    @classmethod
    def from_corpus_csv(cls, path: str | Path) -> "KnowledgeBase":
        return cls(load_corpus_csv(path))

    def save(self, prefix: str | Path) -> tuple[Path, Path]:
        """Persist embeddings (npz) and model metadata (json) side by side."""
        prefix = Path(prefix)
        npz_path = prefix.with_suffix(".index.npz")
        meta_path = prefix.with_suffix(".model.json")
        np.savez_compressed(npz_path, embeddings=self.index.embeddings, idf=self.model.idf)
        meta_path.write_text(
            json.dumps(
                {
                    "vocabulary": self.model.vocabulary,
                    "doc_count": self.model.doc_count,
                    "records": [
                        [r.respondent_msg, r.victim_msg_1, r.victim_msg_2] for r in self.records
                    ],
                },
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        return npz_path, meta_path

    def retrieve(self, query: str, k: int = RETRIEVE_K) -> list[str]:
        """The k nearest combined texts, nearest first.

        Out-of-vocabulary queries embed to the zero vector and fall back to
        a deterministic corpus-order ranking; the pipeline never stalls on
        odd input.
        """
        if self.model is None:
            raise NotFitted("retrieve before fit")
        query_vec = self.model.embed(query)
        if not query_vec.any():
            return self.texts[: min(k, len(self.texts))]
        hits = self.index.search(query_vec, min(k, len(self.texts)))
        return [self.texts[i] for i, _ in hits]


def retrieve(kb: KnowledgeBase | None, query: str, k: int = RETRIEVE_K) -> list[str]:
    if kb is None:
        raise NotFitted("no knowledge base loaded")
    return kb.retrieve(query, k)


def assemble_prompt(query: str, retrieved: Sequence[str]) -> str:
    return PROMPT_TEMPLATE.format(context="\n".join(retrieved), query=query)


class GeneratorBackend(Protocol):
    def complete(self, prompt: str, max_tokens: int, temperature: float) -> str: ...


class EchoTopRetrievedGenerator:
    """Deterministic mock: answer with the top-1 retrieved context line.

    With no context it echoes the query itself, which downstream treats as
    a no-op reconstruction. Temperature is ignored on purpose.
    """

    def complete(self, prompt: str, max_tokens: int, temperature: float) -> str:
        head, sep, tail = prompt.partition(_CONTEXT_END)
        context = head.removeprefix("Context:\n")
        first = context.split("\n", 1)[0].strip()
        if first:
            return first
        if sep:
            return tail.split("'", 1)[0]
        return ""


class HttpChatGenerator:
    """Chat-completion-style HTTP backend (live mode)."""

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str,
        timeout_s: float = 10.0,
        client: httpx.Client | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout_s = timeout_s
        self.client = client or httpx.Client()

    def complete(self, prompt: str, max_tokens: int, temperature: float) -> str:
        try:
            resp = self.client.post(
                f"{self.base_url}/chat/completions",
                headers={"Authorization": f"Bearer {self.api_key}"},
                json={
                    "model": self.model,
                    "messages": [{"role": "user", "content": prompt}],
                    "max_tokens": max_tokens,
                    "temperature": temperature,
                },
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"].strip()
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise GeneratorUnavailable(str(exc)) from exc


@dataclass
class ReconstructionResult:
    predicted_text: str
    retrieved_context: list[str] = field(default_factory=list)


def reconstruct(
    transcript: str,
    kb: KnowledgeBase,
    backend: GeneratorBackend,
    k: int = RETRIEVE_K,
) -> ReconstructionResult:
    """Retrieve context for the degraded transcript and generate the prediction."""
    if not transcript.strip():
        raise EmptyTranscript("cannot reconstruct an empty transcript")
    retrieved = kb.retrieve(transcript, k)
    prompt = assemble_prompt(transcript, retrieved)
    try:
        predicted = backend.complete(prompt, max_tokens=GEN_MAX_TOKENS, temperature=GEN_TEMPERATURE)
    except GeneratorUnavailable:
        raise
    except (TimeoutError, ConnectionError, OSError) as exc:
        raise GeneratorUnavailable(str(exc)) from exc
    return ReconstructionResult(predicted_text=predicted, retrieved_context=retrieved)


# ---------------------------------------------------------------------------
# Intent prediction.


@dataclass
class IntentPrediction:
    intent_label: str
    score_per_label: dict[str, float]

    @property
    def chosen(self) -> str:
        return self.intent_label


def _softmax(raw: np.ndarray) -> np.ndarray:
    z = raw - raw.max()
    e = np.exp(z)
    return e / e.sum()


def predict_intent(
    transcript: str,
    retrieved: Sequence[str],
    labels: Sequence[str],
    lexicons: dict[str, Sequence[str]],
) -> IntentPrediction:
    """Score each configured intent by lexicon hits over transcript plus
    retrieved context, softmax-normalized; ties break by label order."""
    if not labels:
        raise ValueError("intent label set is empty")
    tokens = tokenize(transcript)
    for text in retrieved:
        tokens.extend(tokenize(text))
    counts = Counter(tokens)
    raw = np.array(
        [
            float(sum(counts.get(term, 0) for term in lexicons.get(label, ())))
            for label in labels
        ]
    )
    scores = _softmax(raw)
    chosen = labels[int(np.argmax(scores))]
    return IntentPrediction(intent_label=chosen, score_per_label=dict(zip(labels, scores.tolist())))
