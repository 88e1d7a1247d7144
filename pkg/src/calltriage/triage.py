"""Severity assessment.

A transcript (plus its reconstruction) is scored on three rule-derived
levels: keyword hits, caller emotion, and retrieved-context cues, each in
{1, 2, 4}. Their weighted sum is thresholded into Mild / Moderate / Severe.
A softmax classifier and a misclassification penalty support probabilistic
evaluation of the same decision.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Protocol, Sequence

import numpy as np

from .textproc import contains_token_seq, tokenize

log = logging.getLogger(__name__)

LEVEL_SEVERE = 4
LEVEL_MODERATE = 2
LEVEL_MILD = 1


class SeverityLevel(str, Enum):
    MILD = "Mild"
    MODERATE = "Moderate"
    SEVERE = "Severe"

    @property
    def numeric(self) -> int:
        return {self.MILD: LEVEL_MILD, self.MODERATE: LEVEL_MODERATE, self.SEVERE: LEVEL_SEVERE}[self]


class DimensionMismatch(Exception):
    pass


class DegenerateDistribution(Exception):
    def __init__(self, case_index: int):
        super().__init__(f"case {case_index}: predicted probability of true class is 0")
        self.case_index = case_index


class ClassifierUnavailable(Exception):
    pass


@dataclass(frozen=True)
class KeywordRules:
    severe: frozenset[str]
    mild: frozenset[str]

    def __post_init__(self):
        for name in ("severe", "mild"):
            terms = getattr(self, name)
            object.__setattr__(self, name, frozenset(terms))
            for term in terms:
                if not term or term != term.lower():
                    raise ValueError(f"{name} term {term!r} must be nonempty lowercase")
        if self.severe & self.mild:
            raise ValueError(f"severe and mild overlap: {sorted(self.severe & self.mild)}")


DEFAULT_RULES = KeywordRules(
    severe=frozenset(
        {"gun", "stabbing", "shooting", "fire", "accident", "emergency", "death", "killed"}
    ),
    mild=frozenset({"noise", "neighbor", "pet", "minor"}),
)


@dataclass(frozen=True)
class SeverityFeatures:
    keyword: int
    emotion: int
    context: int

    def __post_init__(self):
        for name in ("keyword", "emotion", "context"):
            if getattr(self, name) not in (LEVEL_MILD, LEVEL_MODERATE, LEVEL_SEVERE):
                raise ValueError(f"{name} level must be one of {{1, 2, 4}}")


@dataclass(frozen=True)
class SeverityWeights:
    w_keyword: float = 0.5
    w_emotion: float = 0.3
    w_context: float = 0.2
    theta_high: float = 3.0
    theta_mid: float = 1.5

    def __post_init__(self):
        ws = (self.w_keyword, self.w_emotion, self.w_context)
        if any(w < 0 for w in ws):
            raise ValueError("weights must be nonnegative")
        if not math.isclose(sum(ws), 1.0, abs_tol=1e-9):
            raise ValueError(f"weights must sum to 1, got {sum(ws)}")
        if not self.theta_mid < self.theta_high:
            raise ValueError("theta_mid must be below theta_high")


@dataclass
class SeverityAssessment:
    score: float
    level: SeverityLevel
    features: SeverityFeatures
    rationale: dict = field(default_factory=dict)


def keyword_hits(transcript: str, rules: KeywordRules) -> tuple[list[str], list[str]]:
    """Whole-token keyword matches, severe and mild, in sorted order."""
    tokens = tokenize(transcript)
    severe = [t for t in sorted(rules.severe) if contains_token_seq(tokens, tokenize(t))]
    mild = [t for t in sorted(rules.mild) if contains_token_seq(tokens, tokenize(t))]
    return severe, mild


def keyword_level(transcript: str, rules: KeywordRules = DEFAULT_RULES) -> int:
    """Scan the lowercased transcript: any severe term wins (4), else any
    mild term (1), else the moderate default (2).

    Matching is exact whole-token, so synonyms the rule lists do not cover
    fall through to moderate.
    """
    severe, mild = keyword_hits(transcript, rules)
    if severe:
        return LEVEL_SEVERE
    if mild:
        return LEVEL_MILD
    return LEVEL_MODERATE


class EmotionBackend(Protocol):
    def classify(self, text: str) -> str: ...


DEFAULT_EMOTION_LEXICONS: dict[str, frozenset[str]] = {
    "sadness": frozenset({"sad", "crying", "cry", "tears", "grief", "lost", "miss"}),
    "anger": frozenset({"angry", "mad", "furious", "rage", "hate", "annoyed"}),
    "joy": frozenset({"happy", "joy", "glad", "great", "wonderful", "nice", "love"}),
    "fear": frozenset({"afraid", "scared", "terrified", "fear", "panic", "panicking"}),
    "surprise": frozenset({"surprised", "shocked", "sudden"}),
}


class LexiconEmotionClassifier:
    """Deterministic emotion mock: argmax of per-label word counts, ties
    (including zero hits) fall back to neutral."""

    def __init__(self, lexicons: dict[str, frozenset[str]] | None = None):
        self.lexicons = lexicons if lexicons is not None else DEFAULT_EMOTION_LEXICONS

    def classify(self, text: str) -> str:
        tokens = tokenize(text)
        counts = {
            label: sum(1 for t in tokens if t in terms) for label, terms in self.lexicons.items()
        }
        if not counts:
            return "neutral"
        best = max(counts.values())
        winners = [label for label, c in counts.items() if c == best]
        if best == 0 or len(winners) != 1:
            return "neutral"
        return winners[0]


class TransformersEmotionAdapter:
    """Optional adapter around a pre-trained text-classification pipeline.

    Imported lazily; never required by the test suite.
    """

    def __init__(self, model_name: str = "bhadresh-savani/distilbert-base-uncased-emotion"):
        try:
            from transformers import pipeline
        except ImportError as exc:  # pragma: no cover - optional dependency
            raise ClassifierUnavailable("transformers not installed") from exc
        self._pipe = pipeline("text-classification", model=model_name)

    def classify(self, text: str) -> str:  # pragma: no cover - needs model download
        try:
            return self._pipe(text)[0]["label"].lower()
        except Exception as exc:
            raise ClassifierUnavailable(str(exc)) from exc


def _level_for_emotion(label: str) -> int:
    if label in ("sadness", "anger"):
        return LEVEL_SEVERE
    if label == "joy":
        return LEVEL_MILD
    return LEVEL_MODERATE


def emotion_level(text: str, classifier: EmotionBackend) -> int:
    """sadness or anger signal distress (4); joy reads as non-emergency (1);
    everything else, including classifier failure, is moderate (2)."""
    try:
        label = classifier.classify(text)
    except Exception as exc:
        log.warning("emotion classifier unavailable, defaulting to moderate: %s", exc)
        return LEVEL_MODERATE
    return _level_for_emotion(label)


def context_level(retrieved: Sequence[str], rules: KeywordRules = DEFAULT_RULES) -> int:
    """Keyword scan over the retrieved historical texts; empty retrieval is
    neutral (2)."""
    if not retrieved:
        return LEVEL_MODERATE
    return keyword_level(" ".join(retrieved), rules)


def level_for_score(score: float, weights: SeverityWeights) -> SeverityLevel:
    if score >= weights.theta_high:
        return SeverityLevel.SEVERE
    if score >= weights.theta_mid:
        return SeverityLevel.MODERATE
    return SeverityLevel.MILD


def severity_score(
    features: SeverityFeatures,
    weights: SeverityWeights = SeverityWeights(),
    rationale: dict | None = None,
) -> SeverityAssessment:
    """Weighted sum of the three feature levels, thresholded into a level."""
    s = (
        weights.w_keyword * features.keyword
        + weights.w_emotion * features.emotion
        + weights.w_context * features.context
    )
    return SeverityAssessment(
        score=s,
        level=level_for_score(s, weights),
        features=features,
        rationale=rationale or {},
    )


def severity_softmax(x: Sequence[float], thetas: Sequence[Sequence[float]]) -> np.ndarray:
    """P(level s | x) = exp(theta_s . x) / sum_j exp(theta_j . x), max-stabilized."""
    x = np.asarray(x, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    if thetas.ndim != 2 or thetas.shape[0] < 2:
        raise DimensionMismatch("need one weight vector per level, at least two levels")
    if thetas.shape[1] != x.shape[0]:
        raise DimensionMismatch(f"feature dim {x.shape[0]} vs theta dim {thetas.shape[1]}")
    logits = thetas @ x
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def misclassification_penalty(
    cases: Sequence[tuple[int, Sequence[float]]],
    delta: Sequence[float],
) -> float:
    """Sum of delta_i * cross-entropy(true class i against its predicted
    distribution). Zero exactly when every prediction is one-hot correct."""
    if len(cases) != len(delta):
        raise ValueError("need one severity coefficient per case")
    total = 0.0
    for i, ((true_idx, probs), d) in enumerate(zip(cases, delta)):
        if d < 0:
            raise ValueError(f"case {i}: severity coefficient must be nonnegative")
        p = np.asarray(probs, dtype=float)
        if p.min() < 0 or not math.isclose(p.sum(), 1.0, abs_tol=1e-6):
            raise ValueError(f"case {i}: predictions must be a probability distribution")
        if not 0 <= true_idx < len(p):
            raise ValueError(f"case {i}: true level index {true_idx} out of range")
        if p[true_idx] == 0.0:
            raise DegenerateDistribution(i)
        total += d * -math.log(p[true_idx])
    return total


def assess(
    transcript: str,
    reconstruction,
    rules: KeywordRules = DEFAULT_RULES,
    weights: SeverityWeights = SeverityWeights(),
    emotion_backend: EmotionBackend | None = None,
) -> SeverityAssessment:
    """Full assessment of one final transcript plus its reconstruction.

    Keywords are scanned over transcript and predicted text together so
    that words the retrieval step recovered can still raise the level.
    """
    emotion_backend = emotion_backend or LexiconEmotionClassifier()
    predicted = reconstruction.predicted_text if reconstruction else ""
    retrieved = list(reconstruction.retrieved_context) if reconstruction else []
    scan_text = f"{transcript} {predicted}".strip()
    severe_hits, mild_hits = keyword_hits(scan_text, rules)
    emotion_label = _safe_label(emotion_backend, predicted or transcript)
    features = SeverityFeatures(
        keyword=keyword_level(scan_text, rules),
        emotion=_level_for_emotion(emotion_label),
        context=context_level(retrieved, rules),
    )
    rationale = {
        "matched_severe": severe_hits,
        "matched_mild": mild_hits,
        "emotion_label": emotion_label,
    }
    return severity_score(features, weights, rationale)


def _safe_label(backend: EmotionBackend, text: str) -> str:
    try:
        return backend.classify(text)
    except Exception:
        return "unavailable"
