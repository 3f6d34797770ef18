"""Topic modeling: vocabulary building, authorless downsampling, and LDA
trained by collapsed Gibbs sampling with Dirichlet hyperparameter
optimization (asymmetric document-topic prior, symmetric topic-word prior).
"""

from __future__ import annotations

import json
import logging
import random
import string
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import digamma, gammaln

from .corpus import Segment
from .stats import pearson

log = logging.getLogger(__name__)

STATE_FORMAT = "godspell-topic-state"
STATE_VERSION = 1

# Default priors follow common Gibbs-LDA toolkit conventions: alpha sums
# to 5.0 across topics, beta starts at 0.01.
DEFAULT_ALPHA_SUM = 5.0
DEFAULT_BETA = 0.01

_EDGE_CHARS = string.punctuation + "“”‘’—–…«»"


class VocabularyError(ValueError):
    """Raised when filtering leaves no usable vocabulary."""


@dataclass
class Vocabulary:
    words: list[str]                 # id -> word, ids dense in [0, V)
    ids: dict[str, int]
    frequencies: list[int]           # id -> corpus frequency after filtering
    stopwords: frozenset[str]

    @property
    def size(self) -> int:
        return len(self.words)


def normalize_token(word: str) -> str:
    """Lowercase and strip punctuation from word edges."""
    return word.lower().strip(_EDGE_CHARS)


def build_vocabulary(
    segments: list[Segment],
    stopwords: set[str],
    min_count: int = 5,
) -> tuple[Vocabulary, list[list[int]]]:
    """Tokenize segments into id sequences over a filtered vocabulary.

    Tokens are lowercased and edge-stripped; stopwords and words rarer
    than min_count are removed. Document order follows segment order.
    """
    stop = frozenset(w.lower() for w in stopwords)
    normalized: list[list[str]] = []
    counts: dict[str, int] = {}
    for seg in segments:
        tokens = []
        for word in seg.words:
            token = normalize_token(word)
            if token and token not in stop:
                tokens.append(token)
                counts[token] = counts.get(token, 0) + 1
        normalized.append(tokens)

    kept = sorted(w for w, c in counts.items() if c >= min_count)
    if not kept:
        raise VocabularyError(
            f"no vocabulary left after stopword and min_count={min_count} filtering"
        )
    ids = {w: i for i, w in enumerate(kept)}
    vocab = Vocabulary(
        words=kept,
        ids=ids,
        frequencies=[counts[w] for w in kept],
        stopwords=stop,
    )
    docs = [[ids[t] for t in tokens if t in ids] for tokens in normalized]
    return vocab, docs


def authorless_downsample(
    docs: list[list[int]],
    doc_novels: list[str],
    rng_seed: int = 0,
) -> list[list[int]]:
    """Stochastically drop tokens of words overrepresented within one novel.

    A token of word w in novel b survives with probability
    min(1, P(w) / P(w|b)), comparing the corpus unigram rate against the
    within-novel rate. Tokens are only removed, never added or reordered.
    """
    if len(docs) != len(doc_novels):
        raise ValueError("docs and doc_novels must align")
    rng = random.Random(rng_seed)

    corpus_counts: dict[int, int] = {}
    novel_counts: dict[str, dict[int, int]] = {}
    novel_totals: dict[str, int] = {}
    for doc, novel_id in zip(docs, doc_novels):
        per_novel = novel_counts.setdefault(novel_id, {})
        for w in doc:
            corpus_counts[w] = corpus_counts.get(w, 0) + 1
            per_novel[w] = per_novel.get(w, 0) + 1
        novel_totals[novel_id] = novel_totals.get(novel_id, 0) + len(doc)
    corpus_total = sum(novel_totals.values())
    if corpus_total == 0:
        return [list(doc) for doc in docs]

    reduced = []
    for doc, novel_id in zip(docs, doc_novels):
        n_b = novel_totals[novel_id]
        kept = []
        for w in doc:
            p_corpus = corpus_counts[w] / corpus_total
            p_novel = novel_counts[novel_id][w] / n_b
            retain = min(1.0, p_corpus / p_novel)
            if rng.random() < retain:
                kept.append(w)
        reduced.append(kept)
    return reduced


@dataclass
class TopicState:
    """Mutable collapsed-Gibbs sampler state."""

    k: int
    alpha: np.ndarray        # (K,) asymmetric document-topic prior
    beta: float              # symmetric topic-word prior
    z: list[list[int]]       # per-token topic assignments
    n_dk: np.ndarray         # (D, K) document-topic counts
    n_kw: np.ndarray         # (K, V) topic-word counts
    n_k: np.ndarray          # (K,) topic totals
    vocabulary_size: int
    rng_seed: int
    rng: random.Random = field(repr=False, default_factory=random.Random)

    def validate(self, docs: list[list[int]]) -> None:
        """Check the count identities against the assignments; fatal if
        the state is corrupted."""
        if (self.n_dk < 0).any() or (self.n_kw < 0).any() or (self.n_k < 0).any():
            raise RuntimeError("corrupted state: negative count")
        if (self.alpha <= 0).any() or self.beta <= 0:
            raise RuntimeError("corrupted state: non-positive prior")
        doc_lens = np.array([len(d) for d in docs], dtype=np.int64)
        if not np.array_equal(self.n_dk.sum(axis=1), doc_lens):
            raise RuntimeError("corrupted state: document-topic counts != doc lengths")
        if not np.array_equal(self.n_kw.sum(axis=1), self.n_k):
            raise RuntimeError("corrupted state: topic-word counts != topic totals")
        if self.n_k.sum() != doc_lens.sum():
            raise RuntimeError("corrupted state: topic totals != token total")


def init_state(
    docs: list[list[int]],
    k: int,
    vocabulary_size: int,
    rng_seed: int = 0,
    alpha_init: float | None = None,
    beta_init: float = DEFAULT_BETA,
) -> TopicState:
    """Assign every token a uniform random topic and build the counts."""
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = random.Random(rng_seed)
    alpha_value = alpha_init if alpha_init is not None else DEFAULT_ALPHA_SUM / k
    n_dk = np.zeros((len(docs), k), dtype=np.int64)
    n_kw = np.zeros((k, vocabulary_size), dtype=np.int64)
    n_k = np.zeros(k, dtype=np.int64)
    z = []
    for d, doc in enumerate(docs):
        zd = []
        for w in doc:
            topic = rng.randrange(k)
            zd.append(topic)
            n_dk[d, topic] += 1
            n_kw[topic, w] += 1
            n_k[topic] += 1
        z.append(zd)
    return TopicState(
        k=k,
        alpha=np.full(k, alpha_value, dtype=float),
        beta=float(beta_init),
        z=z,
        n_dk=n_dk,
        n_kw=n_kw,
        n_k=n_k,
        vocabulary_size=vocabulary_size,
        rng_seed=rng_seed,
        rng=rng,
    )


def topic_conditional(
    n_dk_row: list[int],
    n_kw_col: list[int],
    n_k: list[int],
    alpha: list[float],
    beta: float,
    vocabulary_size: int,
) -> list[float]:
    """Collapsed conditional p(z = k) for one token, given counts with the
    token's own assignment already decremented."""
    vbeta = vocabulary_size * beta
    weights = [
        (n_dk_row[k] + alpha[k]) * (n_kw_col[k] + beta) / (n_k[k] + vbeta)
        for k in range(len(n_k))
    ]
    total = sum(weights)
    return [w / total for w in weights]


def gibbs_sweep(state: TopicState, docs: list[list[int]]) -> TopicState:
    """One full collapsed-Gibbs pass over every token, in document order."""
    state.validate(docs)
    k_topics = state.k
    vbeta = state.vocabulary_size * state.beta
    beta = state.beta
    alpha = state.alpha.tolist()
    n_dk = state.n_dk.tolist()
    n_kw = state.n_kw.tolist()
    n_k = state.n_k.tolist()
    rand = state.rng.random
    cum = [0.0] * k_topics

    for d, doc in enumerate(docs):
        zd = state.z[d]
        row = n_dk[d]
        for i, w in enumerate(doc):
            old = zd[i]
            row[old] -= 1
            n_kw[old][w] -= 1
            n_k[old] -= 1
            total = 0.0
            for k in range(k_topics):
                total += (row[k] + alpha[k]) * (n_kw[k][w] + beta) / (n_k[k] + vbeta)
                cum[k] = total
            u = rand() * total
            new = 0
            while cum[new] < u:
                new += 1
            zd[i] = new
            row[new] += 1
            n_kw[new][w] += 1
            n_k[new] += 1

    state.n_dk = np.array(n_dk, dtype=np.int64).reshape(len(docs), k_topics)
    state.n_kw = np.array(n_kw, dtype=np.int64).reshape(k_topics, state.vocabulary_size)
    state.n_k = np.array(n_k, dtype=np.int64)
    return state


def log_likelihood(state: TopicState) -> float:
    """Joint log p(words, assignments | alpha, beta) from the count matrices."""
    d_count = state.n_dk.shape[0]
    sum_alpha = state.alpha.sum()
    doc_lens = state.n_dk.sum(axis=1)
    ll = (
        d_count * gammaln(sum_alpha)
        - gammaln(doc_lens + sum_alpha).sum()
        + gammaln(state.n_dk + state.alpha).sum()
        - d_count * gammaln(state.alpha).sum()
    )
    vbeta = state.vocabulary_size * state.beta
    ll += (
        state.k * gammaln(vbeta)
        - gammaln(state.n_k + vbeta).sum()
        + gammaln(state.n_kw + state.beta).sum()
        - state.k * state.vocabulary_size * gammaln(state.beta)
    )
    return float(ll)


ALPHA_FLOOR = 1e-5
FIXED_POINT_TOL = 1e-5
FIXED_POINT_MAX_ITER = 1000


def optimize_alpha(
    state: TopicState,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> np.ndarray:
    """Maximum-likelihood fixed-point update of the asymmetric alpha prior
    using histograms of topic counts and document lengths."""
    n_dk = state.n_dk
    d_count = n_dk.shape[0]
    doc_lens = n_dk.sum(axis=1)
    len_hist = np.bincount(doc_lens)
    len_values = np.nonzero(len_hist)[0]
    len_weights = len_hist[len_values]
    topic_hists = []
    for k in range(state.k):
        hist = np.bincount(n_dk[:, k])
        values = np.nonzero(hist)[0]
        topic_hists.append((values, hist[values]))

    alpha = state.alpha.copy()
    for _ in range(max_iter):
        sum_alpha = alpha.sum()
        denom = (len_weights * digamma(len_values + sum_alpha)).sum() - d_count * digamma(sum_alpha)
        new_alpha = np.empty_like(alpha)
        for k in range(state.k):
            values, weights = topic_hists[k]
            numer = (weights * digamma(values + alpha[k])).sum() - d_count * digamma(alpha[k])
            new_alpha[k] = alpha[k] * numer / denom
        if not np.all(np.isfinite(new_alpha)):
            log.warning("alpha optimization produced non-finite values; reverting")
            return state.alpha
        new_alpha = np.maximum(new_alpha, ALPHA_FLOOR)
        rel_change = np.max(np.abs(new_alpha - alpha) / alpha)
        alpha = new_alpha
        if rel_change < tol:
            break
    state.alpha = alpha
    return alpha


def optimize_beta(
    state: TopicState,
    tol: float = FIXED_POINT_TOL,
    max_iter: int = FIXED_POINT_MAX_ITER,
) -> float:
    """Maximum-likelihood fixed point for the symmetric beta prior over
    the topic-word counts."""
    v = state.vocabulary_size
    k_topics = state.k
    word_hist = np.bincount(state.n_kw.ravel())
    word_values = np.nonzero(word_hist)[0]
    word_weights = word_hist[word_values]
    topic_totals = state.n_k

    beta = state.beta
    for _ in range(max_iter):
        numer = (word_weights * digamma(word_values + beta)).sum() - k_topics * v * digamma(beta)
        denom = v * (digamma(topic_totals + v * beta).sum() - k_topics * digamma(v * beta))
        new_beta = beta * numer / denom
        if not np.isfinite(new_beta) or new_beta <= 0:
            log.warning("beta optimization produced non-finite value; reverting")
            return state.beta
        new_beta = max(new_beta, ALPHA_FLOOR)
        rel_change = abs(new_beta - beta) / beta
        beta = new_beta
        if rel_change < tol:
            break
    state.beta = beta
    return beta


@dataclass
class TopicSummary:
    log_likelihoods: list[float]
    doc_topic: np.ndarray    # (D, K) smoothed topic proportions


def doc_topic_proportions(state: TopicState) -> np.ndarray:
    """Smoothed (posterior-mean) per-document topic proportions."""
    doc_lens = state.n_dk.sum(axis=1, keepdims=True)
    return (state.n_dk + state.alpha) / (doc_lens + state.alpha.sum())


def train(
    docs: list[list[int]],
    vocabulary_size: int,
    k: int = 65,
    sweeps: int = 1000,
    burn_in: int = 50,
    optimize_interval: int = 10,
    rng_seed: int = 0,
    beta_init: float = DEFAULT_BETA,
    check_counts: bool = False,
) -> tuple[TopicState, TopicSummary]:
    """Run collapsed Gibbs sampling with periodic hyperparameter updates.

    Hyperparameters are re-estimated every optimize_interval sweeps once
    past burn_in. Deterministic given rng_seed.
    """
    state = init_state(docs, k, vocabulary_size, rng_seed=rng_seed, beta_init=beta_init)
    lls = []
    for sweep in range(1, sweeps + 1):
        gibbs_sweep(state, docs)
        if check_counts:
            state.validate(docs)
        lls.append(log_likelihood(state))
        if optimize_interval and sweep > burn_in and sweep % optimize_interval == 0:
            optimize_alpha(state)
            optimize_beta(state)
    return state, TopicSummary(log_likelihoods=lls, doc_topic=doc_topic_proportions(state))


def top_words(state: TopicState, vocabulary: Vocabulary, k: int, n: int = 10) -> list[str]:
    """Top-n words of topic k by count, ties broken lexicographically."""
    if not 0 <= k < state.k:
        raise ValueError(f"topic index {k} out of range for K={state.k}")
    counts = state.n_kw[k]
    order = sorted(range(vocabulary.size), key=lambda w: (-counts[w], vocabulary.words[w]))
    return [vocabulary.words[w] for w in order[:n]]


@dataclass
class NovelTopicProminence:
    novel_id: str
    prominence: list[float]   # per-topic mean percentage, sums to 100


def prominence_from_doc_topic(
    doc_topic: np.ndarray,
    doc_novels: list[str],
    all_novel_ids: list[str] | None = None,
) -> list[NovelTopicProminence]:
    """Mean per-novel topic percentages from per-document proportions."""
    order: list[str] = []
    rows: dict[str, list[int]] = {}
    for i, novel_id in enumerate(doc_novels):
        if novel_id not in rows:
            rows[novel_id] = []
            order.append(novel_id)
        rows[novel_id].append(i)
    if all_novel_ids:
        for novel_id in all_novel_ids:
            if novel_id not in rows:
                log.warning("novel %s has no segments; excluded from prominence", novel_id)
    return [
        NovelTopicProminence(
            novel_id=novel_id,
            prominence=(100.0 * doc_topic[rows[novel_id]].mean(axis=0)).tolist(),
        )
        for novel_id in order
    ]


def novel_prominence(
    state: TopicState,
    doc_novels: list[str],
    all_novel_ids: list[str] | None = None,
) -> list[NovelTopicProminence]:
    return prominence_from_doc_topic(doc_topic_proportions(state), doc_novels, all_novel_ids)


def topic_correlation(
    prominences: list[NovelTopicProminence],
    topic_a: int,
    topic_b: int,
) -> tuple[float, float]:
    """Pearson correlation of two topics' prominence across novels."""
    if len(prominences) < 3:
        raise ValueError("topic correlation requires at least 3 novels")
    x = [p.prominence[topic_a] for p in prominences]
    y = [p.prominence[topic_b] for p in prominences]
    return pearson(x, y)


def save_state(
    path: Path | str,
    state: TopicState,
    summary: TopicSummary,
    vocabulary: Vocabulary,
    doc_novels: list[str],
) -> None:
    """Dump the trained model as versioned JSON."""
    payload = {
        "format": STATE_FORMAT,
        "version": STATE_VERSION,
        "k": state.k,
        "alpha": [float(a) for a in state.alpha],
        "beta": state.beta,
        "seed": state.rng_seed,
        "vocabulary": vocabulary.words,
        "n_kw": state.n_kw.tolist(),
        "doc_topic": summary.doc_topic.tolist(),
        "doc_novels": doc_novels,
        "log_likelihood": summary.log_likelihoods,
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


@dataclass
class LoadedTopicModel:
    k: int
    alpha: list[float]
    beta: float
    seed: int
    vocabulary: list[str]
    n_kw: np.ndarray
    doc_topic: np.ndarray
    doc_novels: list[str]
    log_likelihood: list[float]

    def top_words(self, k: int, n: int = 10) -> list[str]:
        if not 0 <= k < self.k:
            raise ValueError(f"topic index {k} out of range for K={self.k}")
        counts = self.n_kw[k]
        order = sorted(range(len(self.vocabulary)), key=lambda w: (-counts[w], self.vocabulary[w]))
        return [self.vocabulary[w] for w in order[:n]]


def load_state(path: Path | str) -> LoadedTopicModel:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != STATE_FORMAT or payload.get("version") != STATE_VERSION:
        raise ValueError(f"unrecognized topic state file: {path}")
    return LoadedTopicModel(
        k=payload["k"],
        alpha=payload["alpha"],
        beta=payload["beta"],
        seed=payload["seed"],
        vocabulary=payload["vocabulary"],
        n_kw=np.array(payload["n_kw"], dtype=np.int64),
        doc_topic=np.array(payload["doc_topic"], dtype=float),
        doc_novels=payload["doc_novels"],
        log_likelihood=payload["log_likelihood"],
    )
