"""Sparse features over sentence pairs and covered words.

Feature construction is organized by word groups. A word group is a
predicate on a word's statistics within one document set (never on the
candidate summary):

* ``basic``         every word.
* ``cap_stop_len``  variants: words seen capitalized somewhere in the set
                    (``cap``), non-stopwords (``nonstop``), and words of at
                    least a cutoff length (``lenNN``).
* ``minmax``        words among the top-k most frequent in the set, one
                    variant per configured k.
* ``sent_doc``      words whose sentence-fraction or document-fraction
                    meets a threshold (``sfQ`` / ``dfQ`` variants).
* ``location``      positional information. For pairwise models it attaches
                    to sentences (bin of position_in_doc); for the coverage
                    model it attaches to words (bin of the earliest
                    position_in_doc at which the word occurs).

Pairwise features for a sentence pair are, per (group variant, weighting
scheme), the cosine similarity of the two sentences restricted to the
group's words, plus an indicator for the bin the similarity falls in.
Weighting is raw counts or tf-idf with idf(v) = ln((D+1)/(df(v)+1)) + 1
computed within the document set. Binned indicators only fire for strictly
positive similarities, so disjoint-vocabulary pairs produce an empty map.

Coverage features for a word are indicators per (coverage level, group
containing the word), a bucketed sentence-fraction importance indicator per
group, and the positional bin. A coverage level (a, b) fires when some
sentence of the set contains the word at least a times and the word occurs
in at least fraction b of the sentences.

The registry assigns indices by sorting feature names, so a configuration
always yields the same index layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache
from typing import Iterable

from .corpus import DocumentSet
from .scoring import Summary

GROUPS = ("basic", "cap_stop_len", "location", "minmax", "sent_doc")
WEIGHTINGS = ("raw", "tfidf")


@dataclass(frozen=True)
class FeatureConfig:
    enabled_groups: tuple[str, ...] = GROUPS
    weightings: tuple[str, ...] = WEIGHTINGS
    length_cutoffs: tuple[int, ...] = (4, 7)
    minmax_top_ks: tuple[int, ...] = (10, 50, 100)
    sent_frac_thresholds: tuple[float, ...] = (0.05, 0.1)
    doc_frac_thresholds: tuple[float, ...] = (0.5, 1.0)
    similarity_bins: int = 10
    # position bins {0, 1, 2, 3-5, 6+}: bin(p) = #edges <= p
    position_bin_edges: tuple[int, ...] = (1, 2, 3, 6)
    coverage_levels: tuple[tuple[int, float], ...] = (
        (1, 0.0), (1, 0.05), (1, 0.1), (2, 0.0), (2, 0.05), (2, 0.1),
    )
    importance_bucket_edges: tuple[float, ...] = (0.05, 0.1, 0.2, 0.5)

    def __post_init__(self):
        unknown = set(self.enabled_groups) - set(GROUPS)
        if unknown:
            raise ValueError(f"unknown feature groups: {sorted(unknown)}")
        if not self.enabled_groups:
            raise ValueError("enabled_groups must not be empty")
        bad = set(self.weightings) - set(WEIGHTINGS)
        if bad:
            raise ValueError(f"unknown weighting schemes: {sorted(bad)}")
        for t in self.length_cutoffs + self.minmax_top_ks:
            if t <= 0:
                raise ValueError("thresholds must be strictly positive")
        for t in self.sent_frac_thresholds + self.doc_frac_thresholds:
            if t <= 0:
                raise ValueError("fraction thresholds must be strictly positive")
        if self.similarity_bins < 1:
            raise ValueError("similarity_bins must be >= 1")
        edges = self.position_bin_edges
        if list(edges) != sorted(set(edges)) or (edges and edges[0] <= 0):
            raise ValueError("position_bin_edges must be strictly increasing and positive")
        for a, b in self.coverage_levels:
            if a < 1 or b < 0 or b > 1:
                raise ValueError(f"bad coverage level ({a}, {b})")

    def to_dict(self) -> dict:
        return {
            "enabled_groups": list(self.enabled_groups),
            "weightings": list(self.weightings),
            "length_cutoffs": list(self.length_cutoffs),
            "minmax_top_ks": list(self.minmax_top_ks),
            "sent_frac_thresholds": list(self.sent_frac_thresholds),
            "doc_frac_thresholds": list(self.doc_frac_thresholds),
            "similarity_bins": self.similarity_bins,
            "position_bin_edges": list(self.position_bin_edges),
            "coverage_levels": [list(lv) for lv in self.coverage_levels],
            "importance_bucket_edges": list(self.importance_bucket_edges),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(
            enabled_groups=tuple(d["enabled_groups"]),
            weightings=tuple(d["weightings"]),
            length_cutoffs=tuple(int(v) for v in d["length_cutoffs"]),
            minmax_top_ks=tuple(int(v) for v in d["minmax_top_ks"]),
            sent_frac_thresholds=tuple(float(v) for v in d["sent_frac_thresholds"]),
            doc_frac_thresholds=tuple(float(v) for v in d["doc_frac_thresholds"]),
            similarity_bins=int(d["similarity_bins"]),
            position_bin_edges=tuple(int(v) for v in d["position_bin_edges"]),
            coverage_levels=tuple((int(a), float(b)) for a, b in d["coverage_levels"]),
            importance_bucket_edges=tuple(float(v) for v in d["importance_bucket_edges"]),
        )

    def without_group(self, group: str) -> "FeatureConfig":
        if group not in GROUPS:
            raise ValueError(f"unknown feature group {group!r}; valid: {list(GROUPS)}")
        kept = tuple(g for g in self.enabled_groups if g != group)
        return replace(self, enabled_groups=kept)

    def position_bin(self, position: int) -> int:
        b = 0
        for edge in self.position_bin_edges:
            if position >= edge:
                b += 1
        return b

    @property
    def num_position_bins(self) -> int:
        return len(self.position_bin_edges) + 1


@dataclass(frozen=True)
class WordGroup:
    """One membership predicate; ``variant`` names it inside its group."""

    group_id: str
    variant: str
    kind: str
    threshold: float = 0.0

    def members(self, x: DocumentSet) -> frozenset[str]:
        vocab = x.vocabulary
        if self.kind == "all":
            return frozenset(vocab)
        if self.kind == "cap":
            return frozenset(w for w, s in vocab.items() if s.ever_capitalized)
        if self.kind == "nonstop":
            return frozenset(w for w, s in vocab.items() if not s.is_stopword)
        if self.kind == "minlen":
            n = int(self.threshold)
            return frozenset(w for w in vocab if len(w) >= n)
        if self.kind == "topk":
            return top_k_words(x, int(self.threshold))
        if self.kind == "sentfrac":
            n = x.num_sentences
            return frozenset(
                w for w, s in vocab.items() if s.sentence_freq / n >= self.threshold
            )
        if self.kind == "docfrac":
            d = x.num_docs
            return frozenset(
                w for w, s in vocab.items() if s.doc_freq / d >= self.threshold
            )
        raise ValueError(f"unknown word group kind {self.kind!r}")


def top_k_words(x: DocumentSet, k: int) -> frozenset[str]:
    """The k most frequent words of the set; ties broken alphabetically."""
    ranked = sorted(x.vocabulary.items(), key=lambda kv: (-kv[1].total_count, kv[0]))
    return frozenset(w for w, _ in ranked[:k])


def cosine_groups(cfg: FeatureConfig) -> tuple[WordGroup, ...]:
    """The word-membership group variants, sorted by (group, variant)."""
    out: list[WordGroup] = []
    if "basic" in cfg.enabled_groups:
        out.append(WordGroup("basic", "all", "all"))
    if "cap_stop_len" in cfg.enabled_groups:
        out.append(WordGroup("cap_stop_len", "cap", "cap"))
        for n in cfg.length_cutoffs:
            out.append(WordGroup("cap_stop_len", f"len{n:02d}", "minlen", n))
        out.append(WordGroup("cap_stop_len", "nonstop", "nonstop"))
    if "minmax" in cfg.enabled_groups:
        for k in cfg.minmax_top_ks:
            out.append(WordGroup("minmax", f"top{k:03d}", "topk", k))
    if "sent_doc" in cfg.enabled_groups:
        for q in cfg.doc_frac_thresholds:
            out.append(WordGroup("sent_doc", f"df{q:.2f}", "docfrac", q))
        for q in cfg.sent_frac_thresholds:
            out.append(WordGroup("sent_doc", f"sf{q:.2f}", "sentfrac", q))
    return tuple(sorted(out, key=lambda g: (g.group_id, g.variant)))


class FeatureVector:
    """Sparse map from feature index to value. Zeros are never stored."""

    __slots__ = ("entries", "dimension")

    def __init__(self, entries: dict[int, float], dimension: int, validate: bool = True):
        if validate:
            clean: dict[int, float] = {}
            for i, v in entries.items():
                if not (0 <= i < dimension):
                    raise ValueError(f"feature index {i} out of range [0, {dimension})")
                if not math.isfinite(v):
                    raise ValueError(f"non-finite feature value at index {i}")
                if v != 0.0:
                    clean[i] = float(v)
            entries = clean
        self.entries = entries
        self.dimension = dimension

    def dot(self, w) -> float:
        return float(sum(w[i] * v for i, v in self.entries.items()))

    def to_dense(self):
        import numpy as np

        dense = np.zeros(self.dimension)
        for i, v in self.entries.items():
            dense[i] = v
        return dense

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FeatureVector)
            and self.dimension == other.dimension
            and self.entries == other.entries
        )

    def __repr__(self) -> str:
        return f"FeatureVector({self.entries!r}, dimension={self.dimension})"


def fv_subtract(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    if a.dimension != b.dimension:
        raise ValueError("dimension mismatch")
    entries = dict(a.entries)
    for i, v in b.entries.items():
        nv = entries.get(i, 0.0) - v
        if nv == 0.0:
            entries.pop(i, None)
        else:
            entries[i] = nv
    return FeatureVector(entries, a.dimension, validate=False)


def _accumulate(acc: dict[int, float], fv: FeatureVector, scale: float) -> None:
    if scale == 0.0:
        return
    for i, v in fv.entries.items():
        acc[i] = acc.get(i, 0.0) + scale * v


class FeatureRegistry:
    """Deterministic feature-name-to-index assignment for one model kind."""

    def __init__(self, cfg: FeatureConfig, model_kind: str):
        if model_kind not in ("pairwise", "pairwise-split", "coverage"):
            raise ValueError(f"unknown model kind {model_kind!r}")
        self.cfg = cfg
        self.model_kind = model_kind
        if model_kind == "coverage":
            base = _coverage_names(cfg)
        else:
            base = _pairwise_names(cfg)
        self.base_names = tuple(sorted(base))
        self.base_dimension = len(self.base_names)
        if model_kind == "pairwise-split":
            # sorted() keeps the cross block before the redundancy block
            names = [f"cross:{n}" for n in self.base_names]
            names += [f"red:{n}" for n in self.base_names]
        else:
            names = list(self.base_names)
        self.names = tuple(names)
        self.index = {n: i for i, n in enumerate(self.names)}
        self.base_index = {n: i for i, n in enumerate(self.base_names)}
        self.dimension = len(self.names)


def _pairwise_names(cfg: FeatureConfig) -> list[str]:
    names: list[str] = []
    for g in cosine_groups(cfg):
        for scheme in sorted(cfg.weightings):
            names.append(f"pair:cos:{g.group_id}:{g.variant}:{scheme}")
            for b in range(cfg.similarity_bins):
                names.append(f"pair:bin:{g.group_id}:{g.variant}:{scheme}:{b:02d}")
    if "location" in cfg.enabled_groups:
        nb = cfg.num_position_bins
        for b1 in range(nb):
            for b2 in range(b1, nb):
                names.append(f"pair:loc:{b1}:{b2}")
    return names


def _coverage_names(cfg: FeatureConfig) -> list[str]:
    names: list[str] = []
    for g in cosine_groups(cfg):
        for a, b in sorted(cfg.coverage_levels):
            names.append(f"cov:lvl:{g.group_id}:{g.variant}:a{a}b{b:.2f}")
        for qi in range(len(cfg.importance_bucket_edges) + 1):
            names.append(f"cov:imp:{g.group_id}:{g.variant}:q{qi}")
    if "location" in cfg.enabled_groups:
        for b in range(cfg.num_position_bins):
            names.append(f"cov:loc:bin{b}")
    return names


@lru_cache(maxsize=64)
def registry_for(cfg: FeatureConfig, model_kind: str) -> FeatureRegistry:
    return FeatureRegistry(cfg, model_kind)


def _bucket_index(value: float, edges: tuple[float, ...]) -> int:
    b = 0
    for e in edges:
        if value >= e:
            b += 1
    return b


class FeatureContext:
    """Read-through cache of extraction state for one document set.

    Holds group memberships, weighted sentence vectors and extracted
    feature vectors. Confine one context to one document set; it never
    mutates the set itself.
    """

    def __init__(self, x: DocumentSet, cfg: FeatureConfig):
        self.x = x
        self.cfg = cfg
        self.groups = cosine_groups(cfg)
        self._members: dict[tuple[str, str], frozenset[str]] = {}
        self._vectors: dict[tuple[str, str, str], list[tuple[dict[str, float], float]]] = {}
        self._idf: dict[str, float] | None = None
        self._pair_cache: dict[tuple[int, int], FeatureVector] = {}
        self._word_cache: dict[str, FeatureVector] = {}
        self._registry_pair = registry_for(cfg, "pairwise")
        self._registry_cov = registry_for(cfg, "coverage")

    def members(self, g: WordGroup) -> frozenset[str]:
        key = (g.group_id, g.variant)
        if key not in self._members:
            self._members[key] = g.members(self.x)
        return self._members[key]

    def idf(self) -> dict[str, float]:
        if self._idf is None:
            d = self.x.num_docs
            self._idf = {
                w: math.log((d + 1) / (s.doc_freq + 1)) + 1.0
                for w, s in self.x.vocabulary.items()
            }
        return self._idf

    def sentence_vectors(self, g: WordGroup, scheme: str):
        key = (g.group_id, g.variant, scheme)
        if key not in self._vectors:
            member = self.members(g)
            idf = self.idf() if scheme == "tfidf" else None
            vecs = []
            for s in self.x.sentences:
                vec: dict[str, float] = {}
                for w, c in s.word_counts().items():
                    if w in member:
                        vec[w] = c * idf[w] if idf is not None else float(c)
                # squared norm; the cosine takes one sqrt of the product so
                # rational cases like 1/sqrt(2*2) come out exact
                vecs.append((vec, sum(v * v for v in vec.values())))
            self._vectors[key] = vecs
        return self._vectors[key]

    def pair(self, i: int, j: int) -> FeatureVector:
        if i > j:
            i, j = j, i
        key = (i, j)
        fv = self._pair_cache.get(key)
        if fv is None:
            fv = self._pair_cache[key] = _extract_pair(self, i, j)
        return fv

    def word(self, v: str) -> FeatureVector:
        fv = self._word_cache.get(v)
        if fv is None:
            fv = self._word_cache[v] = _extract_word(self, v)
        return fv


def _cosine(a: tuple[dict[str, float], float], b: tuple[dict[str, float], float]) -> float:
    va, na_sq = a
    vb, nb_sq = b
    if na_sq == 0.0 or nb_sq == 0.0:
        return 0.0
    if len(vb) < len(va):
        va, vb = vb, va
    dot = sum(v * vb.get(w, 0.0) for w, v in va.items())
    return dot / math.sqrt(na_sq * nb_sq)


def _extract_pair(ctx: FeatureContext, i: int, j: int) -> FeatureVector:
    cfg = ctx.cfg
    reg = ctx._registry_pair
    entries: dict[int, float] = {}
    for g in ctx.groups:
        for scheme in sorted(cfg.weightings):
            vecs = ctx.sentence_vectors(g, scheme)
            c = _cosine(vecs[i], vecs[j])
            if c > 0.0:
                entries[reg.index[f"pair:cos:{g.group_id}:{g.variant}:{scheme}"]] = c
                b = min(int(c * cfg.similarity_bins), cfg.similarity_bins - 1)
                entries[reg.index[f"pair:bin:{g.group_id}:{g.variant}:{scheme}:{b:02d}"]] = 1.0
    if "location" in cfg.enabled_groups:
        b1 = cfg.position_bin(ctx.x.sentences[i].position_in_doc)
        b2 = cfg.position_bin(ctx.x.sentences[j].position_in_doc)
        if b1 > b2:
            b1, b2 = b2, b1
        entries[reg.index[f"pair:loc:{b1}:{b2}"]] = 1.0
    return FeatureVector(entries, reg.dimension, validate=False)


def _extract_word(ctx: FeatureContext, v: str) -> FeatureVector:
    cfg = ctx.cfg
    reg = ctx._registry_cov
    stats = ctx.x.vocabulary.get(v)
    if stats is None:
        raise KeyError(f"word {v!r} not in document set {ctx.x.set_id!r}")
    entries: dict[int, float] = {}
    sf_frac = stats.sentence_freq / ctx.x.num_sentences
    for g in ctx.groups:
        if v not in ctx.members(g):
            continue
        for a, b in sorted(cfg.coverage_levels):
            if stats.max_in_sentence >= a and sf_frac >= b:
                entries[reg.index[f"cov:lvl:{g.group_id}:{g.variant}:a{a}b{b:.2f}"]] = 1.0
        qi = _bucket_index(sf_frac, cfg.importance_bucket_edges)
        entries[reg.index[f"cov:imp:{g.group_id}:{g.variant}:q{qi}"]] = 1.0
    if "location" in cfg.enabled_groups:
        entries[reg.index[f"cov:loc:bin{cfg.position_bin(stats.earliest_position)}"]] = 1.0
    return FeatureVector(entries, reg.dimension, validate=False)


def pairwise_features(
    x: DocumentSet, i: int, j: int, cfg: FeatureConfig, ctx: FeatureContext | None = None
) -> FeatureVector:
    """phi(i, j): symmetric sparse features of one sentence pair."""
    n = x.num_sentences
    if not (0 <= i < n and 0 <= j < n) or i == j:
        raise ValueError(f"bad sentence pair ({i}, {j}) for n={n}")
    if ctx is None:
        ctx = FeatureContext(x, cfg)
    return ctx.pair(i, j)


def coverage_features(
    x: DocumentSet, v: str, cfg: FeatureConfig, ctx: FeatureContext | None = None
) -> FeatureVector:
    """phi(v): sparse features of one covered word."""
    if ctx is None:
        ctx = FeatureContext(x, cfg)
    return ctx.word(v)


def _summary_ids(y) -> tuple[int, ...]:
    if isinstance(y, Summary):
        return y.selected
    return tuple(y)


def joint_feature_map_pairwise(
    x: DocumentSet,
    y,
    cfg: FeatureConfig,
    lam: float,
    split: bool = False,
    ctx: FeatureContext | None = None,
) -> FeatureVector:
    """Map a summary to feature space.

    Fixed-lambda form: sum of phi over (outside, inside) pairs minus lam
    times the sum over ordered inside pairs. Split form: the same two sums
    concatenated into disjoint blocks (cross block first), lam unused.
    """
    if ctx is None:
        ctx = FeatureContext(x, cfg)
    ids = _summary_ids(y)
    inside = set(ids)
    n = x.num_sentences
    cross: dict[int, float] = {}
    red: dict[int, float] = {}
    for j in inside:
        for i in range(n):
            if i == j:
                continue
            if i in inside:
                if i < j:
                    # ordered redundancy pairs count each unordered pair twice
                    _accumulate(red, ctx.pair(i, j), 2.0)
            else:
                _accumulate(cross, ctx.pair(i, j), 1.0)
    if split:
        reg = registry_for(cfg, "pairwise-split")
        base = reg.base_dimension
        entries = {i: v for i, v in cross.items() if v != 0.0}
        for i, v in red.items():
            if v != 0.0:
                entries[base + i] = v
        return FeatureVector(entries, reg.dimension, validate=False)
    entries = dict(cross)
    for i, v in red.items():
        entries[i] = entries.get(i, 0.0) - lam * v
    entries = {i: v for i, v in entries.items() if v != 0.0}
    return FeatureVector(entries, registry_for(cfg, "pairwise").dimension, validate=False)


def joint_feature_map_coverage(
    x: DocumentSet, y, cfg: FeatureConfig, ctx: FeatureContext | None = None
) -> FeatureVector:
    """Sum of word features over the distinct words the summary covers."""
    if ctx is None:
        ctx = FeatureContext(x, cfg)
    covered: set[str] = set()
    for sid in _summary_ids(y):
        for t in x.sentences[sid].tokens:
            covered.add(t.normalized)
    acc: dict[int, float] = {}
    for v in sorted(covered):
        _accumulate(acc, ctx.word(v), 1.0)
    acc = {i: val for i, val in acc.items() if val != 0.0}
    return FeatureVector(acc, registry_for(cfg, "coverage").dimension, validate=False)


def tfidf_cosine_fn(x: DocumentSet):
    """Similarity used by the hand-tuned baseline: tf-idf cosine, all words."""
    cfg = FeatureConfig(enabled_groups=("basic",), weightings=("tfidf",))
    ctx = FeatureContext(x, cfg)
    g = ctx.groups[0]

    def sigma(i: int, j: int) -> float:
        vecs = ctx.sentence_vectors(g, "tfidf")
        return _cosine(vecs[i], vecs[j])

    return sigma
