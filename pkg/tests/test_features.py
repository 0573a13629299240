import math
import random

import numpy as np
import pytest

from structsum.corpus import build_document_set
from structsum.features import (
    GROUPS,
    FeatureConfig,
    FeatureContext,
    FeatureVector,
    coverage_features,
    fv_subtract,
    joint_feature_map_coverage,
    joint_feature_map_pairwise,
    pairwise_features,
    registry_for,
    tfidf_cosine_fn,
    top_k_words,
)
from structsum.greedy import GreedyConfig, greedy_maximize
from structsum.scoring import (
    CoverageScorer,
    PairwiseScorer,
    SplitPairwiseScorer,
    Summary,
    score,
)

from conftest import random_documents


class TestFeatureConfig:
    def test_defaults_roundtrip(self):
        cfg = FeatureConfig()
        assert FeatureConfig.from_dict(cfg.to_dict()) == cfg

    def test_without_group(self):
        cfg = FeatureConfig().without_group("minmax")
        assert "minmax" not in cfg.enabled_groups
        assert set(cfg.enabled_groups) < set(GROUPS)

    def test_without_unknown_group_lists_names(self):
        with pytest.raises(ValueError, match="basic"):
            FeatureConfig().without_group("nope")

    def test_rejects_unknown_group(self):
        with pytest.raises(ValueError):
            FeatureConfig(enabled_groups=("basic", "bogus"))

    def test_position_bins(self):
        cfg = FeatureConfig()
        assert [cfg.position_bin(p) for p in (0, 1, 2, 3, 4, 5, 6, 40)] == [
            0, 1, 2, 3, 3, 3, 4, 4,
        ]
        assert cfg.num_position_bins == 5


class TestRegistry:
    def test_sorted_and_stable(self):
        cfg = FeatureConfig()
        reg1 = registry_for(cfg, "pairwise")
        reg2 = registry_for(cfg, "pairwise")
        assert reg1 is reg2
        names = reg1.names
        assert list(names) == sorted(names)
        assert reg1.dimension == len(names)
        assert all(reg1.index[n] == i for i, n in enumerate(names))

    def test_split_layout_doubles_base(self):
        cfg = FeatureConfig()
        base = registry_for(cfg, "pairwise")
        split = registry_for(cfg, "pairwise-split")
        assert split.dimension == 2 * base.dimension
        for i, name in enumerate(base.names):
            assert split.index["cross:" + name] == i
            assert split.index["red:" + name] == base.dimension + i

    def test_kinds_have_distinct_vocabularies(self):
        cfg = FeatureConfig()
        pair_names = registry_for(cfg, "pairwise").names
        cov_names = registry_for(cfg, "coverage").names
        assert all(n.startswith("pair:") for n in pair_names)
        assert all(n.startswith("cov:") for n in cov_names)

    def test_group_removal_shrinks(self):
        full = registry_for(FeatureConfig(), "pairwise").dimension
        less = registry_for(FeatureConfig().without_group("minmax"), "pairwise").dimension
        assert less < full


class TestFeatureVector:
    def test_drops_zeros_and_keeps_sparse(self):
        fv = FeatureVector({0: 1.0, 2: 0.0, 3: -2.0}, 4)
        assert len(fv) == 2
        assert fv.dot(np.ones(4)) == pytest.approx(-1.0)

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            FeatureVector({5: 1.0}, 3)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            FeatureVector({0: float("nan")}, 2)

    def test_subtract(self):
        a = FeatureVector({0: 2.0, 1: 1.0}, 3)
        b = FeatureVector({1: 1.0, 2: 4.0}, 3)
        d = fv_subtract(a, b)
        assert d.to_dense().tolist() == [2.0, 0.0, -4.0]

    def test_to_dense_matches_entries(self):
        fv = FeatureVector({1: 0.5}, 2)
        assert fv.to_dense().tolist() == [0.0, 0.5]


def two_doc_set(stopwords):
    return build_document_set(
        "f",
        [
            "Markets Rallied Today. The traders cheered loudly. 5 markets closed early.",
            "Rally Continued Overnight. The mood stayed bright. Traders rallied again.",
        ],
        stopwords,
    )


class TestPairwiseFeatures:
    def test_cosine_worked_example(self, make_docset):
        x = make_docset(["A b. A c."], with_stopwords=False)
        cfg = FeatureConfig(enabled_groups=("basic",), weightings=("raw",))
        fv = pairwise_features(x, 0, 1, cfg)
        reg = registry_for(cfg, "pairwise")
        cos_idx = reg.index["pair:cos:basic:all:raw"]
        assert fv.to_dense()[cos_idx] == pytest.approx(0.5)

    def test_symmetry(self, stopwords):
        x = two_doc_set(stopwords)
        cfg = FeatureConfig()
        for i in range(x.num_sentences):
            for j in range(i + 1, x.num_sentences):
                assert pairwise_features(x, i, j, cfg) == pairwise_features(x, j, i, cfg)

    def test_bin_fires_only_with_positive_cosine(self, make_docset):
        x = make_docset(["Alpha beta. Gamma delta."], with_stopwords=False)
        cfg = FeatureConfig(enabled_groups=("basic",), weightings=("raw",))
        reg = registry_for(cfg, "pairwise")
        fv = pairwise_features(x, 0, 1, cfg)
        fired = {reg.names[i] for i in fv.entries}
        assert not any(n.startswith("pair:cos") or n.startswith("pair:bin") for n in fired)

    def test_exactly_one_bin_per_positive_cosine(self, make_docset):
        x = make_docset(["A b. A c."], with_stopwords=False)
        cfg = FeatureConfig(enabled_groups=("basic",), weightings=("raw",))
        reg = registry_for(cfg, "pairwise")
        fv = pairwise_features(x, 0, 1, cfg)
        bins = [reg.names[i] for i in fv.entries if reg.names[i].startswith("pair:bin")]
        assert bins == ["pair:bin:basic:all:raw:05"]

    def test_location_indicator_always_fires(self, stopwords):
        x = two_doc_set(stopwords)
        cfg = FeatureConfig(enabled_groups=("location",))
        reg = registry_for(cfg, "pairwise")
        fv = pairwise_features(x, 0, 5, cfg)
        # positions 0 and 2 -> unordered bin pair (0, 2)
        assert fv.entries == {reg.index["pair:loc:0:2"]: 1.0}

    def test_self_pair_rejected(self, stopwords):
        x = two_doc_set(stopwords)
        with pytest.raises(ValueError):
            pairwise_features(x, 1, 1, FeatureConfig())

    def test_tfidf_uses_idf(self, make_docset):
        x = make_docset(["Same word here. Same word there."], with_stopwords=False)
        ctx = FeatureContext(x, FeatureConfig(enabled_groups=("basic",)))
        d = x.num_docs
        for word, stats in x.vocabulary.items():
            expected = math.log((d + 1) / (stats.doc_freq + 1)) + 1.0
            assert ctx.idf()[word] == pytest.approx(expected)


class TestCoverageFeatures:
    def test_summary_independent(self, stopwords):
        x = two_doc_set(stopwords)
        cfg = FeatureConfig()
        fv1 = coverage_features(x, "markets", cfg)
        fv2 = coverage_features(x, "markets", cfg)
        assert fv1 == fv2

    def test_unknown_word_raises(self, stopwords):
        x = two_doc_set(stopwords)
        with pytest.raises(KeyError):
            coverage_features(x, "zzzz", FeatureConfig())

    def test_coverage_level_gating(self, make_docset):
        # "twice twice" gives max_in_sentence 2; sentence fraction 1/2
        x = make_docset(["Twice twice here. Other words now."], with_stopwords=False)
        cfg = FeatureConfig(enabled_groups=("basic",), weightings=("raw",))
        reg = registry_for(cfg, "coverage")
        fired = {
            reg.names[i]
            for i in coverage_features(x, "twice", cfg).entries
            if reg.names[i].startswith("cov:lvl")
        }
        assert fired == {
            "cov:lvl:basic:all:a1b0.00",
            "cov:lvl:basic:all:a1b0.05",
            "cov:lvl:basic:all:a1b0.10",
            "cov:lvl:basic:all:a2b0.00",
            "cov:lvl:basic:all:a2b0.05",
            "cov:lvl:basic:all:a2b0.10",
        }
        fired_single = {
            reg.names[i]
            for i in coverage_features(x, "other", cfg).entries
            if reg.names[i].startswith("cov:lvl")
        }
        assert fired_single == {
            "cov:lvl:basic:all:a1b0.00",
            "cov:lvl:basic:all:a1b0.05",
            "cov:lvl:basic:all:a1b0.10",
        }

    def test_location_attaches_earliest_position(self, make_docset):
        x = make_docset(["First mention here. Late word kumquat."], with_stopwords=False)
        cfg = FeatureConfig(enabled_groups=("location",))
        reg = registry_for(cfg, "coverage")
        fv = coverage_features(x, "kumquat", cfg)
        assert reg.index["cov:loc:bin1"] in fv.entries
        fv0 = coverage_features(x, "first", cfg)
        assert reg.index["cov:loc:bin0"] in fv0.entries

    def test_importance_bucket_from_tfidf(self, stopwords):
        x = two_doc_set(stopwords)
        cfg = FeatureConfig()
        reg = registry_for(cfg, "coverage")
        fv = coverage_features(x, "markets", cfg)
        buckets = [reg.names[i] for i in fv.entries if ":imp:" in reg.names[i]]
        assert buckets, "expected at least one importance bucket to fire"


class TestTopK:
    def test_orders_by_count_then_word(self, make_docset):
        x = make_docset(["Pea pea pod. Yam pod bean."], with_stopwords=False)
        # counts: pea 2, pod 2, bean 1, yam 1
        assert top_k_words(x, 2) == frozenset({"pea", "pod"})
        assert top_k_words(x, 3) == frozenset({"pea", "pod", "bean"})


class TestJointFeatureMap:
    def _random_w(self, rng, dim):
        return np.array([rng.uniform(-1, 1) for _ in range(dim)])

    def test_pairwise_linearity(self, stopwords):
        """w . Psi(x, y) equals the pairwise score under sigma_w."""
        rng = random.Random(7)
        cfg = FeatureConfig()
        for trial in range(20):
            docs = random_documents(rng, n_docs=2, sentences_per_doc=3)
            x = build_document_set(f"t{trial}", docs, stopwords)
            reg = registry_for(cfg, "pairwise")
            w = self._random_w(rng, reg.dimension)
            lam = rng.uniform(0.0, 5.0)
            ctx = FeatureContext(x, cfg)
            scorer = PairwiseScorer(
                lambda i, j: pairwise_features(x, i, j, cfg, ctx).dot(w),
                lam=lam,
                clamp_negative=False,
            )
            ids = rng.sample(range(x.num_sentences), k=rng.randint(0, x.num_sentences))
            y = Summary(tuple(ids), 0)
            psi = joint_feature_map_pairwise(x, y, cfg, lam, ctx=ctx)
            assert psi.dot(w) == pytest.approx(score(x, y, scorer), abs=1e-9)

    def test_split_linearity(self, stopwords):
        rng = random.Random(11)
        cfg = FeatureConfig()
        for trial in range(20):
            docs = random_documents(rng, n_docs=2, sentences_per_doc=3)
            x = build_document_set(f"s{trial}", docs, stopwords)
            base = registry_for(cfg, "pairwise")
            reg = registry_for(cfg, "pairwise-split")
            w = self._random_w(rng, reg.dimension)
            w_cross, w_red = w[: base.dimension], w[base.dimension :]
            ctx = FeatureContext(x, cfg)
            scorer = SplitPairwiseScorer(
                lambda i, j: pairwise_features(x, i, j, cfg, ctx).dot(w_cross),
                lambda i, j: pairwise_features(x, i, j, cfg, ctx).dot(w_red),
                clamp_negative=False,
            )
            ids = rng.sample(range(x.num_sentences), k=rng.randint(0, x.num_sentences))
            y = Summary(tuple(ids), 0)
            psi = joint_feature_map_pairwise(x, y, cfg, lam=0.0, split=True, ctx=ctx)
            assert psi.dot(w) == pytest.approx(score(x, y, scorer), abs=1e-9)

    def test_coverage_linearity(self, stopwords):
        rng = random.Random(13)
        cfg = FeatureConfig()
        for trial in range(20):
            docs = random_documents(rng, n_docs=2, sentences_per_doc=3)
            x = build_document_set(f"c{trial}", docs, stopwords)
            reg = registry_for(cfg, "coverage")
            w = self._random_w(rng, reg.dimension)
            ctx = FeatureContext(x, cfg)
            scorer = CoverageScorer(
                lambda v: coverage_features(x, v, cfg, ctx).dot(w),
                clamp_negative=False,
            )
            ids = rng.sample(range(x.num_sentences), k=rng.randint(0, x.num_sentences))
            y = Summary(tuple(ids), 0)
            psi = joint_feature_map_coverage(x, y, cfg, ctx=ctx)
            assert psi.dot(w) == pytest.approx(score(x, y, scorer), abs=1e-9)

    def test_empty_summary_maps_to_zero(self, stopwords):
        x = two_doc_set(stopwords)
        cfg = FeatureConfig()
        assert len(joint_feature_map_pairwise(x, Summary.empty(), cfg, 4.0)) == 0
        assert len(joint_feature_map_coverage(x, Summary.empty(), cfg)) == 0


def test_tfidf_cosine_baseline_properties(stopwords):
    x = two_doc_set(stopwords)
    sigma = tfidf_cosine_fn(x)
    for i in range(x.num_sentences):
        for j in range(x.num_sentences):
            if i == j:
                continue
            v = sigma(i, j)
            assert 0.0 <= v <= 1.0 + 1e-12
            assert v == pytest.approx(sigma(j, i))


def test_greedy_runs_on_feature_scorer(stopwords):
    """End-to-end: features -> scorer -> greedy stays inside the budget."""
    x = two_doc_set(stopwords)
    scorer = PairwiseScorer(tfidf_cosine_fn(x), lam=4.0)
    from structsum.scoring import gain_state

    y = greedy_maximize(x, gain_state(x, scorer), cfg=GreedyConfig(budget_bytes=60))
    assert y.total_cost <= 60
