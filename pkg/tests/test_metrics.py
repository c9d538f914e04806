"""ROUGE, F1@k, and n-gram overlap against hand counts and brute force."""

import numpy as np
import pytest

from oracles import brute_force_lcs
from segtag.metrics import (
    EvalReport,
    evaluate_predictions,
    f1_at_k,
    lcs_length,
    ngram_overlap,
    render_sequence,
    report_table,
    rouge_f1,
    sequence_rouge,
)
from segtag.tokenizer import tokenize_text


def word_tok(s):
    return tokenize_text(s, "word")


class TestRougeF1:
    def test_identical_sequences_score_100(self):
        r1, r2, rl = rouge_f1(["a", "b", "c"], ["a", "b", "c"])
        assert (r1, r2, rl) == (100.0, 100.0, 100.0)

    def test_hand_derived_abc_abd(self):
        # unigram overlap 2 of 3 each side; bigram 1 of 2; LCS "a b" length 2
        r1, r2, rl = rouge_f1(["a", "b", "c"], ["a", "b", "d"])
        assert r1 == pytest.approx(66.7, abs=0.05)
        assert r2 == pytest.approx(50.0, abs=0.05)
        assert rl == pytest.approx(66.7, abs=0.05)

    def test_disjoint_sequences_score_0(self):
        assert rouge_f1(["a", "b"], ["c", "d"]) == (0.0, 0.0, 0.0)

    def test_empty_candidate(self):
        assert rouge_f1([], ["a"]) == (0.0, 0.0, 0.0)

    def test_clipped_multiset_counting(self):
        # candidate repeats "a" three times; reference has it once
        r1, _, _ = rouge_f1(["a", "a", "a"], ["a"])
        assert r1 == pytest.approx(100 * 2 * (1 / 3) * 1.0 / (1 / 3 + 1.0), abs=1e-9)

    def test_swap_of_candidate_and_reference_swaps_p_and_r(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = [str(x) for x in rng.integers(0, 5, size=rng.integers(1, 8))]
            b = [str(x) for x in rng.integers(0, 5, size=rng.integers(1, 8))]
            assert rouge_f1(a, b) == rouge_f1(b, a)  # F1 is symmetric under swap


class TestLcs:
    def test_dp_matches_brute_force_on_200_random_lists(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            a = [int(x) for x in rng.integers(0, 4, size=rng.integers(0, 11))]
            b = [int(x) for x in rng.integers(0, 4, size=rng.integers(0, 11))]
            assert lcs_length(a, b) == brute_force_lcs(a, b), f"a={a} b={b}"

    def test_known_cases(self):
        assert lcs_length(list("abcde"), list("ace")) == 3
        assert lcs_length([], [1, 2]) == 0


class TestSequenceRouge:
    def test_identical_lists(self):
        assert sequence_rouge(["x y"], ["x y"], word_tok) == (100.0, 100.0, 100.0)

    def test_farmers_market_case(self):
        r1, _, _ = sequence_rouge(["farmers market"], ["organic farmers market"], word_tok)
        assert r1 == pytest.approx(80.0, abs=0.05)

    def test_separator_joins_tags(self):
        assert render_sequence(["a b", "c"], word_tok) == ["a", "b", "#", "c"]

    def test_tag_order_affects_bigrams_across_separator(self):
        gold = ["a b", "c d"]
        same = sequence_rouge(["a b", "c d"], gold, word_tok)
        swapped = sequence_rouge(["c d", "a b"], gold, word_tok)
        assert same[1] == 100.0
        assert swapped[1] < 100.0  # bigrams across the boundary move
        assert swapped[0] == 100.0  # unigrams unaffected


class TestF1AtK:
    def test_partial_overlap(self):
        assert f1_at_k({"a", "b"}, {"a"}) == pytest.approx(2 / 3)

    def test_exact_match(self):
        assert f1_at_k({"a", "b"}, {"b", "a"}) == 1.0

    def test_disjoint(self):
        assert f1_at_k({"a"}, {"b"}) == 0.0

    def test_empty_prediction(self):
        assert f1_at_k(set(), {"a"}) == 0.0

    def test_empty_gold_rejected(self):
        with pytest.raises(ValueError, match="gold"):
            f1_at_k({"a"}, set())

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        universe = [f"t{i}" for i in range(8)]
        for _ in range(30):
            pred = set(rng.choice(universe, size=rng.integers(1, 5), replace=False))
            gold = set(rng.choice(universe, size=rng.integers(1, 5), replace=False))
            assert f1_at_k(pred, gold) == f1_at_k(set(sorted(pred)), set(sorted(gold)))


class TestNgramOverlap:
    def test_half_overlap(self):
        assert ngram_overlap(["a", "b"], ["a", "c"], 1) == 0.5

    def test_contiguous_subsequence_is_fully_covered(self):
        src = ["u", "v", "w", "x", "y"]
        gen = ["v", "w", "x"]
        for n in (1, 2, 3):
            assert ngram_overlap(gen, src, n) == 1.0

    def test_generated_shorter_than_n_is_zero(self):
        assert ngram_overlap(["a"], ["a", "b"], 2) == 0.0

    def test_distinct_gram_semantics(self):
        # repeated generated gram counted once
        assert ngram_overlap(["a", "a", "a"], ["a"], 1) == 1.0

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            ngram_overlap(["a"], ["a"], 0)


class TestCorpusReport:
    def _preds_golds(self):
        preds = [
            {"hashtags": ["a b"], "beam_hashtags": [["a b"], ["c"]]},
            {"hashtags": ["c"], "beam_hashtags": [["c"], ["c"]]},
        ]
        golds = [(["a b"], "a b text"), (["d"], "other words")]
        return preds, golds

    def test_report_fields(self):
        preds, golds = self._preds_golds()
        report = evaluate_predictions(preds, golds, word_tok)
        assert report.count == 2
        assert report.rouge1_f1 == pytest.approx((100.0 + 0.0) / 2)
        assert set(report.f1_at_k) == {1, 5}
        assert report.f1_at_k[1] == pytest.approx(0.5)  # first exact, second disjoint
        assert 0.0 <= report.ngram_overlap[1] <= 1.0

    def test_identical_predictions_score_perfect(self):
        preds = [{"hashtags": ["x", "y z"], "beam_hashtags": [["x", "y z"]]}]
        golds = [(["x", "y z"], "x y z body")]
        report = evaluate_predictions(preds, golds, word_tok)
        assert report.rouge1_f1 == 100.0
        assert report.f1_at_k[1] == 1.0
        assert report.f1_at_k[5] == 1.0

    def test_count_mismatch_rejected(self):
        with pytest.raises(ValueError, match="mismatch"):
            evaluate_predictions([{}], [], word_tok)

    def test_table_contains_headline_columns(self):
        preds, golds = self._preds_golds()
        table = report_table(evaluate_predictions(preds, golds, word_tok))
        for column in ("ROUGE-1", "ROUGE-2", "ROUGE-L", "F1@1", "F1@5"):
            assert column in table

    def test_round_trip_dict(self):
        preds, golds = self._preds_golds()
        report = evaluate_predictions(preds, golds, word_tok)
        d = report.to_dict()
        assert d["count"] == 2
        assert "1" in d["f1_at_k"] and "2" in d["ngram_overlap"]
