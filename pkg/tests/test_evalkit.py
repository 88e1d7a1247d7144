import json
import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from calltriage.evalkit import (
    ConfusionMatrix,
    LengthMismatch,
    ParseError,
    bleu,
    conceptual_precision,
    confusion_and_scores,
    rouge_l,
    rouge_n,
    run_report,
)
from calltriage.textproc import tokenize

words = st.lists(st.sampled_from("the cat sat on mat dog ran fast home now".split()), min_size=1, max_size=20)


def brute_force_ngram_overlap(cand, ref, n):
    """Independent counting oracle: enumerate and clip by hand."""
    ctoks, rtoks = tokenize(cand), tokenize(ref)
    cgrams = [tuple(ctoks[i : i + n]) for i in range(len(ctoks) - n + 1)]
    rgrams = [tuple(rtoks[i : i + n]) for i in range(len(rtoks) - n + 1)]
    cc, rc = Counter(cgrams), Counter(rgrams)
    overlap = sum(min(cc[g], rc[g]) for g in cc)
    return overlap, len(cgrams), len(rgrams)


def brute_force_lcs(a, b):
    """Exponential-free but independent DP over prefixes, row-major."""
    ta, tb = tokenize(a), tokenize(b)
    table = [[0] * (len(tb) + 1) for _ in range(len(ta) + 1)]
    for i in range(1, len(ta) + 1):
        for j in range(1, len(tb) + 1):
            if ta[i - 1] == tb[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[-1][-1]


class TestBleu:
    def test_identity_is_one(self):
        text = "the cat sat on the mat"
        assert bleu(text, [text]) == pytest.approx(1.0)

    def test_zero_overlap_is_near_zero(self):
        assert bleu("alpha beta gamma delta", ["one two three four"]) <= 1e-6

    def test_hand_computed_brevity_example(self):
        # precisions 1,1,1 for n=1..3; brevity exp(1 - 6/3) = e^-1
        score = bleu("the cat sat", ["the cat sat on the mat"], max_n=3)
        assert score == pytest.approx(math.exp(-1), abs=1e-4)

    def test_empty_candidate_is_zero(self):
        assert bleu("", ["reference"]) == 0.0

    def test_no_references_rejected(self):
        with pytest.raises(ValueError):
            bleu("text", [])

    def test_clipping_limits_repeats(self):
        # candidate repeats 'the' 4x; reference has it twice -> clipped 2/4
        score_rep = bleu("the the the the", ["the cat the mat"], max_n=1)
        assert score_rep == pytest.approx(0.5)

    def test_multiple_references_use_closest_length(self):
        # closest reference length to c=2 is 2 -> no brevity penalty
        assert bleu("a b", ["a b", "a b c d e"], max_n=2) == pytest.approx(1.0)

    @given(words)
    def test_identity_property(self, tokens):
        text = " ".join(tokens)
        score = bleu(text, [text])
        if len(tokens) >= 4:
            assert score == pytest.approx(1.0)
        assert 0.0 <= score <= 1.0

    @given(words, words)
    def test_bounds(self, a, b):
        assert 0.0 <= bleu(" ".join(a), [" ".join(b)]) <= 1.0


class TestRouge:
    def test_identical_texts(self):
        assert rouge_n("a b c", "a b c", 1) == (1.0, 1.0, 1.0)
        assert rouge_l("a b c", "a b c") == (1.0, 1.0, 1.0)

    def test_reported_triple_relation(self):
        # p=0.5, r=1.0 -> f = 2*0.5*1/(1.5) = 0.6667
        p, r = 0.5, 1.0
        assert 2 * p * r / (p + r) == pytest.approx(0.6667, abs=1e-4)

    def test_hand_computed_unigram(self):
        score = rouge_n("a b c", "a c", 1)
        assert score.precision == pytest.approx(2 / 3)
        assert score.recall == pytest.approx(1.0)
        assert score.f == pytest.approx(0.8)

    def test_empty_strings_are_zero(self):
        assert rouge_n("", "abc", 1) == (0.0, 0.0, 0.0)
        assert rouge_l("abc", "") == (0.0, 0.0, 0.0)

    def test_lcs_scores(self):
        # lcs("a x b y c", "a b c") = 3
        score = rouge_l("a x b y c", "a b c")
        assert score.precision == pytest.approx(3 / 5)
        assert score.recall == pytest.approx(1.0)

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            rouge_n("a", "a", 0)

    @given(words, words, st.integers(1, 3))
    def test_matches_counting_oracle(self, a, b, n):
        cand, ref = " ".join(a), " ".join(b)
        overlap, ctotal, rtotal = brute_force_ngram_overlap(cand, ref, n)
        score = rouge_n(cand, ref, n)
        assert score.precision == pytest.approx(overlap / ctotal if ctotal else 0.0)
        assert score.recall == pytest.approx(overlap / rtotal if rtotal else 0.0)

    @given(words, words)
    def test_lcs_matches_oracle(self, a, b):
        cand, ref = " ".join(a), " ".join(b)
        lcs = brute_force_lcs(cand, ref)
        score = rouge_l(cand, ref)
        assert score.precision == pytest.approx(lcs / len(tokenize(cand)))
        assert score.recall == pytest.approx(lcs / len(tokenize(ref)))

    @given(words, words, st.integers(1, 3))
    def test_symmetry_and_f_relation(self, a, b, n):
        cand, ref = " ".join(a), " ".join(b)
        forward = rouge_n(cand, ref, n)
        backward = rouge_n(ref, cand, n)
        assert forward.precision == backward.recall
        assert forward.recall == backward.precision
        if forward.precision + forward.recall > 0:
            expected_f = (
                2 * forward.precision * forward.recall / (forward.precision + forward.recall)
            )
            assert abs(forward.f - expected_f) < 1e-9


class TestConceptualPrecision:
    def test_all_primary_terms_present(self):
        concepts = {"fire": [], "smoke": []}
        assert conceptual_precision("fire and smoke everywhere", concepts) == 1.0

    def test_smoke_fixture_full_coverage(self):
        concepts = {"fire": ["fire", "blaze"], "smoke": ["smoke"]}
        prediction = "reporting a fire in a building with smoke coming from it"
        assert conceptual_precision(prediction, concepts) == 1.0

    def test_half_coverage(self):
        concepts = {"fire": [], "victim-count": ["three people", "3 people"]}
        assert conceptual_precision("there is a fire", concepts) == 0.5

    def test_synonym_matches(self):
        assert conceptual_precision("the blaze spread", {"fire": ["blaze"]}) == 1.0

    def test_multiword_form_is_contiguous(self):
        concepts = {"location": ["west street"]}
        assert conceptual_precision("on west street now", concepts) == 1.0
        assert conceptual_precision("west of the street", concepts) == 0.0

    def test_whole_token_only(self):
        assert conceptual_precision("firefighters arrived", {"fire": []}) == 0.0

    def test_empty_concepts_rejected(self):
        with pytest.raises(ValueError):
            conceptual_precision("text", {})


class TestConfusion:
    def test_perfect_predictions(self):
        gold = ["Mild", "Moderate", "Severe"] * 3
        matrix, scores = confusion_and_scores(gold, gold)
        assert matrix.counts == [[3, 0, 0], [0, 3, 0], [0, 0, 3]]
        for cs in scores.values():
            assert (cs.precision, cs.recall, cs.f1) == (1.0, 1.0, 1.0)

    def test_reported_ratio_rows(self):
        # Mild 4/5 with one drifting to Moderate; Moderate 3/3;
        # Severe 10/13 with three drifting to Moderate
        gold = ["Mild"] * 5 + ["Moderate"] * 3 + ["Severe"] * 13
        pred = (
            ["Mild"] * 4 + ["Moderate"]
            + ["Moderate"] * 3
            + ["Severe"] * 10 + ["Moderate"] * 3
        )
        matrix, scores = confusion_and_scores(gold, pred)
        assert scores["Mild"].recall == pytest.approx(0.800, abs=1e-3)
        assert scores["Moderate"].recall == pytest.approx(1.000, abs=1e-3)
        assert scores["Severe"].recall == pytest.approx(0.769, abs=1e-3)
        assert matrix.total == 21

    def test_zero_denominator_is_undefined_not_zero(self):
        matrix, scores = confusion_and_scores(["Mild"], ["Moderate"])
        assert scores["Severe"].precision is None
        assert scores["Severe"].recall is None
        assert scores["Moderate"].precision == 0.0  # predicted but never true... denominator 1

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            confusion_and_scores(["Mild"], [])

    @given(
        st.lists(
            st.tuples(
                st.sampled_from(["Mild", "Moderate", "Severe"]),
                st.sampled_from(["Mild", "Moderate", "Severe"]),
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_totals_and_recall_identity(self, pairs):
        gold = [g for g, _ in pairs]
        pred = [p for _, p in pairs]
        matrix, scores = confusion_and_scores(gold, pred)
        assert matrix.total == len(pairs)
        for i, label in enumerate(matrix.labels):
            row_sum = sum(matrix.counts[i])
            if row_sum:
                assert scores[label].recall == matrix.counts[i][i] / row_sum


class TestRunReport:
    def write_cases(self, path, rows, level=True):
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["case_id", "text", "level"] if level else ["case_id", "text"])
            w.writerows(rows)

    def test_identical_files_score_one(self, tmp_path):
        rows = [["c1", "the cat sat on the mat", "Mild"], ["c2", "fire in the building now", "Severe"]]
        self.write_cases(tmp_path / "gold.csv", rows)
        self.write_cases(tmp_path / "pred.csv", rows)
        report, matrix = run_report(tmp_path / "pred.csv", tmp_path / "gold.csv")
        assert all(r.bleu == pytest.approx(1.0) for r in report.rows)
        assert all(r.rouge1.f == pytest.approx(1.0) for r in report.rows)
        assert matrix is not None and matrix.total == 2

    def test_empty_case_list_marks_aggregates_undefined(self, tmp_path):
        self.write_cases(tmp_path / "gold.csv", [])
        self.write_cases(tmp_path / "pred.csv", [])
        report, matrix = run_report(tmp_path / "pred.csv", tmp_path / "gold.csv")
        assert report.rows == []
        assert report.aggregates["bleu"] is None
        assert matrix is None

    def test_table_fixture_has_19_cases(self, tmp_path, service_config):
        from calltriage.config import packaged_data_dir

        eval_dir = packaged_data_dir() / "eval"
        report, matrix = run_report(
            eval_dir / "table_cases_pred.csv",
            eval_dir / "table_cases_gold.csv",
            eval_dir / "table_cases_concepts.json",
            out_json=tmp_path / "report.json",
            out_csv=tmp_path / "report.csv",
        )
        assert len(report.rows) == 19
        # the predictions cover every gold concept, as reported
        assert all(r.conceptual_precision == 1.0 for r in report.rows)
        assert matrix is not None
        payload = json.loads((tmp_path / "report.json").read_text())
        assert len(payload["cases"]) == 19 and "confusion" in payload

    def test_missing_prediction_is_parse_error(self, tmp_path):
        self.write_cases(tmp_path / "gold.csv", [["c1", "a", "Mild"]])
        self.write_cases(tmp_path / "pred.csv", [["other", "a", "Mild"]])
        with pytest.raises(ParseError):
            run_report(tmp_path / "pred.csv", tmp_path / "gold.csv")

    def test_bad_level_reports_line(self, tmp_path):
        self.write_cases(tmp_path / "gold.csv", [["c1", "a", "Extreme"]])
        self.write_cases(tmp_path / "pred.csv", [["c1", "a", "Mild"]])
        with pytest.raises(ParseError) as err:
            run_report(tmp_path / "pred.csv", tmp_path / "gold.csv")
        assert err.value.line == 2

    def test_report_deterministic(self, tmp_path):
        rows = [["c1", "some text here", "Mild"], ["c2", "other words", "Severe"]]
        self.write_cases(tmp_path / "gold.csv", rows)
        self.write_cases(tmp_path / "pred.csv", [["c1", "some text", "Mild"], ["c2", "other", "Moderate"]])
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        run_report(tmp_path / "pred.csv", tmp_path / "gold.csv", out_json=out1)
        run_report(tmp_path / "pred.csv", tmp_path / "gold.csv", out_json=out2)
        assert out1.read_bytes() == out2.read_bytes()
