from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hptune.prompt import (
    INPUT_HEADER,
    RESPONSE_HEADER,
    ParseError,
    PromptError,
    PromptTemplate,
    RelevanceClass,
    TemplateError,
    classify_relevance,
    format_learning_rate,
    load_template,
    parse_response,
    relevance_rate,
    render_query,
    render_training_example,
)
from hptune.space import default_search_space

from conftest import make_record

MODEL_CODE = "class Net(Module):\n    def forward(self, x):\n        return self.head(self.body(x))\n"


def response_section(document: str) -> str:
    return document.split(RESPONSE_HEADER, 1)[1]


class TestRenderTrainingExample:
    def test_sections_appear_once_in_order(self):
        record = make_record(0.7365, lr=0.01, momentum=0.9, batch=32)
        doc = render_training_example(record, MODEL_CODE, PromptTemplate())
        assert doc.count(INPUT_HEADER) == 1
        assert doc.count(RESPONSE_HEADER) == 1
        assert doc.index(INPUT_HEADER) < doc.index(RESPONSE_HEADER)
        assert doc.startswith(PromptTemplate().system_prompt)

    def test_embeds_code_and_four_decimal_accuracy(self):
        record = make_record(0.7365)
        doc = render_training_example(record, MODEL_CODE, PromptTemplate())
        assert MODEL_CODE in doc
        assert "0.7365" in doc

    def test_round_trip_through_parse(self):
        record = make_record(0.5, lr=0.0121, momentum=0.92, batch=32)
        doc = render_training_example(record, MODEL_CODE, PromptTemplate())
        parsed = parse_response(response_section(doc))
        assert parsed.params.learning_rate == pytest.approx(0.0121, rel=1e-10)
        assert parsed.params.momentum == pytest.approx(0.92, abs=1e-4)
        assert parsed.params.batch_size == 32

    def test_full_document_classifies_relevant(self):
        record = make_record(0.5, lr=0.0121, momentum=0.92, batch=32)
        doc = render_training_example(record, MODEL_CODE, PromptTemplate())
        assert classify_relevance(doc, default_search_space()) is RelevanceClass.RELEVANT

    def test_empty_model_code_rejected(self):
        with pytest.raises(PromptError):
            render_training_example(make_record(0.5), "", PromptTemplate())

    def test_missing_placeholder_is_template_error(self):
        template = PromptTemplate(response_body_template="learning rate: {learning_rate}")
        with pytest.raises(TemplateError):
            render_training_example(make_record(0.5), MODEL_CODE, template)


class TestLearningRateFormat:
    def test_positional_notation(self):
        assert format_learning_rate(0.0001) == "0.0001"
        assert format_learning_rate(0.01) == "0.01"
        assert format_learning_rate(1.0) == "1"

    def test_ten_significant_digits(self):
        assert format_learning_rate(0.0123456789123) == "0.01234567891"
        assert format_learning_rate(0.333333333333333) == "0.3333333333"


class TestRenderQuery:
    def test_ends_right_after_response_header(self):
        doc = render_query(MODEL_CODE, 0.75, PromptTemplate())
        assert doc.endswith(RESPONSE_HEADER + "\n")

    def test_pure_function(self):
        a = render_query(MODEL_CODE, 0.5, PromptTemplate())
        b = render_query(MODEL_CODE, 0.5, PromptTemplate())
        assert a == b

    def test_target_bounds(self):
        render_query(MODEL_CODE, 1.0, PromptTemplate())
        with pytest.raises(PromptError):
            render_query(MODEL_CODE, 0.0, PromptTemplate())
        with pytest.raises(PromptError):
            render_query(MODEL_CODE, 1.2, PromptTemplate())


class TestParseResponse:
    def test_plain_labels(self):
        parsed = parse_response("learning rate: 0.0121, momentum: 0.92, batch size: 32")
        assert parsed.params.learning_rate == 0.0121
        assert parsed.params.momentum == 0.92
        assert parsed.params.batch_size == 32

    def test_aliases_and_scientific_notation(self):
        parsed = parse_response("lr = 1e-3\nmomentum = 0.85\nbatch = 16")
        assert parsed.params.learning_rate == pytest.approx(0.001)
        assert parsed.params.momentum == 0.85
        assert parsed.params.batch_size == 16

    def test_is_separator(self):
        parsed = parse_response("the learning rate is 0.02, momentum is 0.8 and the batch size is 8")
        assert parsed.params.learning_rate == 0.02
        assert parsed.params.batch_size == 8

    def test_prose_without_numbers_fails(self):
        with pytest.raises(ParseError) as exc_info:
            parse_response("use a small learning rate and large batches")
        assert set(exc_info.value.missing) == {"learning_rate", "momentum", "batch_size"}

    def test_partial_fields_reported(self):
        with pytest.raises(ParseError) as exc_info:
            parse_response("learning rate: 0.01 and momentum: 0.9, batch size unknown")
        assert exc_info.value.missing == ("batch_size",)
        assert set(exc_info.value.found) == {"learning_rate", "momentum"}

    def test_first_match_wins(self):
        parsed = parse_response(
            "learning rate: 0.01, momentum: 0.9, batch size: 16\n"
            "learning rate: 0.5, momentum: 0.1, batch size: 64"
        )
        assert parsed.params.learning_rate == 0.01
        assert parsed.params.batch_size == 16

    def test_extraction_spans_cover_the_numbers(self):
        text = "lr = 1e-3\nmomentum = 0.85\nbatch = 16"
        parsed = parse_response(text)
        for field, (start, end) in parsed.extraction_spans.items():
            assert 0 <= start < end <= len(text)
        assert text[slice(*parsed.extraction_spans["learning_rate"])] == "1e-3"

    @settings(max_examples=300)
    @given(st.text(max_size=200))
    def test_never_crashes_on_arbitrary_text(self, text):
        try:
            parse_response(text)
        except ParseError:
            pass


class TestClassifyRelevance:
    SPACE = default_search_space()

    def test_in_range_is_relevant(self):
        text = "learning rate: 0.01, momentum: 0.9, batch size: 16"
        assert classify_relevance(text, self.SPACE) is RelevanceClass.RELEVANT

    def test_zero_batch(self):
        text = "learning rate: 0.01, momentum: 0.9, batch size: 0"
        assert classify_relevance(text, self.SPACE) is RelevanceClass.ZERO_BATCH

    def test_zero_batch_takes_precedence_over_out_of_range(self):
        text = "learning rate: 5.0, momentum: 0.9, batch size: 0"
        assert classify_relevance(text, self.SPACE) is RelevanceClass.ZERO_BATCH

    def test_out_of_range_learning_rate(self):
        text = "learning rate: 5.0, momentum: 0.9, batch size: 32"
        assert classify_relevance(text, self.SPACE) is RelevanceClass.OUT_OF_RANGE

    def test_non_member_batch(self):
        text = "learning rate: 0.01, momentum: 0.9, batch size: 7"
        assert classify_relevance(text, self.SPACE) is RelevanceClass.OUT_OF_RANGE

    def test_missing_numeric(self):
        assert classify_relevance("tune it well", self.SPACE) is RelevanceClass.MISSING_NUMERIC

    def test_deterministic_and_total(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            text = "".join(chr(int(c)) for c in rng.integers(32, 1000, size=int(rng.integers(0, 80))))
            assert classify_relevance(text, self.SPACE) is classify_relevance(text, self.SPACE)


class TestRelevanceRate:
    def test_matches_published_arithmetic(self):
        classes = [RelevanceClass.RELEVANT] * 1006 + [RelevanceClass.MISSING_NUMERIC] * 1974
        assert relevance_rate(classes) == pytest.approx(0.337584, abs=1e-6)

    def test_all_and_none(self):
        assert relevance_rate([RelevanceClass.RELEVANT] * 5) == 1.0
        assert relevance_rate([RelevanceClass.ZERO_BATCH] * 5) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(PromptError):
            relevance_rate([])


class TestTemplateFile:
    def test_load_overrides(self, tmp_path):
        path = tmp_path / "template.json"
        path.write_text(
            '{"system_prompt": "Recommend settings.", '
            '"input_body_template": "target {target_accuracy}\\n{model_code}", '
            '"response_body_template": "lr {learning_rate} momentum {momentum} batch {batch_size}"}'
        )
        template = load_template(path)
        doc = render_training_example(make_record(0.5), MODEL_CODE, template)
        assert doc.startswith("Recommend settings.")

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "template.json"
        path.write_text('{"system": "x"}')
        with pytest.raises(TemplateError):
            load_template(path)
