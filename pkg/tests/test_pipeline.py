import json

import httpx
import pytest

from prooftutor.backends import (
    AuthFailure,
    BackendUnavailable,
    EndpointConfig,
    RemoteChatBackend,
    ScriptedBackend,
    remote_chat_call,
)
from prooftutor.formula import parse
from prooftutor.kg import StepCategory
from prooftutor.pipeline import (
    MAX_SCHEMA_RETRIES,
    CorrectnessLabel,
    HintPacket,
    InformationLeak,
    JudgeAction,
    MalformedResponse,
    PipelineKind,
    parse_student_response,
    record_from_dict,
    record_to_dict,
    run_feedback,
    run_pipeline,
    run_student,
)
from prooftutor.prompts import (
    audit_tutor_messages,
    build_tutor_messages,
    payload_of,
)
from prooftutor.rules import Derivation, RuleId
from prooftutor.scripted import scripted_backends

from test_kg import ladder_state3


LADDER_STUDENT_JSON = json.dumps(
    {
        "CANDIDATES": [
            {"STEP": "M", "RATIONALE": "potentially useful toward the conclusion"},
            {"STEP": "(M * N)", "RATIONALE": "already derived; insufficient alone"},
        ],
        "REASONING": "applying one move to the conjunction reaches the target directly",
        "NEXT_STEP": "N",
        "RULE": "Simp",
        "PARENT_STATEMENTS": ["(M * N)"],
    }
)


def fixed_backend(text):
    return ScriptedBackend("fixed", lambda messages: text)


class TestStudent:
    def test_ladder_scripted_response(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        response, transcript = run_student(fixed_backend(LADDER_STUDENT_JSON), state)
        assert response.next_step == parse("N")
        assert response.rule is RuleId.Simp
        assert response.parents == (parse("(M * N)"),)
        assert transcript.retries == 0

    def test_empty_output_consumes_one_retry(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        calls = []

        def flaky(messages):
            calls.append(1)
            return "" if len(calls) == 1 else LADDER_STUDENT_JSON

        response, transcript = run_student(ScriptedBackend("flaky", flaky), state)
        assert transcript.retries == 1
        assert response.next_step == parse("N")

    def test_four_candidates_rejected(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        bad = json.loads(LADDER_STUDENT_JSON)
        bad["CANDIDATES"] = bad["CANDIDATES"] * 2
        with pytest.raises(MalformedResponse):
            run_student(fixed_backend(json.dumps(bad)), state)

    def test_unknown_field_rejected(self):
        bad = json.loads(LADDER_STUDENT_JSON)
        bad["EXTRA"] = 1
        with pytest.raises(Exception):
            parse_student_response(json.dumps(bad))

    def test_retry_ceiling(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        calls = []

        def always_bad(messages):
            calls.append(1)
            return "not json"

        with pytest.raises(MalformedResponse):
            run_student(ScriptedBackend("bad", always_bad), state)
        assert len(calls) == MAX_SCHEMA_RETRIES + 1


class TestHintPackets:
    def test_tutor_packet_withholds(self, ladder_kg, ladder_problem):
        d = Derivation(parse("N"), RuleId.Simp, (parse("(M * N)"),))
        packet = HintPacket.for_tutor(d)
        assert packet.withheld
        full = HintPacket.full(d)
        assert full.rule is RuleId.Simp

    def test_tutor_prompt_contains_hint_only(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        student, _ = run_student(fixed_backend(LADDER_STUDENT_JSON), state)
        messages = build_tutor_messages(state, student, parse("N"))
        payload = payload_of(messages)
        assert payload["HINT"] == {"NEXT_STEP": "N"}
        assert "RULE" not in payload["STUDENT_RESPONSE"]
        optimal = Derivation(parse("N"), RuleId.Simp, (parse("(M * N)"),))
        assert audit_tutor_messages(messages, optimal) == []

    def test_run_feedback_rejects_full_packet_for_tutor(self, ladder_problem):
        state = ladder_state3(ladder_problem)
        student, _ = run_student(fixed_backend(LADDER_STUDENT_JSON), state)
        full = HintPacket.full(Derivation(parse("N"), RuleId.Simp, (parse("(M * N)"),)))
        with pytest.raises(InformationLeak):
            run_feedback("tutor", scripted_backends()["tutor"], state, student, full)


class TestScriptedPipelines:
    def test_ladder_tutor_run(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = scripted_backends()
        record = run_pipeline(PipelineKind.Tutor, state, ladder_kg, backends)
        assert not record.failed
        assert record.hint.withheld
        assert record.optimal_rule is RuleId.Simp
        assert record.pre_classification is not None

    def test_judge_reuses_cached_student_and_feedback(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = scripted_backends()
        tutor_record = run_pipeline(PipelineKind.Tutor, state, ladder_kg, backends)
        judge_record = run_pipeline(
            PipelineKind.Judge,
            state,
            ladder_kg,
            backends,
            cached_student=tutor_record.student,
            cached_upstream_feedback=tutor_record.feedback,
        )
        assert judge_record.student.raw == tutor_record.student.raw
        assert judge_record.feedback.raw == tutor_record.feedback.raw
        assert judge_record.judge is not None
        roles = [t.role for t in judge_record.transcripts]
        assert "student" not in roles and "tutor" not in roles

    def test_correct_label_skips_revision(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = dict(scripted_backends())
        backends["student"] = fixed_backend(LADDER_STUDENT_JSON)  # optimal, correctly justified
        record = run_pipeline(PipelineKind.Teacher, state, ladder_kg, backends)
        assert record.feedback.correctness_label is CorrectnessLabel.Correct
        assert record.revision is None
        assert record.post_classification == record.pre_classification

    def test_revision_gating(self, ladder_kg, ladder_problem, manifest, corpus_kgs):
        backends = scripted_backends()
        checked = 0
        for cs in manifest.states[:12]:
            kg = corpus_kgs[cs.state.problem.id]
            for kind in (PipelineKind.Tutor, PipelineKind.Teacher, PipelineKind.Judge):
                record = run_pipeline(kind, cs.state, kg, backends, state_id=cs.id)
                assert not record.failed, record.error
                if record.judge is not None:
                    label = record.judge.correctness_label
                else:
                    label = record.feedback.correctness_label
                assert (record.revision is not None) == (label is not CorrectnessLabel.Correct)
                checked += 1
        assert checked == 36

    def test_teacher_judge_ablation(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = scripted_backends()
        teacher_record = run_pipeline(PipelineKind.Teacher, state, ladder_kg, backends)
        ablation = run_pipeline(
            PipelineKind.TeacherJudge,
            state,
            ladder_kg,
            backends,
            cached_student=teacher_record.student,
            cached_upstream_feedback=teacher_record.feedback,
        )
        assert ablation.judge is not None
        assert ablation.feedback.raw == teacher_record.feedback.raw

    def test_determinism(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = scripted_backends()
        a = run_pipeline(PipelineKind.Judge, state, ladder_kg, backends)
        b = run_pipeline(PipelineKind.Judge, state, ladder_kg, backends)
        assert record_to_dict(a) == record_to_dict(b)

    def test_failure_records_partial_progress(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = dict(scripted_backends())
        backends["student"] = fixed_backend("garbage")
        record = run_pipeline(PipelineKind.Tutor, state, ladder_kg, backends)
        assert record.failed
        assert record.review_flagged
        assert "MalformedResponse" in record.error
        assert record.student is None

    def test_record_round_trip(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        record = run_pipeline(PipelineKind.Judge, state, ladder_kg, scripted_backends())
        doc = record_to_dict(record)
        clone = record_from_dict(json.loads(json.dumps(doc)))
        assert record_to_dict(clone) == doc


class TestJudgeScenarios:
    def test_override_on_wrong_rule_echo(self, ladder_kg, ladder_problem):
        """Student names the right statement with the wrong rule; the tutor
        validates it anyway and the judge overrides."""
        state = ladder_state3(ladder_problem)
        wrong_rule = json.loads(LADDER_STUDENT_JSON)
        wrong_rule["RULE"] = "MP"
        backends = dict(scripted_backends())
        backends["student"] = fixed_backend(json.dumps(wrong_rule))
        record = run_pipeline(PipelineKind.Judge, state, ladder_kg, backends)
        assert record.pre_classification.category is StepCategory.Optimal
        assert not record.pre_classification.justified
        assert record.feedback.correctness_label is CorrectnessLabel.Correct  # echo failure
        assert record.judge.judge_action is JudgeAction.Overridden

    def test_enhanced_when_upstream_agrees(self, ladder_kg, ladder_problem):
        state = ladder_state3(ladder_problem)
        backends = dict(scripted_backends())
        backends["student"] = fixed_backend(LADDER_STUDENT_JSON)
        record = run_pipeline(PipelineKind.Judge, state, ladder_kg, backends)
        assert record.judge.judge_action is JudgeAction.Enhanced


class TestRemoteChat:
    def endpoint(self, **kw):
        defaults = dict(
            base_url="https://llm.example/v1",
            model="demo-model",
            credential_env=None,
            backoff_base_s=0.0,
        )
        defaults.update(kw)
        return EndpointConfig(**defaults)

    def test_fixture_replay(self):
        stored = {"choices": [{"message": {"content": "stored reply"}}]}

        def handler(request):
            body = json.loads(request.content)
            assert body["temperature"] == 0.0
            assert body["model"] == "demo-model"
            return httpx.Response(200, json=stored)

        transport = httpx.MockTransport(handler)
        out = remote_chat_call(self.endpoint(), [{"role": "user", "content": "hi"}], transport=transport)
        assert out == "stored reply"

    def test_timeout_exhausts_to_backend_unavailable(self):
        def handler(request):
            raise httpx.ConnectTimeout("slow")

        transport = httpx.MockTransport(handler)
        with pytest.raises(BackendUnavailable):
            remote_chat_call(self.endpoint(), [], transport=transport)

    def test_transient_500_then_success(self):
        calls = []

        def handler(request):
            calls.append(1)
            if len(calls) < 3:
                return httpx.Response(502, text="bad gateway")
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        out = remote_chat_call(self.endpoint(), [], transport=httpx.MockTransport(handler))
        assert out == "ok"
        assert len(calls) == 3

    def test_auth_failure_no_retry(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, text="no")

        with pytest.raises(AuthFailure):
            remote_chat_call(self.endpoint(), [], transport=httpx.MockTransport(handler))
        assert len(calls) == 1

    def test_missing_credential_fails_before_any_call(self, monkeypatch):
        monkeypatch.delenv("DEMO_KEY", raising=False)
        with pytest.raises(AuthFailure):
            RemoteChatBackend(self.endpoint(credential_env="DEMO_KEY"))

    def test_backend_uses_bearer_token(self, monkeypatch):
        monkeypatch.setenv("DEMO_KEY", "sekret")

        def handler(request):
            assert request.headers["Authorization"] == "Bearer sekret"
            return httpx.Response(200, json={"choices": [{"message": {"content": "ok"}}]})

        backend = RemoteChatBackend(
            self.endpoint(credential_env="DEMO_KEY"), transport=httpx.MockTransport(handler)
        )
        assert backend.complete([{"role": "user", "content": "x"}]) == "ok"
