"""Corpus files: problems, proof states, and dialogue records.

problems.json and states.json describe the benchmark; records.jsonl holds
one serialized dialogue per line. Formulas are stored in canonical ascii
notation. Loading validates everything eagerly: formulas must parse,
every state's intermediates must re-justify prefix-closed, states must
reference existing problems, and duplicate state keys within a problem
are rejected. Downstream code never re-checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .formula import ParseError, parse, render
from .kg import BuildBounds, ProofProblem, ProofState
from .pipeline import DialogueRecord, record_from_dict, record_to_dict
from .rules import Derivation, RuleId

__all__ = [
    "CORPUS_FORMAT_VERSION",
    "SchemaError",
    "ValidationError",
    "CorpusState",
    "CorpusManifest",
    "load_corpus",
    "save_corpus",
    "summarize",
    "save_records",
    "load_records",
    "bundled_corpus_dir",
]

CORPUS_FORMAT_VERSION = 1


class SchemaError(ValueError):
    """Malformed document: bad JSON, missing fields, unparseable formulas."""


class ValidationError(ValueError):
    """Well-formed document with invalid content (unjustified steps, dangling ids)."""


@dataclass(frozen=True)
class CorpusState:
    id: str
    state: ProofState


@dataclass(frozen=True)
class CorpusManifest:
    problems: tuple[ProofProblem, ...]
    states: tuple[CorpusState, ...]
    build_bounds: dict

    def problem(self, problem_id: str) -> ProofProblem:
        for p in self.problems:
            if p.id == problem_id:
                return p
        raise KeyError(problem_id)

    def counts_per_level(self) -> dict:
        counts: dict[int, int] = {}
        for cs in self.states:
            counts[cs.state.problem.level] = counts.get(cs.state.problem.level, 0) + 1
        return counts


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SchemaError(f"{context}: missing field {key!r}")
    return obj[key]


def _parse_formula(text, context: str):
    if not isinstance(text, str):
        raise SchemaError(f"{context}: expected a formula string, got {text!r}")
    try:
        return parse(text)
    except ParseError as exc:
        raise SchemaError(f"{context}: {exc}") from exc


def _load_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def load_corpus(path) -> CorpusManifest:
    """Load problems.json and states.json from a corpus directory."""
    root = Path(path)
    problems_doc = _load_json(root / "problems.json")
    states_doc = _load_json(root / "states.json")
    for name, doc in (("problems.json", problems_doc), ("states.json", states_doc)):
        if doc.get("format_version") != CORPUS_FORMAT_VERSION:
            raise SchemaError(f"{name}: unsupported format_version {doc.get('format_version')!r}")

    problems: list[ProofProblem] = []
    bounds: dict[str, BuildBounds] = {}
    for i, p in enumerate(problems_doc.get("problems", [])):
        context = f"problems.json: problem {i}"
        pid = _require(p, "id", context)
        try:
            problem = ProofProblem(
                id=pid,
                premises=tuple(
                    _parse_formula(s, f"{context} ({pid}) premise {j}")
                    for j, s in enumerate(_require(p, "premises", context))
                ),
                conclusion=_parse_formula(_require(p, "conclusion", context), f"{context} ({pid}) conclusion"),
                level=_require(p, "level", context),
            )
        except ValueError as exc:
            if isinstance(exc, (SchemaError, ValidationError)):
                raise
            raise ValidationError(f"{context} ({pid}): {exc}") from exc
        if any(existing.id == pid for existing in problems):
            raise ValidationError(f"{context}: duplicate problem id {pid!r}")
        problems.append(problem)
        build = p.get("build")
        if build is not None:
            bounds[pid] = BuildBounds(
                max_nodes=build["max_nodes"], max_intermediates=build["max_intermediates"]
            )
    by_id = {p.id: p for p in problems}

    states: list[CorpusState] = []
    seen_keys: dict[tuple[str, frozenset], str] = {}
    seen_ids: set[str] = set()
    for i, s in enumerate(states_doc.get("states", [])):
        context = f"states.json: state {i}"
        sid = _require(s, "id", context)
        context = f"{context} ({sid})"
        if sid in seen_ids:
            raise ValidationError(f"{context}: duplicate state id")
        seen_ids.add(sid)
        problem_id = _require(s, "problem_id", context)
        if problem_id not in by_id:
            raise ValidationError(f"{context}: unknown problem id {problem_id!r}")
        intermediates = []
        for j, step in enumerate(_require(s, "intermediates", context)):
            step_context = f"{context} intermediate {j}"
            try:
                rule = RuleId(_require(step, "rule", step_context))
            except ValueError as exc:
                raise SchemaError(f"{step_context}: unknown rule {step['rule']!r}") from exc
            try:
                intermediates.append(
                    Derivation(
                        derived=_parse_formula(_require(step, "statement", step_context), step_context),
                        rule=rule,
                        parents=tuple(
                            _parse_formula(ps, f"{step_context} parent {k}")
                            for k, ps in enumerate(_require(step, "parents", step_context))
                        ),
                    )
                )
            except ValueError as exc:
                if isinstance(exc, (SchemaError, ValidationError)):
                    raise
                raise ValidationError(f"{step_context}: {exc}") from exc
        try:
            state = ProofState(by_id[problem_id], tuple(intermediates))
        except ValueError as exc:
            raise ValidationError(f"{context}: {exc}") from exc
        dup_key = (problem_id, state.key())
        if dup_key in seen_keys:
            raise ValidationError(
                f"{context}: duplicate proof state (same key as {seen_keys[dup_key]})"
            )
        seen_keys[dup_key] = sid
        states.append(CorpusState(sid, state))

    return CorpusManifest(tuple(problems), tuple(states), bounds)


def save_corpus(manifest: CorpusManifest, path) -> None:
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    problems = []
    for p in manifest.problems:
        doc = {
            "id": p.id,
            "level": p.level,
            "premises": [render(f) for f in p.premises],
            "conclusion": render(p.conclusion),
        }
        if p.id in manifest.build_bounds:
            b = manifest.build_bounds[p.id]
            doc["build"] = {"max_nodes": b.max_nodes, "max_intermediates": b.max_intermediates}
        problems.append(doc)
    states = [
        {
            "id": cs.id,
            "problem_id": cs.state.problem.id,
            "intermediates": [
                {
                    "statement": render(d.derived),
                    "rule": d.rule.value,
                    "parents": [render(p) for p in d.parents],
                }
                for d in cs.state.intermediates
            ],
        }
        for cs in manifest.states
    ]
    with open(root / "problems.json", "w", encoding="utf-8") as fh:
        json.dump({"format_version": CORPUS_FORMAT_VERSION, "problems": problems}, fh, indent=1)
        fh.write("\n")
    with open(root / "states.json", "w", encoding="utf-8") as fh:
        json.dump({"format_version": CORPUS_FORMAT_VERSION, "states": states}, fh, indent=1)
        fh.write("\n")


def summarize(manifest: CorpusManifest) -> list[dict]:
    """Per-level state counts and mean statement counts, plus a totals row.

    Average statements counts premises plus intermediates; the
    intermediates-only mean is reported alongside.
    """
    rows: list[dict] = []
    by_level: dict[int, list[ProofState]] = {}
    for cs in manifest.states:
        by_level.setdefault(cs.state.problem.level, []).append(cs.state)

    def mean(values: list[int]) -> float:
        return round(sum(values) / len(values), 2) if values else 0.0

    all_states = [cs.state for cs in manifest.states]
    for level in sorted(by_level):
        states = by_level[level]
        rows.append(
            {
                "level": level,
                "states": len(states),
                "avg_statements": mean(
                    [len(s.problem.premises) + len(s.intermediates) for s in states]
                ),
                "avg_intermediates": mean([len(s.intermediates) for s in states]),
            }
        )
    rows.append(
        {
            "level": "total",
            "states": len(all_states),
            "avg_statements": mean(
                [len(s.problem.premises) + len(s.intermediates) for s in all_states]
            ),
            "avg_intermediates": mean([len(s.intermediates) for s in all_states]),
        }
    )
    return rows


# ---------------------------------------------------------------------------
# Dialogue records (JSONL)
# ---------------------------------------------------------------------------

def save_records(records: list[DialogueRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), ensure_ascii=True, sort_keys=True))
            fh.write("\n")


def load_records(path) -> list[DialogueRecord]:
    records: list[DialogueRecord] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: line {lineno}: invalid JSON: {exc.msg}") from exc
            try:
                records.append(record_from_dict(doc))
            except (KeyError, ValueError) as exc:
                raise SchemaError(f"{path}: line {lineno}: {exc}") from exc
    return records


def bundled_corpus_dir() -> Path:
    """Directory of the synthetic corpus that ships with the package."""
    return Path(__file__).parent / "data"
