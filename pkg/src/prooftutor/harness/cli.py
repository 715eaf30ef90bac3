"""Command-line interface.

Exit codes are a stable scripting contract: 0 success, 1 validation or
domain error, 2 I/O or backend error.
"""

from __future__ import annotations

import concurrent.futures
import json
import sys
from pathlib import Path

import click

from .. import corpus as corpus_mod
from ..backends import AuthFailure, BackendUnavailable, EndpointConfig, RemoteChatBackend
from ..formula import ParseError, parse
from ..kg import (
    BuildBounds,
    build_kg,
    classify_step,
    default_config_for,
    load_kg,
    save_kg,
)
from ..metrics import bucket_report, report_to_csv, report_to_json, results_from_records, table_report
from ..pipeline import DialogueRecord, PipelineKind, run_pipeline
from ..rules import RuleId
from ..scripted import scripted_backends

DOMAIN_ERRORS = (
    corpus_mod.ValidationError,
    corpus_mod.SchemaError,
    ParseError,
    ValueError,
    KeyError,
)
IO_ERRORS = (OSError, BackendUnavailable, AuthFailure)

_KIND_ALIASES = {
    "tutor": PipelineKind.Tutor,
    "teacher": PipelineKind.Teacher,
    "judge": PipelineKind.Judge,
    "teacher-judge": PipelineKind.TeacherJudge,
    "teacherjudge": PipelineKind.TeacherJudge,
}


@click.group()
def main() -> None:
    """Proof-state knowledge graphs, step classification, and tutoring pipelines."""


def _run(fn) -> None:
    try:
        fn()
    except IO_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except DOMAIN_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)


def _load_kgs(manifest, kg_dir: Path) -> dict:
    kgs = {}
    for problem in manifest.problems:
        path = kg_dir / f"{problem.id}.kg.json"
        if not path.exists():
            raise FileNotFoundError(f"no graph for problem {problem.id!r} at {path}")
        kgs[problem.id] = load_kg(path)
    return kgs


@main.command("generate-corpus")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--seed", default=20230501, show_default=True)
@click.option("--states", "state_target", default=60, show_default=True)
def generate_corpus_cmd(out_dir: Path, seed: int, state_target: int) -> None:
    """Regenerate the synthetic corpus (problems.json, states.json)."""

    def go() -> None:
        from ..generator import generate_corpus

        manifest = generate_corpus(seed=seed, state_target=state_target)
        corpus_mod.save_corpus(manifest, out_dir)
        click.echo(f"wrote {len(manifest.problems)} problems, {len(manifest.states)} states to {out_dir}")

    _run(go)


@main.command("build-kg")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--problem", "only_problem", default=None, help="Build one problem id only.")
@click.option("--max-nodes", default=None, type=int, help="Override stored node cap.")
@click.option("--max-intermediates", default=None, type=int, help="Override stored depth cap.")
@click.option("--max-complexity", default=12.0, show_default=True)
@click.option("--rewrite-depth", default=2, show_default=True)
def build_kg_cmd(corpus_dir, out_dir: Path, only_problem, max_nodes, max_intermediates, max_complexity, rewrite_depth) -> None:
    """Build one knowledge graph per corpus problem and report stats."""

    def go() -> None:
        manifest = corpus_mod.load_corpus(corpus_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for problem in manifest.problems:
            if only_problem is not None and problem.id != only_problem:
                continue
            stored = manifest.build_bounds.get(problem.id, BuildBounds())
            bounds = BuildBounds(
                max_nodes=max_nodes if max_nodes is not None else stored.max_nodes,
                max_intermediates=max_intermediates
                if max_intermediates is not None
                else stored.max_intermediates,
            )
            config = default_config_for(
                problem, max_derived_complexity=max_complexity, rewrite_depth_limit=rewrite_depth
            )
            kg = build_kg(problem, config, bounds)
            save_kg(kg, out_dir / f"{problem.id}.kg.json")
            root_distance = kg.distances.get(kg.root)
            flags = []
            if kg.truncated:
                flags.append("truncated")
            if not kg.goal_reachable:
                flags.append("goal-unreachable")
            click.echo(
                f"{problem.id}: nodes={len(kg.nodes)} edges={len(kg.edges)} "
                f"root-distance={root_distance} {' '.join(flags)}".rstrip()
            )

    _run(go)


@main.command("summarize")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
def summarize_cmd(corpus_dir) -> None:
    """Per-level state counts and average statement counts."""

    def go() -> None:
        manifest = corpus_mod.load_corpus(corpus_dir)
        rows = corpus_mod.summarize(manifest)
        click.echo(f"{'level':>6} {'states':>7} {'avg stmts':>10} {'avg inter':>10}")
        for row in rows:
            click.echo(
                f"{row['level']:>6} {row['states']:>7} {row['avg_statements']:>10} "
                f"{row['avg_intermediates']:>10}"
            )

    _run(go)


@main.command("classify")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--kg", "kg_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--state", "state_id", required=True)
@click.option("--step", required=True)
@click.option("--rule", required=True)
@click.option("--parents", default="", help="Parent statements, ';'-separated.")
def classify_cmd(corpus_dir, kg_dir: Path, state_id, step, rule, parents) -> None:
    """Classify a proposed next step against a corpus state."""

    def go() -> None:
        manifest = corpus_mod.load_corpus(corpus_dir)
        matches = [cs for cs in manifest.states if cs.id == state_id]
        if not matches:
            raise KeyError(f"unknown state id {state_id!r}")
        cs = matches[0]
        kg = load_kg(kg_dir / f"{cs.state.problem.id}.kg.json")
        parent_formulas = [parse(p) for p in parents.split(";") if p.strip()]
        classification = classify_step(kg, cs.state, parse(step), RuleId(rule), parent_formulas)
        suffix = "justified" if classification.justified else "unjustified"
        click.echo(f"{classification.category.value}, {suffix}")
        click.echo(
            f"distance before={classification.distance_before} "
            f"after={classification.distance_after}"
        )

    _run(go)


def _backends_from_config(path: Path) -> dict:
    if path.suffix == ".toml":
        import tomli

        with open(path, "rb") as fh:
            doc = tomli.load(fh)
    else:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    temperature = doc.get("temperature", 0.0)
    backends = {}
    for role, cfg in doc["roles"].items():
        endpoint = EndpointConfig(
            base_url=cfg["base_url"],
            model=cfg["model"],
            credential_env=cfg.get("credential_env"),
            timeout_s=cfg.get("timeout_s", 60.0),
        )
        backends[role] = RemoteChatBackend(endpoint, temperature=temperature)
    return backends


def run_state_batch(cs, kg, backends, kinds: list[PipelineKind]) -> list[DialogueRecord]:
    """All requested pipelines over one state, reusing the student response
    and the upstream feedback exactly as the protocol prescribes."""
    records: list[DialogueRecord] = []
    cached_student = None
    tutor_feedback = None
    teacher_feedback = None
    for kind in (PipelineKind.Tutor, PipelineKind.Teacher, PipelineKind.Judge, PipelineKind.TeacherJudge):
        if kind not in kinds:
            continue
        cached_upstream = None
        if kind is PipelineKind.Judge:
            cached_upstream = tutor_feedback
        elif kind is PipelineKind.TeacherJudge:
            cached_upstream = teacher_feedback
        record = run_pipeline(
            kind,
            cs.state,
            kg,
            backends,
            cached_student=cached_student,
            cached_upstream_feedback=cached_upstream,
            state_id=cs.id,
        )
        records.append(record)
        if cached_student is None and record.student is not None:
            cached_student = record.student
        if kind is PipelineKind.Tutor and record.feedback is not None:
            tutor_feedback = record.feedback
        if kind is PipelineKind.Teacher and record.feedback is not None:
            teacher_feedback = record.feedback
    return records


@main.command("run")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--kg", "kg_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--pipelines", default="tutor,teacher,judge", show_default=True)
@click.option("--backend", default="scripted", show_default=True,
              help="'scripted' or a path to a backend config file.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--concurrency", default=1, show_default=True)
def run_cmd(corpus_dir, kg_dir: Path, pipelines, backend, out_path: Path, concurrency) -> None:
    """Run tutoring pipelines over every corpus state and write records."""

    def go() -> None:
        kinds = []
        for name in pipelines.split(","):
            name = name.strip().lower()
            if name not in _KIND_ALIASES:
                raise ValueError(f"unknown pipeline kind {name!r}")
            kinds.append(_KIND_ALIASES[name])
        manifest = corpus_mod.load_corpus(corpus_dir)
        kgs = _load_kgs(manifest, kg_dir)
        if backend == "scripted":
            agent_backends = scripted_backends()
        else:
            agent_backends = _backends_from_config(Path(backend))
        work = [(cs, kgs[cs.state.problem.id]) for cs in manifest.states]
        all_records: list[DialogueRecord] = []
        done = 0

        def note_progress() -> None:
            nonlocal done
            done += 1
            if done % 10 == 0 or done == len(work):
                click.echo(f"  {done}/{len(work)} states", err=True)

        if concurrency > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=concurrency) as pool:
                futures = [
                    pool.submit(run_state_batch, cs, kg, agent_backends, kinds) for cs, kg in work
                ]
                for future in futures:
                    all_records.extend(future.result())
                    note_progress()
        else:
            for cs, kg in work:
                all_records.extend(run_state_batch(cs, kg, agent_backends, kinds))
                note_progress()
        all_records.sort(key=lambda r: (r.state_id, r.pipeline.value))
        corpus_mod.save_records(all_records, out_path)
        failures = sum(r.failed for r in all_records)
        click.echo(
            f"wrote {len(all_records)} records ({len(manifest.states)} states x "
            f"{len(kinds)} pipelines) to {out_path}; failures={failures}"
        )

    _run(go)


@main.command("report")
@click.option("--records", "record_paths", required=True, multiple=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--out-prefix", default=None, type=click.Path(path_type=Path),
              help="Write <prefix>.csv/.json/.buckets.csv instead of stdout only.")
@click.option("--label", default="run", show_default=True)
def report_cmd(record_paths, out_prefix: Path | None, label) -> None:
    """Aggregate records into the headline metrics table and bucket table."""

    def go() -> None:
        records: list[DialogueRecord] = []
        for path in record_paths:
            records.extend(corpus_mod.load_records(path))
        by_pipeline = results_from_records(records)
        row = table_report(by_pipeline, label=label)
        csv_text = report_to_csv([row])
        click.echo(csv_text.rstrip("\n"))
        bucket_rows = []
        for kind, results in sorted(by_pipeline.items()):
            for b in bucket_report(results):
                bucket_rows.append(
                    {
                        "pipeline": kind,
                        "bucket": b.bucket,
                        "n": b.n,
                        "post_accuracy": None if b.post_accuracy is None else round(b.post_accuracy, 2),
                    }
                )
        click.echo(report_to_csv(bucket_rows).rstrip("\n"))
        if out_prefix is not None:
            out_prefix.parent.mkdir(parents=True, exist_ok=True)
            Path(f"{out_prefix}.csv").write_text(csv_text, encoding="utf-8")
            Path(f"{out_prefix}.json").write_text(report_to_json([row]), encoding="utf-8")
            Path(f"{out_prefix}.buckets.csv").write_text(report_to_csv(bucket_rows), encoding="utf-8")
            click.echo(f"wrote {out_prefix}.csv / .json / .buckets.csv")

    _run(go)


@main.command("serve")
@click.option("--corpus", "corpus_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--kg", "kg_dir", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--frontend", "frontend_dir", default=None, type=click.Path(path_type=Path),
              help="Static assets directory to serve at /.")
@click.option("--live-feedback", "live_feedback", default=None,
              help="'scripted' or a backend config path; default is template feedback.")
@click.option("--session-store", "session_store", default=None, type=click.Path(path_type=Path),
              help="JSON file mirroring live sessions across restarts.")
def serve_cmd(corpus_dir, kg_dir: Path, host, port, frontend_dir, live_feedback, session_store) -> None:
    """Serve the tutoring HTTP API (and optionally the frontend assets)."""

    def go() -> None:
        import uvicorn

        from .service import TutorEngine, create_app

        manifest = corpus_mod.load_corpus(corpus_dir)
        kgs = _load_kgs(manifest, kg_dir)
        feedback_backends = None
        if live_feedback == "scripted":
            feedback_backends = scripted_backends()
        elif live_feedback is not None:
            feedback_backends = _backends_from_config(Path(live_feedback))
        engine = TutorEngine(
            manifest,
            kgs,
            feedback_backends,
            session_store_path=str(session_store) if session_store else None,
        )
        app = create_app(engine, frontend_dir=str(frontend_dir) if frontend_dir else None)
        uvicorn.run(app, host=host, port=port, log_level="warning")

    _run(go)


if __name__ == "__main__":
    main()
