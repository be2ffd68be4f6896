"""Run configuration, benchmark generation, evaluation runs and report assembly."""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping

from . import __version__, synthetic
from .analysis import (
    aggregate,
    deployment_stats,
    emit_report,
    error_distribution,
    leaderboards,
)
from .environment import open_session
from .gateway import (
    GatewayError,
    GenerationParams,
    ModelKind,
    ModelRef,
    ScriptedModel,
    Transport,
    canonical_json,
    read_script,
)
from .knowledge import Domain, KnowledgeBase, KnowledgeError, load_knowledge_base
from .scoring import CaseResult, score_trace
from .taskgen import (
    TASKS,
    QuestionTemplate,
    Source,
    TaskGenError,
    TestCase,
    build_pool,
    dump_cases,
    load_existing,
    load_templates,
    sample_test_set,
)
from .workflows import (
    InfeasibleSystem,
    Limits,
    SystemConfig,
    Workflow,
    feasible_systems,
    model_client,
    one_shot_example,
    run_workflow,
)
from .workflows.base import DEFAULT_ROSTER
from .workflows.prompts import resolve_prompt_dir

log = logging.getLogger(__name__)

# keys that change where or how fast a run happens, not what it computes
_NON_SEMANTIC = ("output_dir", "parallelism", "cache_dir")


class ConfigError(Exception):
    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


def _data(*parts: str) -> Path:
    return Path(str(resources.files("ragharness").joinpath("data", *parts)))


def default_fixture(domain: str) -> Path:
    return _data("fixtures", f"mini_{domain}.jsonl")


def default_templates(domain: str) -> Path:
    return _data("templates", f"{domain}.jsonl")


@dataclass
class RunConfig:
    domains: list[str] = field(default_factory=lambda: ["aminer", "wiki"])
    tasks: list[str] | None = None
    systems: Any = "all-feasible"
    workflows: list[str] = field(default_factory=lambda: [w.value for w in Workflow])
    roster: list[str] = field(default_factory=lambda: list(DEFAULT_ROSTER))
    models: dict[str, dict] = field(default_factory=dict)
    fixtures: dict[str, str] = field(default_factory=dict)
    templates: dict[str, str] = field(default_factory=dict)
    existing: dict[str, str] = field(default_factory=dict)
    cases_dir: str = "cases"
    prompt_set: str = "default"
    seed: int = 0
    pool_target: int = 1000
    test_set_size: int = 100
    cases_per_task: int | None = None
    match_threshold: float = 0.7
    limits: dict[str, int] = field(default_factory=dict)
    generation: dict[str, Any] = field(default_factory=dict)
    parallelism: int = 4
    timing_mode: bool = False
    cache_dir: str | None = None
    output_dir: str = "run"
    fault_plan: Any = field(default_factory=dict)
    answer_despite_fault: bool = False
    search_cap: int = 3
    retries: int = 2
    backoff: float = 0.5
    # directory relative paths resolve against (the config file's folder)
    base_dir: str = "."

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: str | Path = ".") -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError([f"unknown config keys: {', '.join(unknown)}"])
        cfg = cls(**{k: v for k, v in data.items() if k != "base_dir"})
        cfg.base_dir = str(base_dir)
        if cfg.prompt_set not in ("", "default"):
            cfg.prompt_set = str(cfg.path(cfg.prompt_set))
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        p = Path(path)
        try:
            text = p.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError([f"cannot read config {p}: {exc}"]) from exc
        try:
            if p.suffix in (".yaml", ".yml"):
                import yaml

                data = yaml.safe_load(text) or {}
            else:
                data = json.loads(text)
        except Exception as exc:  # yaml and json raise unrelated types
            raise ConfigError([f"cannot parse config {p}: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError([f"config {p} must be a mapping"])
        return cls.from_mapping(data, p.parent)

    def path(self, value: str | Path) -> Path:
        p = Path(value)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def fixture_path(self, domain: str) -> Path:
        return self.path(self.fixtures[domain]) if domain in self.fixtures else default_fixture(domain)

    def template_path(self, domain: str) -> Path:
        return self.path(self.templates[domain]) if domain in self.templates else default_templates(domain)

    def snapshot(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.pop("base_dir")
        return json.loads(json.dumps(d))

    @property
    def run_id(self) -> str:
        snap = {k: v for k, v in self.snapshot().items() if k not in _NON_SEMANTIC}
        return hashlib.sha256(canonical_json(snap).encode()).hexdigest()[:16]

    @property
    def effective_parallelism(self) -> int:
        return 1 if self.timing_mode else max(1, int(self.parallelism))

    def limits_obj(self) -> Limits:
        return Limits(**self.limits)

    def params(self) -> GenerationParams:
        g = dict(self.generation)
        if "stop_sequences" in g:
            g["stop_sequences"] = tuple(g["stop_sequences"])
        return GenerationParams(**g)

    def task_ids(self) -> list[str]:
        if self.tasks is not None:
            return list(self.tasks)
        out = []
        for dom in self.domains:
            have = set(self.existing)
            tp = self.template_path(dom)
            if tp.is_file():
                try:
                    have |= {t.task_id for t in load_templates(tp)}
                except TaskGenError:
                    pass
            out += [t for t, spec in TASKS.items() if spec.domain.value == dom and t in have]
        return out


def validate(cfg: RunConfig, for_run: bool = False) -> list[str]:
    """Every problem with ``cfg``; an empty list means it is usable."""
    problems = []
    for dom in cfg.domains:
        if dom not in {d.value for d in Domain}:
            problems.append(f"unknown domain {dom!r}")
            continue
        if not cfg.fixture_path(dom).is_file():
            problems.append(f"fixture for {dom} not found: {cfg.fixture_path(dom)}")
        if dom in cfg.templates and not cfg.template_path(dom).is_file():
            problems.append(f"template file for {dom} not found: {cfg.template_path(dom)}")
    for tid, path in cfg.existing.items():
        if not cfg.path(path).is_file():
            problems.append(f"case file for task {tid} not found: {cfg.path(path)}")
    for tid in cfg.tasks or ():
        if tid not in TASKS:
            problems.append(f"unknown task {tid!r}")
        elif TASKS[tid].domain.value not in cfg.domains:
            problems.append(f"task {tid} belongs to domain {TASKS[tid].domain.value}, which is not selected")
    if not 0 < cfg.match_threshold <= 1:
        problems.append("match_threshold must lie in (0, 1]")
    try:
        cfg.limits_obj()
    except (TypeError, ValueError) as exc:
        problems.append(f"bad limits: {exc}")
    try:
        cfg.params()
    except TypeError as exc:
        problems.append(f"bad generation parameters: {exc}")
    for wf in cfg.workflows:
        if wf not in {w.value for w in Workflow}:
            problems.append(f"unknown workflow {wf!r}")
    if not resolve_prompt_dir(cfg.prompt_set).is_dir():
        problems.append(f"prompt set not found: {cfg.prompt_set}")
    if problems:
        return problems
    if for_run:
        try:
            systems = resolve_systems(cfg)
        except (ConfigError, InfeasibleSystem, ValueError) as exc:
            return [str(exc)]
        for s in systems:
            if s.model.kind is ModelKind.SCRIPTED and not Path(s.model.location).is_file():
                problems.append(f"script for {s.id} not found: {s.model.location}")
        cases_dir = cfg.path(cfg.cases_dir)
        for tid in cfg.task_ids():
            if not (cases_dir / f"{tid}.jsonl").is_file():
                problems.append(f"no case file for task {tid} in {cases_dir} (run gen first)")
    return problems


# -- systems ----------------------------------------------------------------


def resolve_model(cfg: RunConfig, model_id: str, workflow: Workflow) -> ModelRef:
    spec = dict(cfg.models.get("default", {}))
    spec.update(cfg.models.get(model_id, {}))
    kind = ModelKind(spec.get("kind", "remote"))
    location = str(spec.get("location", ""))
    if location:
        location = location.replace("{workflow}", workflow.value).replace("{model}", model_id)
        if kind is ModelKind.SCRIPTED:
            location = str(cfg.path(location))
    return ModelRef(
        model_id,
        kind,
        location,
        spec.get("supports_native_function_calls"),
        spec.get("api_key_env"),
        bool(spec.get("openai_strict", False)),
    )


def resolve_systems(cfg: RunConfig) -> list[SystemConfig]:
    limits = cfg.limits_obj()
    if cfg.systems == "all-feasible":
        pairs = [(s.workflow, s.model.id) for s in feasible_systems(cfg.workflows, cfg.roster, limits)]
        allow = False
    elif isinstance(cfg.systems, list):
        pairs = []
        for entry in cfg.systems:
            if isinstance(entry, str) and "+" in entry:
                wf, mid = entry.split("+", 1)
            elif isinstance(entry, dict) and {"workflow", "model"} <= set(entry):
                wf, mid = entry["workflow"], entry["model"]
            else:
                raise ConfigError([f"bad system entry {entry!r}; use 'Workflow+model'"])
            pairs.append((Workflow(wf), mid))
        allow = True
    else:
        raise ConfigError(["systems must be 'all-feasible' or a list"])
    out = []
    for wf, mid in pairs:
        ref = resolve_model(cfg, mid, wf)
        out.append(
            SystemConfig(
                wf,
                ref,
                limits,
                cfg.prompt_set,
                allow_any_dfsdt=allow and mid not in DEFAULT_ROSTER,
                answer_despite_fault=cfg.answer_despite_fault,
            )
        )
    return out


# -- gen --------------------------------------------------------------------


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_kbs(cfg: RunConfig) -> dict[str, KnowledgeBase]:
    return {d: load_knowledge_base(cfg.fixture_path(d), Domain(d)) for d in cfg.domains}


def cmd_gen(cfg: RunConfig) -> dict:
    """Build pools and test sets per task; returns the manifest (also written)."""
    problems = validate(cfg)
    for dom in cfg.domains:
        if not cfg.template_path(dom).is_file():
            problems.append(f"template file for {dom} not found: {cfg.template_path(dom)}")
    if problems:
        raise ConfigError(problems)
    kbs = load_kbs(cfg)
    templates = {d: load_templates(cfg.template_path(d)) for d in cfg.domains}
    out = cfg.path(cfg.cases_dir)
    manifest: dict[str, Any] = {"seed": cfg.seed, "tasks": {}}
    plans = []
    for tid in cfg.task_ids():
        spec = TASKS[tid]
        tpls = [t for t in templates[spec.domain.value] if t.task_id == tid]
        if tid in cfg.existing:
            pool = load_existing(cfg.path(cfg.existing[tid]), tid)
            yields, origin = {}, "dataset"
        elif tpls:
            target = min(spec.pool_size, cfg.pool_target)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                built = build_pool(tpls, kbs[spec.domain.value], target, cfg.seed, tid)
            pool, yields, origin = built.cases, built.yields, "templates"
        else:
            manifest["tasks"][tid] = {"skipped": "no templates or dataset file"}
            continue
        k = min(cfg.test_set_size, len(pool))
        test = sample_test_set(pool, k, cfg.seed)
        plans.append((tid, pool, test))
        manifest["tasks"][tid] = {
            "dataset": spec.dataset,
            "domain": spec.domain.value,
            "level": spec.level.value,
            "source": spec.source.value,
            "origin": origin,
            "pool": len(pool),
            "test_set": len(test),
            "yields": yields,
        }
    (out / "pools").mkdir(parents=True, exist_ok=True)
    for tid, pool, test in plans:
        dump_cases(pool, out / "pools" / f"{tid}.jsonl")
        dump_cases(test, out / f"{tid}.jsonl")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return manifest


# -- run --------------------------------------------------------------------


@dataclass
class RunRecord:
    run_id: str
    config: dict
    environment: dict
    sequential: bool
    pairs: int = 0
    completed: int = 0
    skipped: int = 0
    failures: int = 0
    network_calls: int = 0

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def load(cls, run_dir: str | Path) -> "RunRecord":
        d = json.loads((Path(run_dir) / "run.json").read_text(encoding="utf-8"))
        return cls(**d)


def environment_digest(cfg: RunConfig) -> dict:
    env: dict[str, Any] = {"code_version": __version__, "fixtures": {}, "templates": {}, "prompts": {}}
    for dom in cfg.domains:
        env["fixtures"][dom] = _file_digest(cfg.fixture_path(dom))
        if cfg.template_path(dom).is_file():
            env["templates"][dom] = _file_digest(cfg.template_path(dom))
    pdir = resolve_prompt_dir(cfg.prompt_set)
    for p in sorted(pdir.iterdir()):
        if p.is_file():
            env["prompts"][p.name] = _file_digest(p)
    return env


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in text)


def trace_ref(system: str, case_id: str) -> str:
    return f"traces/{_slug(system)}/{_slug(case_id)}.json"


def load_results(run_dir: str | Path) -> list[CaseResult]:
    p = Path(run_dir) / "results.jsonl"
    if not p.is_file():
        return []
    return [CaseResult.from_dict(json.loads(line)) for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]


def load_cases(cfg: RunConfig) -> dict[str, list[TestCase]]:
    cases_dir = cfg.path(cfg.cases_dir)
    out = {}
    for tid in cfg.task_ids():
        cases = load_existing(cases_dir / f"{tid}.jsonl", tid)
        if cfg.cases_per_task is not None:
            cases = cases[: cfg.cases_per_task]
        out[tid] = cases
    return out


def _fault_plan(cfg: RunConfig, cases: Iterable[TestCase]) -> dict[str, list[int]]:
    if cfg.fault_plan == "synthetic":
        return synthetic.fault_plan(cases)
    if not isinstance(cfg.fault_plan, dict):
        raise ConfigError(["fault_plan must be a mapping of case id to call ordinals, or 'synthetic'"])
    return {k: list(v) for k, v in cfg.fault_plan.items()}


def cmd_run(cfg: RunConfig, transport: Transport | None = None) -> RunRecord:
    """Execute every pending (system, case) pair and persist traces and results.

    Results append in pair order through the calling thread, so a crash loses
    at most the in-flight pairs and a rerun resumes where it stopped.
    """
    problems = validate(cfg, for_run=True)
    if problems:
        raise ConfigError(problems)
    systems = resolve_systems(cfg)
    kbs = load_kbs(cfg)
    cases_by_task = load_cases(cfg)
    all_cases = [c for cs in cases_by_task.values() for c in cs]
    faults = _fault_plan(cfg, all_cases)
    params = cfg.params()
    transport = transport or Transport()
    ops_before = transport.operations

    out = cfg.path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    record_path = out / "run.json"
    if record_path.is_file():
        previous = json.loads(record_path.read_text(encoding="utf-8"))
        if previous.get("run_id") != cfg.run_id:
            raise ConfigError([f"{out} holds run {previous.get('run_id')}, not {cfg.run_id}; use another output_dir"])
    done = {(r.system, r.case_id) for r in load_results(out)}

    backends: dict[str, ScriptedModel] = {}
    for s in systems:
        if s.model.kind is ModelKind.SCRIPTED:
            try:
                backends[s.id] = ScriptedModel(read_script(s.model.location), s.model.id)
            except GatewayError as exc:
                raise ConfigError([f"script for {s.id}: {exc}"]) from exc

    examples = {tid: one_shot_example(tid, TASKS[tid].domain, cfg.prompt_set) for tid in cases_by_task}
    pairs = [(s, tid, c) for s in systems for tid, cs in cases_by_task.items() for c in cs]
    pending = [p for p in pairs if (p[0].id, p[2].case_id) not in done]
    cache_dir = str(cfg.path(cfg.cache_dir)) if cfg.cache_dir else None

    def execute(pair):
        system, tid, case = pair
        try:
            kb = kbs[TASKS[tid].domain.value]
            session = open_session(kb, faults.get(case.case_id, ()), cfg.search_cap)
            backend = backends[system.id].for_case(case.case_id) if system.id in backends else None
            llm = model_client(
                system.model,
                params,
                backend=backend,
                cache_dir=cache_dir,
                transport=transport,
                retries=cfg.retries,
                backoff=cfg.backoff,
            )
            trace = run_workflow(system, session, case, examples[tid], llm, timing=cfg.timing_mode)
            ref = trace_ref(system.id, case.case_id)
            result = score_trace(trace, case, system.id, cfg.match_threshold, ref)
            return ("ok", system, case, trace, result)
        except Exception as exc:  # harness failure for this pair only
            log.exception("pair %s / %s failed", system.id, case.case_id)
            return ("failed", system, case, None, f"{type(exc).__name__}: {exc}")

    environment = environment_digest(cfg)
    record = RunRecord(cfg.run_id, cfg.snapshot(), environment, cfg.timing_mode, pairs=len(pairs), skipped=len(pairs) - len(pending))
    _write_record(record_path, record)
    lock = threading.Lock()
    with open(out / "results.jsonl", "a", encoding="utf-8") as results_fh, open(
        out / "failures.jsonl", "a", encoding="utf-8"
    ) as failures_fh, ThreadPoolExecutor(max_workers=cfg.effective_parallelism) as pool:
        for status, system, case, trace, payload in pool.map(execute, pending):
            with lock:
                if status == "ok":
                    tpath = out / payload.trace_ref
                    tpath.parent.mkdir(parents=True, exist_ok=True)
                    tpath.write_text(trace.to_json() + "\n", encoding="utf-8")
                    results_fh.write(json.dumps(payload.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
                    results_fh.flush()
                    record.completed += 1
                else:
                    failures_fh.write(json.dumps({"system": system.id, "case_id": case.case_id, "error": payload}, sort_keys=True) + "\n")
                    failures_fh.flush()
                    record.failures += 1
    record.network_calls = transport.operations - ops_before
    _write_record(record_path, record)
    return record


def _write_record(path: Path, record: RunRecord) -> None:
    path.write_text(json.dumps(record.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8")


# -- analyze ----------------------------------------------------------------


def cmd_analyze(run_dirs: Iterable[str | Path], out_dir: str | Path, formats=("csv", "json", "svg")) -> dict:
    """Merge results of one or more runs by system id and write the reports."""
    merged: dict[tuple[str, str], CaseResult] = {}
    sequential = True
    any_record = False
    for rd in run_dirs:
        rd = Path(rd)
        if (rd / "run.json").is_file():
            any_record = True
            sequential = sequential and RunRecord.load(rd).sequential
        else:
            sequential = False
        for r in load_results(rd):
            key = (r.system, r.case_id)
            if key in merged:
                warnings.warn(f"{r.system} / {r.case_id} appears in several runs; keeping the latest", stacklevel=2)
            merged[key] = r
    results = [merged[k] for k in sorted(merged)]
    out = Path(out_dir)
    if not results:
        out.mkdir(parents=True, exist_ok=True)
        emit_report(out, aggregate([]), {}, {}, None, formats)
        summary = {"no_results": True, "systems": 0, "results": 0}
        (out / "summary.json").write_text(json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8")
        return summary
    matrix = aggregate(results, [TASKS[t] for t in TASKS])
    boards = leaderboards(matrix)
    dists = {s: error_distribution(results, lambda r, s=s: r.system == s) for s in matrix.systems}
    deployment = deployment_stats(results) if (sequential and any_record) else None
    files = emit_report(out, matrix, boards, dists, deployment, formats)
    summary = {
        "no_results": False,
        "systems": len(matrix.systems),
        "results": len(results),
        "files": [f.name for f in files],
    }
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True) + "\n", encoding="utf-8")
    return summary


def make_synthetic_scripts(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Write oracle scripts for every case of ``cfg`` (one file per workflow)."""
    kbs = load_kbs(cfg)
    templates: dict[str, QuestionTemplate] = {}
    for dom in cfg.domains:
        for t in load_templates(cfg.template_path(dom)):
            templates[t.id] = t
    cases = [c for cs in load_cases(cfg).values() for c in cs]
    scripts = synthetic.build_scripts(cases, kbs, templates, [Workflow(w) for w in cfg.workflows])
    return synthetic.write_scripts(cfg.path(out_dir), scripts)


__all__ = [
    "ConfigError",
    "KnowledgeError",
    "RunConfig",
    "RunRecord",
    "Source",
    "cmd_analyze",
    "cmd_gen",
    "cmd_run",
    "load_results",
    "make_synthetic_scripts",
    "resolve_systems",
    "validate",
]
