"""One question, four workflows.

Builds the research-interest question for Yann Lecun from the shipped
fixture, answers it with each workflow driven by a hand-written script, and
shows how each trace is scored and classified.

    python3 demos/walkthrough.py
"""

from ragharness.environment import open_session
from ragharness.gateway import ModelKind, ModelRef, Script, ScriptedModel
from ragharness.knowledge import Domain, load_knowledge_base
from ragharness.runner import default_fixture, default_templates
from ragharness.scoring import score_trace
from ragharness.taskgen import load_templates, regenerate, TestCase
from ragharness.workflows import SystemConfig, Workflow, one_shot_example, run_workflow

kb = load_knowledge_base(default_fixture("aminer"), Domain.AMINER)
templates = {t.id: t for t in load_templates(default_templates("aminer"))}
stub = TestCase("soay-interest:p1", "1-3", "", "", {"template": "soay-interest", "records": ["p1"]})
case = regenerate(stub, templates, kb)
print("question:", case.question)
print("gold:    ", case.gold)

SEARCH = '{"name": "Yann Lecun", "organization": "New York University"}'
SCRIPTS = {
    Workflow.REACT: [
        f"Thought: Find the person first.\nAction: searchPerson[{SEARCH}]",
        "Thought: Now read the interests.\nAction: getPersonInterest[p1]",
        f"Thought: That is the list.\nFinal Answer: {case.gold}",
    ],
    Workflow.PAL: [
        'p = searchPerson(name="Yann Lecun", organization="New York University")\n'
        "i = getPersonInterest(id=p.id)\n"
        "answer = i"
    ],
    # the first proposal asks for the wrong person; the search backtracks
    Workflow.DFSDT: [
        "Thought: Try the id directly.\nAction: getPersonInterest[p99]",
        "Thought: That was blind. Search instead.\nAction: give_up[]",
        f"Thought: Search first.\nAction: searchPerson[{SEARCH}]",
        "Thought: Interests next.\nAction: getPersonInterest[p1]",
        f"Thought: Done.\nFinal Answer: {case.gold}",
    ],
    # answers from memory without calling a tool
    Workflow.FC: [case.gold],
}

model = ModelRef("gpt-4-1106", ModelKind.SCRIPTED, "inline")
example = one_shot_example(case.task_id, "aminer")
for wf, replies in SCRIPTS.items():
    system = SystemConfig(wf, model)
    backend = ScriptedModel(Script.from_obj(replies))
    trace = run_workflow(system, open_session(kb), case, example, lambda turns, specs=None: backend.next_reply(turns))
    result = score_trace(trace, case, system.id)
    calls = [s.call.tool for s in trace.steps if s.call]
    print(f"\n{system.id}")
    print(f"  completions={trace.completions} tool calls={calls}")
    print(f"  response: {trace.response}")
    print(f"  f1={result.f1:.3f} type={result.response_type.value}")
    if wf is Workflow.DFSDT:
        print("  explored:", [e["status"] for e in trace.meta["explored"]])
