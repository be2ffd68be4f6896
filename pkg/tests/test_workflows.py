import pytest
from golden_util import check_golden
from scenarios import EXAMPLE, FC_GOLDEN, LECUN, PAL_GOLDEN, PARIS, REACT_GOLDEN, SCENARIOS, run, snapshot

from ragharness.environment import FaultKind, tools_for
from ragharness.gateway import MalformedScript, ModelRef, ScriptExhausted
from ragharness.workflows import (
    InfeasibleSystem,
    Limits,
    SystemConfig,
    Workflow,
    WorkflowTrace,
    feasible_systems,
    one_shot_example,
    parse_action,
    render_prompt,
)


@pytest.mark.parametrize("wf,path", sorted(SCENARIOS))
def test_golden_traces(aminer_kb, replay, wf, path):
    replies, plan = SCENARIOS[(wf, path)]
    trace, _ = run(wf, aminer_kb, replies, replay, fault_plan=plan)
    check_golden(f"trace_{wf.lower()}_{path}", snapshot(trace))
    assert WorkflowTrace.from_dict(trace.to_dict()).to_dict() == trace.to_dict()


@pytest.mark.parametrize("wf", ["ReAct", "PAL", "DFSDT", "FC"])
def test_golden_answer_is_gold(aminer_kb, replay, wf):
    replies, _ = SCENARIOS[(wf, "golden")]
    trace, _ = run(wf, aminer_kb, replies, replay)
    assert trace.response == LECUN.gold
    assert trace.interruption is None
    assert "Robotics" in trace.scratchpad


@pytest.mark.parametrize("wf", ["ReAct", "PAL", "DFSDT", "FC"])
def test_determinism(aminer_kb, replay, wf):
    replies, plan = SCENARIOS[(wf, "golden")]
    a, _ = run(wf, aminer_kb, replies, replay, fault_plan=plan)
    b, _ = run(wf, aminer_kb, replies, replay, fault_plan=plan)
    assert a.to_json() == b.to_json()


def test_react_wiki_with_finish_tool(wiki_kb, replay):
    replies = ["Thought: look it up\nAction: Search[France]", "Thought: done\nAction: Finish[Paris]"]
    trace, llm = run("ReAct", wiki_kb, replies, replay, case=PARIS)
    assert trace.response == "Paris"
    assert trace.steps[-1].call.tool == "Finish"
    # the Finish echo is not retrieval
    assert trace.scratchpad == wiki_kb.records["w2"].get("abstract")
    assert "Observation 1: France is a country" in llm.prompts[1][0].content


def test_react_reprompts_once_after_bad_reply(aminer_kb, replay):
    replies = ["I think it is AI.", *REACT_GOLDEN]
    trace, llm = run("ReAct", aminer_kb, replies, replay)
    assert trace.response == LECUN.gold
    assert len(trace.steps[0].rejected) == 1
    assert "rejected" in llm.prompts[1][0].content


def test_react_misuse_interrupts(aminer_kb, replay):
    trace, _ = run("ReAct", aminer_kb, SCENARIOS[("ReAct", "misuse")][0], replay)
    assert trace.response is None
    assert trace.interruption.kind is FaultKind.TOOL_MISUSE


def test_react_step_limit(aminer_kb, replay):
    trace, _ = run("ReAct", aminer_kb, SCENARIOS[("ReAct", "step-limit")][0], replay)
    assert trace.response is None and trace.interruption is None
    assert trace.step_count == 7 and trace.completions == 7


def test_react_fault_interrupts_or_continues(aminer_kb, replay):
    trace, _ = run("ReAct", aminer_kb, REACT_GOLDEN, replay, fault_plan=(1,))
    assert trace.interruption.kind is FaultKind.TOOL_INTERNAL_FAULT and trace.response is None
    trace, _ = run("ReAct", aminer_kb, REACT_GOLDEN, replay, fault_plan=(1,), answer_despite_fault=True)
    assert trace.interruption.kind is FaultKind.TOOL_INTERNAL_FAULT
    assert trace.response == LECUN.gold


def test_model_fault_is_recorded(aminer_kb, replay):
    trace, _ = run("ReAct", aminer_kb, REACT_GOLDEN[:1], replay)
    assert trace.interruption.kind is FaultKind.MODEL_FAULT


def test_pal_single_completion(aminer_kb, replay):
    trace, llm = run("PAL", aminer_kb, PAL_GOLDEN, replay)
    assert llm.calls == 1 and trace.completions == 1
    assert [s.call.tool for s in trace.steps] == ["searchPerson", "getPersonInterest"]
    assert trace.meta["program"] == PAL_GOLDEN[0]


def test_pal_parse_error_runs_no_tool(aminer_kb, replay):
    trace, _ = run("PAL", aminer_kb, ["this is not a program"], replay)
    assert trace.steps == () and trace.interruption.kind is FaultKind.TOOL_MISUSE


def test_pal_runtime_error_is_misuse(aminer_kb, replay):
    trace, _ = run("PAL", aminer_kb, ['p = getPersonInterest(id="p1")\nanswer = p.nosuchfield'], replay)
    assert trace.step_count == 1 and trace.interruption.kind is FaultKind.TOOL_MISUSE


def test_pal_fault_stops_program(aminer_kb, replay):
    trace, _ = run("PAL", aminer_kb, PAL_GOLDEN, replay, fault_plan=(1,))
    assert trace.step_count == 1 and trace.interruption.kind is FaultKind.TOOL_INTERNAL_FAULT


def test_dfsdt_backtracks_past_dead_child(aminer_kb, replay):
    trace, llm = run("DFSDT", aminer_kb, SCENARIOS[("DFSDT", "misuse")][0], replay)
    assert trace.response == LECUN.gold
    assert trace.meta["explored"][0]["status"] == "dead"
    assert trace.meta["nodes_expanded"] == 4
    assert "Already tried" in llm.prompts[1][0].content


def test_dfsdt_give_up_abandons_parent(aminer_kb, replay):
    replies = [
        "Thought: a\nAction: getPersonInterest[p2]",
        "Thought: hopeless\nAction: give_up[]",
        *REACT_GOLDEN,
    ]
    trace, llm = run("DFSDT", aminer_kb, replies, replay)
    assert trace.response == LECUN.gold
    assert [e["status"] for e in trace.meta["explored"]][:2] == ["open", "give_up"]
    assert [s.call.tool for s in trace.steps if s.call] == ["searchPerson", "getPersonInterest"]
    assert "given up later" in llm.prompts[2][0].content


def test_dfsdt_node_budget(aminer_kb, replay):
    trace, llm = run("DFSDT", aminer_kb, SCENARIOS[("DFSDT", "step-limit")][0], replay)
    assert trace.response is None and trace.interruption is None
    assert trace.meta["nodes_expanded"] <= 15
    assert max(e["depth"] for e in trace.meta["explored"]) <= 7


def test_dfsdt_depth_limit(aminer_kb, replay):
    lim = Limits(max_nodes=50, max_depth=2, branching=1)
    replies = ["Thought: again\nAction: getPersonInterest[p1]"] * 50
    trace, _ = run("DFSDT", aminer_kb, replies, replay, limits=lim)
    assert trace.meta["nodes_expanded"] == 2


def test_fc_turns_and_unknown_tool(aminer_kb, replay):
    trace, llm = run("FC", aminer_kb, FC_GOLDEN, replay)
    last = llm.prompts[-1]
    assert [t.role.value for t in last] == ["system", "user", "assistant", "tool", "assistant", "tool"]
    trace, _ = run("FC", aminer_kb, SCENARIOS[("FC", "misuse")][0], replay)
    assert trace.interruption.kind is FaultKind.TOOL_MISUSE


def test_fc_malformed_arguments_are_misuse(aminer_kb, replay):
    replies = [{"content": "", "tool_call": {"name": "getPersonInterest", "arguments": None, "raw_arguments": "{id: p1"}}]
    with pytest.raises(MalformedScript):
        run("FC", aminer_kb, [{"content": 1}], replay)
    trace, _ = run("FC", aminer_kb, replies, replay)
    assert trace.interruption.kind is FaultKind.TOOL_MISUSE


def test_fc_finish_call_ends_run(wiki_kb, replay):
    replies = [{"content": "", "tool_call": {"name": "Finish", "arguments": {"answer": "Paris"}}}]
    trace, _ = run("FC", wiki_kb, replies, replay, case=PARIS)
    assert trace.response == "Paris"


def test_feasible_systems():
    systems = feasible_systems()
    ids = [s.id for s in systems]
    assert len(ids) == 21
    assert sum(i.startswith("ReAct+") for i in ids) == 8
    assert sum(i.startswith("DFSDT+") for i in ids) == 3
    assert [i for i in ids if i.startswith("FC+")] == ["FC+gpt-4-1106", "FC+gpt-3.5-turbo"]
    with pytest.raises(InfeasibleSystem):
        SystemConfig(Workflow.FC, ModelRef("llama2-7b-chat"))
    with pytest.raises(InfeasibleSystem):
        SystemConfig(Workflow.DFSDT, ModelRef("vicuna-13b"))
    assert SystemConfig(Workflow.DFSDT, ModelRef("vicuna-13b"), allow_any_dfsdt=True).id == "DFSDT+vicuna-13b"


@pytest.mark.parametrize("wf", list(Workflow))
@pytest.mark.parametrize("domain", ["wiki", "aminer"])
def test_prompts_fill_every_placeholder(wf, domain):
    text = render_prompt(wf, domain, tools=tools_for(domain), example=EXAMPLE, question="Q?", scratchpad="")
    assert "{" + "question}" not in text and "{" + "tools}" not in text
    assert "Q?" in text and EXAMPLE.answer in text


def test_one_shot_examples():
    assert one_shot_example("1-3", "aminer").question
    assert one_shot_example("9-9", "wiki").question


def test_parse_action_forms():
    specs = tools_for("aminer")
    a = parse_action('Thought: hm\nAction: getCoauthors["p1"]\nObservation: junk', specs)
    assert (a.tool, a.arguments, a.kind) == ("getCoauthors", {"id": "p1"}, "call")
    assert parse_action("Final Answer: 42", specs).kind == "final"
    assert parse_action("Action: give_up_and_restart[]", specs).kind == "give_up"
    assert parse_action("Action: Mystery[x]", specs).arguments == {"input": "x"}


def test_scripted_exhaustion_is_model_fault(aminer_kb, replay):
    trace, _ = run("FC", aminer_kb, [], replay)
    assert trace.interruption.kind is FaultKind.MODEL_FAULT
    assert issubclass(ScriptExhausted, Exception)
