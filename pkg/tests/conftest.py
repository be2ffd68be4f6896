import sys
from pathlib import Path

import pytest

from ragharness.gateway import ModelKind, ModelRef, Script, ScriptedModel
from ragharness.knowledge import Domain, load_knowledge_base
from ragharness.runner import default_fixture
from ragharness.taskgen import TestCase

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def aminer_kb():
    return load_knowledge_base(default_fixture("aminer"), Domain.AMINER)


@pytest.fixture(scope="session")
def wiki_kb():
    return load_knowledge_base(default_fixture("wiki"), Domain.WIKI)


class Replay:
    """A model client over a fixed reply list that records every prompt."""

    def __init__(self, replies):
        self.model = ScriptedModel(Script.from_obj(list(replies)))

    def __call__(self, turns, tool_specs=None):
        return self.model.next_reply(turns)

    @property
    def calls(self):
        return self.model.calls

    @property
    def prompts(self):
        return self.model.prompts


@pytest.fixture
def replay():
    return Replay


@pytest.fixture
def gpt4():
    return ModelRef("gpt-4-1106", ModelKind.SCRIPTED, "inline")


def make_case(question="What is the capital of France?", gold="Paris", task_id="1-1", case_id="c1"):
    return TestCase(case_id, task_id, question, gold)


@pytest.fixture
def case():
    return make_case
