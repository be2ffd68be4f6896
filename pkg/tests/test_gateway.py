import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ragharness.environment import tools_for
from ragharness.gateway import (
    ChatTurn,
    GenerationParams,
    MalformedScript,
    ModelKind,
    ModelRef,
    ProtocolError,
    Role,
    Script,
    ScriptExhausted,
    ScriptedModel,
    Transport,
    TransportError,
    cache_key,
    cached_complete,
    complete,
    load_script,
    parse_reply_body,
    read_script,
    truncate_reply,
    turns_digest,
)

SCRIPTED = ModelKind.SCRIPTED
TURNS = [ChatTurn(Role.SYSTEM, "You answer."), ChatTurn(Role.USER, "Capital of France?")]


class Stub:
    """Chat-completions stub that records request bodies."""

    def __init__(self, replies=None, fail_first=0):
        self.bodies = []
        self.headers = []
        self.replies = replies or [{"choices": [{"message": {"content": "Paris"}}]}]
        self.fail_first = fail_first
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                n = int(self.headers["Content-Length"])
                stub.bodies.append(json.loads(self.rfile.read(n)))
                stub.headers.append(dict(self.headers))
                if len(stub.bodies) <= stub.fail_first:
                    self.send_response(503)
                    self.end_headers()
                    return
                reply = stub.replies[min(len(stub.bodies) - 1, len(stub.replies) - 1)]
                data = json.dumps(reply).encode()
                self.send_response(200)
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.httpd.serve_forever, daemon=True).start()
        self.url = f"http://127.0.0.1:{self.httpd.server_address[1]}/v1/chat/completions"

    def close(self):
        self.httpd.shutdown()
        self.httpd.server_close()


@pytest.fixture
def stub():
    s = Stub()
    yield s
    s.close()


def test_ordered_script_and_exhaustion():
    backend = ScriptedModel(Script.from_obj(["a", "b"]))
    ref = ModelRef("m", SCRIPTED, "inline")
    assert complete(ref, TURNS, backend=backend).content == "a"
    assert complete(ref, TURNS, backend=backend).content == "b"
    with pytest.raises(ScriptExhausted):
        complete(ref, TURNS, backend=backend)


def test_keyed_script_wins():
    digest = turns_digest(TURNS)
    backend = ScriptedModel(Script.from_obj({"keyed": {digest: "keyed"}, "replies": ["ordered"]}))
    ref = ModelRef("m", SCRIPTED, "inline")
    assert complete(ref, TURNS, backend=backend).content == "keyed"
    assert complete(ref, TURNS[:1], backend=backend).content == "ordered"


def test_per_case_replay():
    script = Script.from_obj({"cases": {"c1": ["one"], "c2": ["two"]}})
    base = ScriptedModel(script)
    assert base.for_case("c2").next_reply(TURNS).content == "two"
    assert base.for_case("c1").next_reply(TURNS).content == "one"


def test_tool_call_reply_dropped_without_specs():
    backend = ScriptedModel(Script.from_obj([{"content": "", "tool_call": {"name": "Search", "arguments": {}}}]))
    reply = complete(ModelRef("m", SCRIPTED, "inline"), TURNS, backend=backend)
    assert reply.tool_call is None


@pytest.mark.parametrize("bad", [{"replies": "x"}, {"nope": []}, [{"content": 3}], [{"tool_call": {"arguments": {}}}], 5])
def test_malformed_scripts(bad):
    with pytest.raises(MalformedScript):
        Script.from_obj(bad)


def test_script_file_roundtrip(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps(["hi"]))
    ref = load_script(p, "file-model")
    assert complete(ref, TURNS).content == "hi"
    (tmp_path / "bad.json").write_text("{oops")
    with pytest.raises(MalformedScript):
        read_script(tmp_path / "bad.json")


def test_stop_and_token_truncation():
    params = GenerationParams(max_new_tokens=3, stop_sequences=("\nObservation",))
    assert truncate_reply("a b\nObservation: c d e", params) == "a b"
    assert truncate_reply("one two three four", params) == "one two three"
    backend = ScriptedModel(Script.from_obj(["x </s> y"]))
    assert complete(ModelRef("m", SCRIPTED, "inline"), TURNS, backend=backend).content == "x "


def test_wire_body(stub):
    ref = ModelRef("gpt-4-1106", location=stub.url)
    params = GenerationParams(temperature=0.0, max_new_tokens=64)
    transport = Transport()
    reply = complete(ref, TURNS, params, tools_for("wiki"), transport=transport)
    assert reply.content == "Paris"
    body = stub.bodies[0]
    assert body["model"] == "gpt-4-1106"
    assert body["messages"] == [{"role": "system", "content": "You answer."}, {"role": "user", "content": "Capital of France?"}]
    assert body["temperature"] == 0.0 and body["max_tokens"] == 64
    assert body["stop"] == ["</s>"]
    assert [t["function"]["name"] for t in body["tools"]] == ["Search", "Lookup", "Finish"]
    assert transport.operations == 1


def test_strict_body_and_api_key(stub, monkeypatch):
    monkeypatch.setenv("STUB_KEY", "k123")
    ref = ModelRef("gpt-4-1106", location=stub.url, api_key_env="STUB_KEY", openai_strict=True)
    complete(ref, TURNS, transport=Transport())
    assert "num_beams" not in stub.bodies[0]
    assert stub.headers[0]["Authorization"] == "Bearer k123"


def test_tool_call_reply_parsing():
    payload = {"choices": [{"message": {"content": None, "tool_calls": [
        {"type": "function", "function": {"name": "Search", "arguments": "{\"entity\": \"Paris\"}"}}]}}]}
    reply = parse_reply_body(payload)
    assert reply.tool_call.name == "Search" and reply.tool_call.arguments == {"entity": "Paris"}
    bad = {"choices": [{"message": {"content": "", "tool_calls": [
        {"function": {"name": "Search", "arguments": "{not json"}}]}}]}
    assert parse_reply_body(bad).tool_call.arguments is None
    with pytest.raises(ProtocolError):
        parse_reply_body({"nope": 1})


def test_retries_then_success():
    s = Stub(fail_first=2)
    try:
        t = Transport()
        reply = complete(ModelRef("gpt-4-1106", location=s.url), TURNS, transport=t, retries=2, backoff=0)
        assert reply.content == "Paris" and t.operations == 3
    finally:
        s.close()


def test_retries_exhausted():
    s = Stub(fail_first=5)
    try:
        with pytest.raises(TransportError):
            complete(ModelRef("gpt-4-1106", location=s.url), TURNS, transport=Transport(), retries=1, backoff=0)
        assert len(s.bodies) == 2
    finally:
        s.close()


def test_cache_hit_makes_no_network_call(stub, tmp_path):
    ref = ModelRef("gpt-4-1106", location=stub.url)
    t = Transport()
    first = cached_complete(tmp_path, ref, TURNS, transport=t)
    second = cached_complete(tmp_path, ref, TURNS, transport=t)
    assert first == second and t.operations == 1


def test_cache_keys_distinguish_inputs():
    ref = ModelRef("gpt-4-1106")
    p = GenerationParams()
    keys = {
        cache_key(ref, TURNS, p),
        cache_key(ModelRef("llama2-7b"), TURNS, p),
        cache_key(ref, TURNS[:1], p),
        cache_key(ref, TURNS, GenerationParams(max_new_tokens=5)),
        cache_key(ref, TURNS, p, tools_for("wiki")),
    }
    assert len(keys) == 5


def test_concurrent_cache_writers(stub, tmp_path):
    ref = ModelRef("gpt-4-1106", location=stub.url)
    t = Transport()
    with ThreadPoolExecutor(8) as ex:
        replies = list(ex.map(lambda _: cached_complete(tmp_path, ref, TURNS, transport=t), range(16)))
    assert {r.content for r in replies} == {"Paris"}
    entries = list(tmp_path.rglob("*.json"))
    assert len(entries) == 1 and json.loads(entries[0].read_text())["turn"]["content"] == "Paris"
    assert not list(tmp_path.rglob(".tmp-*"))


def test_native_fc_gate():
    assert ModelRef("gpt-4-1106").supports_native_function_calls
    assert not ModelRef("llama2-7b").supports_native_function_calls
    with pytest.raises(ValueError):
        ModelRef("llama2-7b", SCRIPTED, "x", supports_native_function_calls=True)
