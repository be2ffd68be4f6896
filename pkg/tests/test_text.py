from hypothesis import given, strategies as st

from ragharness.text import normalize_text, normalize_tokens, render_value


def test_examples():
    assert normalize_tokens("Yann Lecun.") == ["yann", "lecun"]
    assert normalize_tokens("AI, Machine-Learning") == ["ai", "machine", "learning"]
    assert normalize_tokens("") == []
    assert normalize_tokens("snake_case") == ["snake", "case"]


@given(st.text())
def test_normalization_is_a_fixpoint(text):
    once = normalize_tokens(text)
    assert normalize_tokens(" ".join(once)) == once
    assert normalize_text(normalize_text(text)) == normalize_text(text)


def test_render_value():
    assert render_value(("AI", "Robotics")) == "AI, Robotics"
    assert render_value(3.0) == "3"
    assert render_value(2.5) == "2.5"
    assert render_value("x") == "x"
