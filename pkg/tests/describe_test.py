import pytest
from rich.console import Console

from quasilocal_lab.describe import TOPICS, describe, describe_text, print_topic, print_topics
from quasilocal_lab.errors import LabError, UnknownTopicError

REQUIRED_TOPICS = ("BY", "KLY", "W", "WY", "X-modified", "adm", "lambda", "psi", "fillin", "expansions", "flow")


def test_required_topics_present():
    for topic in REQUIRED_TOPICS:
        assert topic in TOPICS
        assert describe(topic).formula


def test_describe_text_carries_normalization():
    text = describe_text("W")
    assert "pi(nu, .)" in text
    assert "8 pi" in text
    assert "m_BY" in describe_text("BY")


def test_unknown_topic_lists_available():
    with pytest.raises(UnknownTopicError) as info:
        describe("Hawking")
    assert isinstance(info.value, LabError)
    assert "BY" in info.value.available
    assert "Available" in str(info.value)


def test_rich_output():
    console = Console(record=True, width=120)
    print_topic("psi", console)
    print_topics(console)
    text = console.export_text()
    assert "Psi(d, l)" in text
    assert "Wang-Yau" in text


@pytest.mark.parametrize("topic, cited", [
    ("BY", "Brown and York"),
    ("KLY", "Liu and Yau"),
    ("W", "Shi and Tam"),
    ("WY", "Wang and Yau"),
    ("fillin", "Theorem 1.3"),
])
def test_functional_topics_print_references(topic, cited):
    assert cited in describe(topic).reference
    assert f"Reference: {describe(topic).reference}" in describe_text(topic)


def test_reference_line_in_rich_output():
    console = Console(record=True, width=400)
    print_topic("W", console)
    assert "Reference: Null-observer energy" in console.export_text()
    assert "Reference" not in describe_text("catalogs")
