import pytest
from hypothesis import given
from hypothesis import strategies as st

from fibresense.units import format_eng, parse_eng


@pytest.mark.parametrize("text,value", [
    ("4.7p", 4.7e-12), ("47 pF", 47e-12), ("7.5k", 7.5e3), ("7.5 kOhm", 7.5e3), ("0.75kΩ", 750.0),
    ("1M", 1e6), ("12.5kHz", 12.5e3), ("10u", 1e-5), ("10µ", 1e-5), ("2m", 2e-3), ("10cm", 0.1),
    ("40%", 0.4), ("1e-5", 1e-5), ("-3", -3.0), (".5n", 0.5e-9), ("2.5e3k", 2.5e6),
])
def test_parse_examples(text, value):
    assert parse_eng(text) == value


@pytest.mark.parametrize("bad", ["", "k", "4.7 q", "1..2", "abc", None, True, [1]])
def test_parse_rejects(bad):
    with pytest.raises(ValueError):
        parse_eng(bad)


def test_numbers_pass_through():
    assert parse_eng(3) == 3.0 and parse_eng(2.5e-12) == 2.5e-12


@pytest.mark.parametrize("value,text", [(47e-12, "47pF"), (7500.0, "7.5kF"), (0, "0F"), (1.0, "1F")])
def test_format_examples(value, text):
    assert format_eng(value, "F") == text


@given(st.floats(1e-14, 1e10))
def test_format_parse_round_trip(x):
    assert parse_eng(format_eng(x)) == pytest.approx(x, rel=5e-3)
