import warnings

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvdecoherence.errors import NegativeDuration, SequenceSyntaxError, UnbalancedGatesWarning, UndefinedParam
from nvdecoherence.schedule import (
    build_amplify_schedule,
    build_general_schedule,
    build_one_channel_schedule,
    build_two_channel_schedule,
    emit_sequence_dsl,
    pair_coefficients,
    parse_sequence_dsl,
    rebuild,
)

AMPLIFY = "dim 3\ndt 0.01\nparam lambda 2\nrepeat 100 { sys on dt; sys off lambda*dt }"

ONE_CHANNEL = """
# swap pair on the +1/0 channel
dim 3
dt 0.02
param lambda 1.5
param mu 0.5
repeat 40 {
  sys on dt
  sys off (lambda - mu) * dt
  gate 1 2
  sys off mu*dt
  gate 1 2
}
"""


def test_amplify_program():
    assert parse_sequence_dsl(AMPLIFY) == build_amplify_schedule(2.0, 0.01, 100)


def test_one_channel_program():
    assert parse_sequence_dsl(ONE_CHANNEL) == build_one_channel_schedule(1.5, 0.5, 0.02, 40)


def test_tau_declaration_implies_mu():
    text = ONE_CHANNEL.replace("param mu 0.5", "param tau 1")
    s = parse_sequence_dsl(text)
    assert s == build_one_channel_schedule(1.5, 0.75, 0.02, 40)
    assert s.params["mu"] == pytest.approx(0.75)


def test_overrides_and_rebuild():
    s = parse_sequence_dsl(ONE_CHANNEL, overrides={"mu": 1.0})
    assert s == build_one_channel_schedule(1.5, 1.0, 0.02, 40)
    r = rebuild(parse_sequence_dsl(ONE_CHANNEL), mu=0.0)
    assert r == build_one_channel_schedule(1.5, 0.0, 0.02, 40)


def test_negative_duration():
    with pytest.raises(NegativeDuration) as exc:
        parse_sequence_dsl("dim 2\ndt 0.01\nsys off -1*dt")
    assert exc.value.line == 3


def test_undefined_param():
    with pytest.raises(UndefinedParam) as exc:
        parse_sequence_dsl("dim 2\ndt 0.01\nsys off lam*dt")
    assert (exc.value.line, exc.value.column) == (3, 9)


def test_syntax_error_location():
    with pytest.raises(SequenceSyntaxError) as exc:
        parse_sequence_dsl("dim 2\ndt 0.01\nrepeat 3 { sys on dt; sys sideways dt }")
    assert exc.value.line == 3
    assert exc.value.column > 20


def test_missing_declarations():
    with pytest.raises(SequenceSyntaxError):
        parse_sequence_dsl("dt 0.01\nsys on dt")
    with pytest.raises(SequenceSyntaxError):
        parse_sequence_dsl("dim 2\nsys on 0.01")


def test_unbalanced_gates_warn():
    with pytest.warns(UnbalancedGatesWarning):
        s = parse_sequence_dsl("dim 3\ndt 0.01\nrepeat 2 { sys on dt; gate 1 2; sys off dt }")
    assert not s.is_balanced()


def test_comments_and_semicolons():
    text = "dim 2 # qubit\ndt 0.5\nrepeat 2 { sys on dt ; sys off 2*(dt+0.5)/2 } # tail"
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        s = parse_sequence_dsl(text)
    assert s == build_amplify_schedule(2.0, 0.5, 2, dim=2)


@pytest.mark.parametrize("schedule", [
    build_amplify_schedule(0.7, 0.013, 9),
    build_one_channel_schedule(2.0, 0.3, 0.01, 4),
    build_two_channel_schedule(1.0, 0.2, 0.9, 0.005, 11),
    build_general_schedule(4, 1.5, {(0, 2): 0.003, (1, 3): 0.004}, 0.01, 2),
])
def test_round_trip(schedule):
    text = emit_sequence_dsl(schedule)
    again = parse_sequence_dsl(text)
    assert again == schedule
    assert emit_sequence_dsl(again) == text


@settings(max_examples=60, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.floats(1e-4, 1.0), st.integers(1, 500))
def test_round_trip_property(lam, f1, f2, dt, n):
    mu1, mu2 = sorted((f1 * lam, f2 * lam))
    s = build_two_channel_schedule(lam, mu1, mu2, dt, n)
    again = parse_sequence_dsl(emit_sequence_dsl(s))
    assert again == s
    a, b = pair_coefficients(s), pair_coefficients(again)
    for p in a.pairs():
        assert a[p] == pytest.approx(b[p], rel=1e-10, abs=1e-10)
