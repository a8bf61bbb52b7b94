import numpy as np
import pytest

from sharpopt.core import ConfigurationError, ContractViolationError
from sharpopt.schedule import KINDS, ScheduleSpec, learning_rate


def cosine(eta0, epochs):
    return ScheduleSpec(kind="cosine-anneal", eta0=eta0, total_epochs=epochs)


def test_kinds_registry():
    assert set(KINDS) == {"constant", "cosine-anneal", "sqrt-horizon"}


def test_constant_everywhere():
    spec = ScheduleSpec(kind="constant", eta0=0.25)
    for epoch in (0, 3, 999):
        assert learning_rate(spec, epoch, 0) == 0.25


def test_cosine_first_epoch_is_eta0():
    assert learning_rate(cosine(0.5, 100), 0, 0) == 0.5


def test_cosine_half_horizon_is_half_eta0():
    assert learning_rate(cosine(0.5, 100), 50, 0) == pytest.approx(0.25, rel=1e-12)


def test_cosine_constant_within_epoch():
    spec = cosine(0.3, 10)
    vals = {learning_rate(spec, 4, s) for s in range(17)}
    assert len(vals) == 1


def test_cosine_non_increasing_and_positive():
    spec = cosine(1.0, 40)
    series = [learning_rate(spec, e, 0) for e in range(40)]
    assert all(a >= b for a, b in zip(series, series[1:]))
    assert all(v > 0 for v in series)
    # last epoch sits near, but not at, the zero floor
    assert series[-1] < 0.01


def test_cosine_rejects_out_of_range_epoch():
    with pytest.raises(ContractViolationError):
        learning_rate(cosine(0.5, 10), 10, 0)


def test_sqrt_horizon_flat_value():
    # 0.4 / sqrt(400) = 0.02 at every step
    spec = ScheduleSpec(
        kind="sqrt-horizon", eta0=0.4, total_steps=400, steps_per_epoch=20
    )
    for epoch, s in [(0, 0), (5, 7), (19, 19)]:
        assert learning_rate(spec, epoch, s) == pytest.approx(0.02, rel=1e-12)


def test_sqrt_horizon_rejects_step_past_horizon():
    spec = ScheduleSpec(kind="sqrt-horizon", eta0=0.4, total_steps=10, steps_per_epoch=5)
    with pytest.raises(ContractViolationError):
        learning_rate(spec, 2, 0)


@pytest.mark.parametrize("bad", [
    dict(kind="warmup", eta0=0.1),
    dict(kind="constant", eta0=0.0),
    dict(kind="constant", eta0=-1.0),
    dict(kind="cosine-anneal", eta0=0.1),                      # missing horizon
    dict(kind="cosine-anneal", eta0=0.1, total_epochs=0),
    dict(kind="sqrt-horizon", eta0=0.1, steps_per_epoch=5),    # missing K
    dict(kind="sqrt-horizon", eta0=0.1, total_steps=0, steps_per_epoch=5),
])
def test_invalid_specs_rejected(bad):
    with pytest.raises((ConfigurationError, ContractViolationError)):
        ScheduleSpec(**bad)
