import numpy as np
import pandas as pd
import pytest

from floquetlab.collapse import (
    ScalingDataset,
    collapse,
    collapse_quality,
    collapsed_frame,
)
from floquetlab.errors import FitError
from floquetlab.percolation import spanning_table

SIZES = (8, 16, 32)


def _synthetic(p_c=0.5, nu=4 / 3, epsilon=0.0, ansatz="plain", sigma=0.02):
    p = np.linspace(0.3, 0.7, 21)
    rows = []
    for L in SIZES:
        x = (p - p_c) * L ** (1 / nu)
        master = np.tanh(x)
        if ansatz == "power":
            y = (2 + master) * L**epsilon
        elif ansatz == "one_plus_power":
            y = 1 + (2 + master) * L**epsilon
        else:
            y = master
        for value, obs in zip(p, y):
            rows.append({"p": value, "L": L, "y": obs, "sigma": sigma * L**epsilon})
    return pd.DataFrame(rows)


def test_collapse_recovers_synthetic_exponents():
    dataset = ScalingDataset.from_frame(_synthetic())
    result = collapse(dataset, seed=0, bootstrap=10)
    assert result.p_c == pytest.approx(0.5, abs=0.01)
    assert result.nu == pytest.approx(4 / 3, rel=0.1)
    assert result.epsilon == 0.0
    assert result.bootstrap == 10
    assert result.p_c_err < 0.05
    assert result.quality < collapse_quality(dataset, 0.45, 4 / 3)


@pytest.mark.parametrize("ansatz", ["power", "one_plus_power"])
def test_collapse_recovers_epsilon(ansatz):
    dataset = ScalingDataset.from_frame(_synthetic(epsilon=0.5, ansatz=ansatz), ansatz=ansatz)
    result = collapse(dataset, seed=1, bootstrap=0, grid_points=11)
    assert result.p_c == pytest.approx(0.5, abs=0.01)
    assert result.epsilon == pytest.approx(0.5, abs=0.05)
    assert result.ansatz == ansatz


def test_quality_is_smallest_at_the_true_point():
    dataset = ScalingDataset.from_frame(_synthetic())
    best = collapse_quality(dataset, 0.5, 4 / 3)
    assert best < collapse_quality(dataset, 0.55, 4 / 3)
    assert best < collapse_quality(dataset, 0.5, 0.7)
    assert collapse_quality(dataset, 0.5, 0.0) == float("inf")


def test_quality_ignores_point_order_and_constant_shifts():
    frame = _synthetic()
    dataset = ScalingDataset.from_frame(frame)
    reference = collapse_quality(dataset, 0.48, 1.2)
    shuffled = ScalingDataset.from_frame(frame.sample(frac=1.0, random_state=3))
    assert collapse_quality(shuffled, 0.48, 1.2) == pytest.approx(reference)
    shifted = frame.assign(y=frame["y"] + 5.0)
    assert collapse_quality(ScalingDataset.from_frame(shifted), 0.48, 1.2) == pytest.approx(reference)


def test_no_overlap():
    rows = [{"p": p, "L": 8, "y": p, "sigma": 0.1} for p in (0.0, 0.05, 0.1)]
    rows += [{"p": p, "L": 16, "y": p, "sigma": 0.1} for p in (0.9, 0.95, 1.0)]
    dataset = ScalingDataset.from_frame(pd.DataFrame(rows))
    with pytest.raises(FitError, match="overlap"):
        collapse(dataset, seed=0, bootstrap=0)


@pytest.mark.parametrize(
    "kwargs, match",
    [
        (dict(p=[0.1, 0.2], L=[8, 16], y=[0, 1], sigma=[0.1]), "equal length"),
        (dict(p=[0.1, 0.2], L=[8, 16], y=[0, 1], sigma=[0.1, 0.0]), "positive"),
        (dict(p=[0.1, 0.2], L=[8, 8], y=[0, 1], sigma=[0.1, 0.1]), "two sizes"),
        (dict(p=[0.1, 0.2], L=[8, 16], y=[0, 1], sigma=[0.1, 0.1], ansatz="log"), "ansatz"),
    ],
)
def test_dataset_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        ScalingDataset(**kwargs)


def test_from_frame():
    frame = pd.DataFrame({"p_M": [0.1, 0.2], "L": [6, 12], "Gpi": [0.5, 0.4], "err": [0.0, 0.1]})
    dataset = ScalingDataset.from_frame(frame, p="p_M", y="Gpi", sigma="err")
    np.testing.assert_array_equal(dataset.sigma, [1e-6, 0.1])
    assert len(dataset) == 2
    with pytest.raises(ValueError, match="not found"):
        ScalingDataset.from_frame(frame)


def test_collapsed_frame():
    dataset = ScalingDataset.from_frame(_synthetic())
    result = collapse(dataset, seed=0, bootstrap=0)
    frame = collapsed_frame(dataset, result)
    assert list(frame.columns) == ["L", "p", "x", "y_scaled", "sigma_scaled"]
    assert len(frame) == len(dataset)
    assert set(frame["L"]) == set(SIZES)
    assert result.to_dict()["ansatz"] == "plain"


@pytest.mark.slow
def test_percolation_correlation_exponent():
    table = spanning_table("square", [8, 16, 32], np.linspace(0.42, 0.58, 9), samples=1000, seed=4)
    dataset = ScalingDataset.from_frame(table, p="p_bond", y="spanning_probability", sigma="stderr",
                                        sigma_floor=1e-3)
    result = collapse(dataset, seed=0, bootstrap=10)
    assert result.p_c == pytest.approx(0.5, abs=0.01)
    assert result.nu == pytest.approx(4 / 3, abs=0.3)
