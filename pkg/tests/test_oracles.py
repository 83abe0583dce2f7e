import numpy as np
import pytest

from parabolab import build_ball_grid, make_case
from parabolab.contact import contact_set
from parabolab.oracles import (
    decay_from_openings,
    fit_power,
    minimal_opening,
    quadratic_lower_complement,
)

# Per-node minimal opening of the cone on 65^2, ladder 2^{k/2}, k = 0..8,
# computed once with the brute-force oracle and frozen here.
CONE_65 = [2.8720703125, 0.6572265625, 0.1337890625, 0.0205078125, 0.0009765625]
TS = [1.0, 2.0, 4.0, 8.0, 16.0]


@pytest.fixture(scope="module")
def cone_openings():
    spec = build_ball_grid(2, 65)
    u = make_case("cone").sample(spec)
    return spec, u, minimal_opening(u, 2.0 ** (np.arange(9) / 2), "upper")


def test_cone_oracle_frozen(cone_openings):
    spec, _, op = cone_openings
    assert decay_from_openings(op, spec, TS).tolist() == CONE_65


def test_fast_path_matches_oracle(cone_openings):
    spec, u, _ = cone_openings
    fast = [contact_set(u, t, direction="upper").complement_measure() for t in TS]
    assert fast == CONE_65


def test_oracle_fit(cone_openings):
    assert fit_power(TS[1:4], CONE_65[1:4]) == pytest.approx(2.50, abs=0.01)


def test_fit_power_exact():
    ts = np.array([1.0, 2.0, 4.0])
    assert fit_power(ts, 3 * ts**-1.5) == pytest.approx(1.5)
    assert np.isnan(fit_power(ts, [1.0, 0.0, 0.0]))


def test_quadratic_closed_form():
    # |B_1| (1 - (k/(k+a))^2) in 2-D
    assert quadratic_lower_complement(1.0, 1.0) == pytest.approx(np.pi * 0.75)
    big = quadratic_lower_complement(1.0, np.array([1e3, 1e4]))
    # the complement decays like 2 pi a / kappa
    np.testing.assert_allclose(big * np.array([1e3, 1e4]), 2 * np.pi, rtol=2e-3)
