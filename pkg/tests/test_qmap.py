import math

import numpy as np
import pytest

from nonlocal_atlas import QTable, certify_monotone, make_functional, q_eval, q_eval_extended, q_inverse, tabulate_q
from nonlocal_atlas.errors import DomainError, NotMonotoneError, ParameterError
from nonlocal_atlas.qmap import from_t, to_t

from conftest import make_nl


@pytest.fixture(scope="module")
def power_table(mesh):
    g = make_functional("lp_of_u", gamma=2)
    return tabulate_q(mesh, make_nl("power", {"p": 1.5}), g, n=32, q_low=1e-6, q_high=1e3)


def test_mapped_coordinate_round_trip():
    for lo, hi in ((0.0, math.inf), (2.0, math.inf), (2.0, 20.0)):
        s = np.array([lo + 0.1, lo + 1.0, (lo + 5.0) if math.isinf(hi) else 0.5 * (lo + hi)])
        np.testing.assert_allclose(from_t(to_t(s, lo, hi), lo, hi), s, rtol=1e-13)


def test_table_reaches_targets(power_table):
    assert power_table.q[0] < 1e-6 and power_table.q[-1] > 1e3
    assert power_table.monotone


def test_interpolation_between_samples(power_table):
    # Q is exactly a power of s here, so interpolation error is visible
    s = np.sqrt(power_table.s[10:20] * power_table.s[11:21])
    ref = power_table.q[10] * (s / power_table.s[10]) ** 4
    np.testing.assert_allclose(q_eval(power_table, s), ref, rtol=1e-5)
    assert q_eval(power_table, power_table.s[7]) == power_table.q[7]


def test_strict_and_extended_evaluation(power_table):
    with pytest.raises(DomainError):
        q_eval(power_table, power_table.s[-1] * 2)
    assert q_eval_extended(power_table, 0.0) == 0.0
    assert math.isinf(q_eval_extended(power_table, math.inf))
    beyond = q_eval_extended(power_table, power_table.s[-1] * 1.1)
    assert beyond == pytest.approx(power_table.q[-1] * 1.1**4, rel=1e-6)


def test_inverse_round_trip(power_table):
    alpha = np.geomspace(power_table.q[1], power_table.q[-2], 25)
    np.testing.assert_allclose(q_eval(power_table, q_inverse(power_table, alpha)), alpha, rtol=1e-10)
    with pytest.raises(DomainError):
        q_inverse(power_table, power_table.q[-1] * 10)


def test_dip_is_certified_and_blocks_inverse():
    s = np.linspace(1.0, 20.0, 20)
    q = s.copy()
    q[9] = q[8] - 0.1
    table = QTable.from_samples(s, q, lo=0.0, hi=math.inf)
    cert = certify_monotone(table)
    assert not cert["monotone"]
    # the violation names the first sample of the decreasing pair
    assert cert["violation"]["index"] == 8
    with pytest.raises(NotMonotoneError):
        q_inverse(table, 5.0)


def test_too_few_samples(mesh):
    with pytest.raises(ParameterError):
        tabulate_q(mesh, make_nl("power", {"p": 1.5}), make_functional("lp_of_u", gamma=1), n=4)


def test_threads_give_identical_tables(small_mesh):
    nl = make_nl("arctan", {"theta0": 0.5, "beta0": 3.0})
    g = make_functional("lp_of_grad", gamma=2)
    a = tabulate_q(small_mesh, nl, g, n=24)
    b = tabulate_q(small_mesh, nl, g, n=24, threads=4)
    np.testing.assert_array_equal(a.q, b.q)


def test_saturating_low_end_vanishes(mesh):
    # Q -> 0 as s approaches lambda1 / beta from above
    nl = make_nl("saturating", {"beta0": 2.0})
    table = tabulate_q(mesh, nl, make_functional("lp_of_u", gamma=2), n=24, q_low=1e-6)
    assert table.q[0] < 1e-6
    assert table.s[0] > mesh.eigenpair.eigenvalue / 2
