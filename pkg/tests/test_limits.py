import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nematic_interface import limits as lm
from nematic_interface.profile import solve_profile
from nematic_interface.qtensor import BulkParams

finite = st.floats(-3, 3, allow_nan=False)


def test_oseen_frank_golden():
    assert lm.oseen_frank(1, 0, 0, 1) == lm.OseenFrankConstants(2, 2, 2, 0)
    k = lm.oseen_frank(0.5, 0.2, 0.1, 2)
    assert k.k2 == 4 and k.k4 == pytest.approx(0.4, abs=1e-15) and k.k1 == pytest.approx(5.2, abs=1e-14)


@given(finite, finite, finite, st.floats(0.01, 3))
def test_oseen_frank_structure(L1, L2, L3, s):
    k = lm.oseen_frank(L1, L2, L3, s)
    assert k.k1 == k.k3
    k2 = lm.oseen_frank(L1, L2, L3, 2 * s)
    for a, b in zip(k2.as_dict().values(), k.as_dict().values()):
        assert a == 4 * b


def test_leslie_golden():
    assert lm.leslie(1, 1).as_tuple() == (-2, -2, 0, 1, 2, 0)
    s = 0.7
    assert lm.leslie(0, s).as_tuple() == (0, -s * s, s * s, 1, 0, 0)


def test_parodi_sweep():
    rng = np.random.default_rng(0)
    for xi, s in zip(rng.uniform(-2, 2, 100), rng.uniform(0.1, 2, 100)):
        a = lm.leslie(xi, s)
        assert abs(a.parodi_residual()) <= 1e-14
        assert a.alpha2 + a.alpha3 == pytest.approx(-2 * xi * s * (2 + s) / 3, abs=1e-14)


@given(st.floats(-2, 2), st.floats(0.1, 2))
@settings(max_examples=200)
def test_alpha3_minus_alpha2(xi, s):
    a = lm.leslie(xi, s)
    assert a.alpha3 - a.alpha2 == pytest.approx(2 * s * s, rel=1e-14, abs=1e-15)


def test_predicted_jumps():
    prof = solve_profile(BulkParams(1 / 3, 3, 1))
    j = lm.predicted_jumps(prof, 1 / 0.3)
    assert j["p_minus1_jump"] == pytest.approx(-1 / (9 * math.sqrt(3)) / 0.3, abs=1e-7)
    assert j["p_minus1_jump"] == pytest.approx(-0.213833, abs=1e-6)
    assert j["p_minus2_jump"] == 0 and j["v_jump"] == 0
    flat = lm.predicted_jumps(prof, 0.0)
    assert flat["p_minus1_jump"] == 0 and flat["p_minus2_jump"] == 0 and flat["v_jump"] == 0
    assert lm.predicted_jumps(prof, 2.0, xi=1.0)["v_jump"] is None


def test_limit_systems_doc():
    doc = lm.limit_systems_doc(0.0, 1.0)
    terms = doc["nematic_region"]["sigma_L"]
    assert [(t["coefficient"], t["term"]) for t in terms] == [(1.0, "nN"), (-1.0, "Nn"), (1.0, "D^(0)")]
    assert doc["isotropic_region"]["stress"] == ["D^(0)"]
    assert doc["nematic_region"]["director"] == "n×(−Δn + N − D·n) = 0"
    assert doc["interface"]["velocity_jump"] == "[v] = 0"
    assert len(lm.limit_systems_doc(1.0, 1.0)["nematic_region"]["sigma_L"]) == 4
