import json
import math

import jsonschema
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mecavity import effects
from mecavity.effects import (BAR, Conditions, CoefficientRecord, delta_n_meda, delta_n_melb,
                              jones_from_melb, lookup_coefficient, melb_response,
                              scale_coefficient, verify_equivalence_construction)

TABLE_1 = {
    "vacuum": (2.7e-32, -6.7e-32),
    "He": (1.6e-24, None),
    "H": (3.4e-23, None),
    "Ne": (4.2e-24, None),
    "Ar": (3.6e-23, None),
    "Kr": (7.8e-23, None),
    "H2": (4.8e-23, None),
    "N2": (9.0e-23, None),
    "CO": (1.4e-22, None),
}

finite = st.floats(-1e3, 1e3, allow_nan=False)


@pytest.mark.parametrize("medium", TABLE_1)
def test_table_round_trip(medium):
    rec = lookup_coefficient(medium)
    assert (rec.eta_melb, rec.eta_meda) == TABLE_1[medium]


def test_reference_conditions():
    n2 = lookup_coefficient("N2")
    assert (n2.ref_pressure, n2.ref_temperature, n2.ref_wavelength) == (1e5, 293.0, 632.8e-9)
    vac = lookup_coefficient("vacuum")
    assert vac.ref_pressure is None and vac.ref_temperature is None


def test_lookup_aliases_and_unknown():
    assert lookup_coefficient("nitrogen") is lookup_coefficient("n2")
    with pytest.raises(effects.UnknownMediumError, match="N2"):
        lookup_coefficient("xenon")


def test_scale_coefficient():
    n2 = lookup_coefficient("N2")
    assert scale_coefficient(n2, Conditions(BAR, 293.0))[0] == 9.0e-23
    assert scale_coefficient(n2, Conditions(0.5 * BAR, 293.0))[0] == pytest.approx(4.5e-23, rel=1e-15)
    vac = lookup_coefficient("vacuum")
    assert scale_coefficient(vac, Conditions(1.0, 10.0)) == (2.7e-32, -6.7e-32)


@given(p1=st.floats(1, 1e6), t1=st.floats(10, 1000), p2=st.floats(1, 1e6), t2=st.floats(10, 1000))
def test_scaling_composes(p1, t1, p2, t2):
    n2 = lookup_coefficient("N2")
    once, _ = scale_coefficient(n2, Conditions(p2, t2))
    mid, _ = scale_coefficient(n2, Conditions(p1, t1))
    rec = CoefficientRecord("N2@1", mid, ref_pressure=p1, ref_temperature=t1)
    twice, _ = scale_coefficient(rec, Conditions(p2, t2))
    assert twice == pytest.approx(once, rel=1e-12)


def test_conditions_validation():
    with pytest.raises(ValueError):
        Conditions(-1.0, 293.0)
    with pytest.raises(ValueError):
        Conditions(1e5, 0.0)


def test_delta_n_melb_values():
    assert delta_n_melb("N2", 1.0, 1.0) == 9.0e-23
    assert delta_n_melb("N2", 0.85, 3.5e5) == pytest.approx(2.7e-17, rel=0.01)
    assert delta_n_melb("CO", 0.0, 1e6) == 0.0


def test_delta_n_meda_values():
    assert delta_n_meda("vacuum", 15.0, 2e7) == pytest.approx(-2.01e-23, rel=1e-12)
    assert delta_n_meda("N2", 0.85, 3.5e5, meda_ratio=1.0) == pytest.approx(2.7e-17, rel=0.01)
    assert delta_n_meda("N2", 0.85, 0.0, meda_ratio=3.0) == 0.0
    with pytest.raises(effects.MissingRatioError):
        delta_n_meda("N2", 1.0, 1.0)


@given(B=finite, E=finite, a=finite, b=finite)
def test_bilinearity(B, E, a, b):
    for f in (lambda B, E: delta_n_melb("Ar", B, E), lambda B, E: delta_n_meda("vacuum", B, E)):
        assert f(a * B, b * E) == pytest.approx(a * b * f(B, E), rel=1e-12, abs=1e-300)


@given(B=finite, E=finite)
def test_meda_antisymmetry(B, E):
    d = delta_n_meda("Kr", B, E, meda_ratio=2.0)
    assert delta_n_meda("Kr", -B, E, meda_ratio=2.0) == -d
    assert delta_n_meda("Kr", B, -E, meda_ratio=2.0) == -d


def test_jones_from_melb():
    j = jones_from_melb(9.0e-23)
    assert j.delta_n == 9.0e-23 and j.eigenaxes_deg == (45.0, -45.0)
    assert jones_from_melb(0.0).delta_n == 0.0
    assert jones_from_melb(-3e-20).delta_n == -3e-20
    assert "counterclockwise" in j.convention


def test_equivalence_unit_response():
    # hand calculation: crossed (E x, B y) tensor diag(0, 1); rotated+inverted
    # tensor diag(-1, 0); half their sum is diag(-1/2, 1/2) with the fields at 45 deg
    rep = verify_equivalence_construction(melb_response(1.0))
    np.testing.assert_allclose(rep.tensor, [[-0.5, 0.0], [0.0, 0.5]], atol=1e-15)
    assert rep.field_angle == pytest.approx(math.pi / 4)
    assert rep.eigenaxes == pytest.approx((math.pi / 4, -math.pi / 4), abs=1e-12)
    assert rep.delta_n_jones == pytest.approx(1.0, rel=1e-12)
    assert rep.passed


def test_equivalence_zero_response():
    rep = verify_equivalence_construction(effects.BilinearResponse(lambda b, e: np.zeros((2, 2))))
    assert rep.passed and rep.eigenaxes is None and rep.delta_n_jones == 0.0


def test_equivalence_rejects_parallel_axis_term():
    with pytest.raises(effects.InvariantViolation):
        verify_equivalence_construction(melb_response(1.0, parallel_axis=1e-3))


def test_equivalence_rejects_non_bilinear():
    quadratic = effects.BilinearResponse(lambda b, e: float(b @ b) * melb_response(1.0)(b, e))
    with pytest.raises(effects.InvariantViolation, match="bilinear"):
        verify_equivalence_construction(quadratic)


@settings(max_examples=200)
@given(dn=st.floats(-1, 1).filter(lambda x: abs(x) > 1e-12), iso=st.floats(-1, 1))
def test_equivalence_random(dn, iso):
    rep = verify_equivalence_construction(melb_response(dn, isotropic=iso))
    assert rep.passed
    assert rep.delta_n_jones == pytest.approx(dn, rel=1e-12)


def test_load_table_override(tmp_path):
    doc = [{"medium": "SF6", "eta_melb": 5e-22, "eta_meda": 1e-21, "ref_pressure": 1e5,
            "ref_temperature": 293.0, "ref_wavelength": 632.8e-9}]
    path = tmp_path / "coeffs.json"
    path.write_text(json.dumps(doc))
    table = effects.load_table(path)
    assert lookup_coefficient("SF6", table).eta_meda == 1e-21
    assert lookup_coefficient("N2", table).eta_melb == 9.0e-23
    assert delta_n_meda("SF6", 1.0, 2.0, table=table) == 2e-21
    with pytest.raises(jsonschema.ValidationError):
        effects.load_table([{"medium": "X"}])


def test_builtin_records_validate_against_schema():
    jsonschema.validate([r.to_dict() for r in effects.BUILTIN_TABLE.values()],
                        effects.TABLE_SCHEMA)
