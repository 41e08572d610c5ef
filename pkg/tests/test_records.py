import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anls import potential as pt
from anls import records
from anls.errors import ParameterError, ShapeError
from anls.harmonic import FourierField

from conftest import random_field


@settings(max_examples=30, deadline=None)
@given(M=st.integers(1, 64), seed=st.integers(0, 2**32 - 1), real=st.booleans())
def test_round_trip_is_exact(M, seed, real):
    u = random_field(np.random.default_rng(seed), M, real=real)
    back = records.from_record(json.loads(records.dumps(records.to_record(u))))
    assert np.array_equal(back.coeffs, u.coeffs) and back.reality == u.reality


def test_canonical_text(tmp_path):
    u = FourierField.mode(2, 1, 0.5 - 0.25j)
    p = records.save_field(tmp_path / "u.json", u, {"b": 1, "a": 2})
    text = p.read_text()
    assert text.endswith("}\n") and text == records.dumps(json.loads(text))
    assert json.loads(text)["coeffs"] == [0, 0, 0, 0, 0, 0, 0.5, -0.25, 0, 0]
    assert records.load_record(p)["meta"] == {"a": 2, "b": 1}


@pytest.mark.parametrize("mutate", [
    lambda r: r.pop("coeffs"),
    lambda r: r.update(schema="anls.field/2"),
    lambda r: r.update(max_freq=0),
    lambda r: r.update(extra=1),
    lambda r: r.update(coeffs=["x"] * 10),
])
def test_invalid_records(mutate):
    rec = records.to_record(FourierField.mode(2, 1))
    mutate(rec)
    with pytest.raises(ParameterError):
        records.from_record(rec)


def test_length_mismatch():
    rec = records.to_record(FourierField.mode(2, 1))
    rec["max_freq"] = 3
    with pytest.raises(ShapeError):
        records.from_record(rec)


def test_potential_sidecar(tmp_path):
    V = pt.white_noise(16, 5)
    path, side = records.save_potential(tmp_path / "V.json", V)
    assert side.name == "V.meta.json"
    assert json.loads(side.read_text()) == {"kind": "white_noise", "kappa": 0.49, "seed": 5, "M": 16}
    W = records.load_potential(path)
    assert np.array_equal(W.field.coeffs, V.field.coeffs)
    assert (W.kind, W.seed, W.kappa_nominal) == ("white_noise", 5, 0.49)


def test_custom_field_needs_kappa(tmp_path):
    u = FourierField.real(4, np.ones(9))
    p = records.save_field(tmp_path / "u.json", u)
    with pytest.raises(ParameterError):
        records.load_potential(p)
    assert records.load_potential(p, kappa=0.3).kappa_nominal == 0.3


def test_complex_potential_rejected(tmp_path):
    p = records.save_field(tmp_path / "u.json", FourierField.mode(4, 1))
    with pytest.raises(ParameterError):
        records.load_potential(p, kappa=0.5)
