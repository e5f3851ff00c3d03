import numpy as np
import pytest

from gramphase import (
    LinearSubspacePrior,
    RepresentationStructure,
    SparsityPrior,
    SupportPrior,
    cyclic_structure,
    full_ambiguity_action,
    gram_tuple,
    random_signal,
    sample_observations,
)
from gramphase import serialize as ser


def test_structure_roundtrip():
    for s in (
        RepresentationStructure(((8, 4),)),
        cyclic_structure(7, "real"),
        RepresentationStructure(((2, 1), (3, 3)), "complex"),
    ):
        d = ser.structure_to_dict(s)
        assert set(d) == {"field", "blocks"}
        assert ser.structure_from_dict(d) == s


def test_signal_and_gram_roundtrip(tmp_path):
    for field in ("real", "complex"):
        s = RepresentationStructure(((3, 2), (1, 1)), field)
        x = random_signal(s, np.random.default_rng(0))
        path = tmp_path / f"sig_{field}.json"
        ser.save_json(path, ser.signal_to_dict(x))
        back = ser.signal_from_dict(ser.load_json(path))
        for a, b in zip(x.matrices, back.matrices):
            np.testing.assert_array_equal(a, b)
        g = gram_tuple(x)
        back_g = ser.gram_from_dict(ser.gram_to_dict(g))
        for a, b in zip(g.grams, back_g.grams):
            np.testing.assert_array_equal(a, b)


def test_prior_roundtrip():
    basis = np.linalg.qr(np.random.default_rng(1).standard_normal((6, 2)))[0]
    priors = [
        LinearSubspacePrior(basis),
        SparsityPrior(3),
        SparsityPrior(2, dictionary=np.eye(6)),
        SupportPrior(np.array([True, False, True])),
    ]
    for p in priors:
        q = ser.prior_from_dict(ser.prior_to_dict(p))
        assert type(q) is type(p)
    q = ser.prior_from_dict(ser.prior_to_dict(priors[0]))
    np.testing.assert_array_equal(q.basis, basis)


def test_matrix_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    real = rng.standard_normal((4, 3))
    cplx = real + 1j * rng.standard_normal((4, 3))
    for name, m in (("r.csv", real), ("c.csv", cplx)):
        path = tmp_path / name
        ser.write_matrix_csv(path, m, comments=["unit=test"])
        back = ser.read_matrix_csv(path)
        np.testing.assert_array_equal(back, m)
        header, _, comments = ser.read_csv(path)
        assert comments == ["unit=test"]


def test_basis_loadable_from_csv(tmp_path):
    basis = np.linalg.qr(np.random.default_rng(3).standard_normal((5, 2)))[0]
    path = tmp_path / "basis.csv"
    ser.write_matrix_csv(path, basis)
    prior = LinearSubspacePrior(ser.read_matrix_csv(path))
    np.testing.assert_array_equal(prior.basis, basis)


def test_samples_csv(tmp_path):
    s = RepresentationStructure(((2, 2),))
    x = random_signal(s, np.random.default_rng(4))
    samples = sample_observations(x, full_ambiguity_action(s), 0.1, 7, seed=5)
    path = tmp_path / "samples.csv"
    ser.write_samples_csv(path, samples)
    back = ser.read_matrix_csv(path)
    np.testing.assert_array_equal(back, samples.observations)
    _, _, comments = ser.read_csv(path)
    assert any(c.startswith("sigma=0.1") for c in comments)
    assert any(c.startswith("n=7") for c in comments)


def test_csv_bytes_are_reproducible(tmp_path):
    rows = [{"a": 0.1 + 0.2, "b": 3, "c": True}, {"a": 1e-17, "b": -1, "c": False}]
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    ser.write_csv(p1, ["a", "b", "c"], rows, comments=["h=x"])
    ser.write_csv(p2, ["a", "b", "c"], rows, comments=["h=x"])
    assert p1.read_bytes() == p2.read_bytes()
    # shortest roundtrip float text survives parsing
    header, parsed, _ = ser.read_csv(p1)
    assert float(parsed[0][0]) == 0.1 + 0.2
