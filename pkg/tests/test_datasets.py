import collections
import itertools

import numpy as np
import pytest

from conformal_randomness.core import DataError, DomainError
from conformal_randomness.datasets import (
    Stream,
    StreamSpec,
    load_absenteeism,
    load_csv,
    load_usps,
    permute,
    read_stream,
    synth_stream,
)


def test_usps_fixture(fixtures):
    s = load_usps(fixtures / "usps_two.txt")
    assert len(s) == 2
    assert s.X.shape == (2, 256)
    assert s.y.tolist() == [3, 7]
    assert np.all(np.abs(s.X) <= 1)


def test_usps_short_line_names_line(fixtures):
    with pytest.raises(DataError, match=":2"):
        load_usps(fixtures / "usps_short_line.txt")


def test_usps_out_of_range(fixtures):
    with pytest.raises(DataError):
        load_usps(fixtures / "usps_out_of_range.txt")


def test_usps_header_and_libsvm(tmp_path, fixtures):
    body = (fixtures / "usps_two.txt").read_text()
    p = tmp_path / "with_header.txt"
    p.write_text("label " + " ".join(f"p{i}" for i in range(256)) + "\n" + body)
    assert np.array_equal(load_usps(p).X, load_usps(fixtures / "usps_two.txt").X)
    # LIBSVM layout: labels 1..10, sparse index:value pairs
    q = tmp_path / "usps.libsvm"
    q.write_text("4 1:0.5 256:-1\n10 3:0.25\n")
    s = load_usps(q)
    assert s.y.tolist() == [3, 9]
    assert s.X[0, 0] == 0.5 and s.X[0, 255] == -1 and s.X[1, 2] == 0.25


def test_usps_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_usps(tmp_path / "nope.txt")


def test_absenteeism_fixture(fixtures):
    s = load_absenteeism(fixtures / "absenteeism_small.csv")
    assert s.X.shape == (4, 3)
    assert s.X[1].tolist() == pytest.approx([1.0, 1 / 3, 1 / 4])  # Age 50 scales to 1
    assert s.y.tolist() == [0, 1, 0, 0]
    wide = load_absenteeism(fixtures / "absenteeism_small.csv", extra_attributes=True)
    assert wide.X.shape == (4, 5)
    assert np.array_equal(wide.y, s.y)
    assert wide.X[3, 3:].tolist() == [1.0, 1.0]


def test_absenteeism_comma_header_variants(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("Age,Disciplinary_failure,EDUCATION,Son\n25,0,3,4\n")
    s = load_absenteeism(p)
    assert s.X.tolist() == [[0.5, 1.0, 1.0]]


def test_absenteeism_missing_column(fixtures):
    with pytest.raises(DataError, match="Children"):
        load_absenteeism(fixtures / "absenteeism_missing_column.csv")


def test_loaders_deterministic(fixtures):
    a = load_absenteeism(fixtures / "absenteeism_small.csv")
    b = read_stream(fixtures / "absenteeism_small.csv", "absenteeism")
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_load_csv(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y,label\n0.5,1,0\n2,3,1\n")
    s = load_csv(p, labelled=True)
    assert s.X.tolist() == [[0.5, 1.0], [2.0, 3.0]] and s.y.tolist() == [0, 1]
    assert load_csv(p).X.shape == (2, 3)
    (tmp_path / "empty.csv").write_text("x\n")
    assert len(load_csv(tmp_path / "empty.csv")) == 0
    (tmp_path / "bad.csv").write_text("x\n1\nabc\n")
    with pytest.raises(DataError, match=":3"):
        load_csv(tmp_path / "bad.csv")


def test_permute_basics():
    s = Stream(np.arange(10.0), np.arange(10) % 3)
    a, b = permute(s, 5), permute(s, 5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert sorted(a.X[:, 0].tolist()) == list(range(10))
    # labels travel with their features
    assert np.array_equal(a.y, a.X[:, 0].astype(int) % 3)
    one = Stream([[4.0]], ["x"])
    assert permute(one, 0).X.tolist() == [[4.0]]


def test_permute_is_uniform_small_n():
    n, reps = 4, 24_000
    s = Stream(np.arange(float(n)))
    counts = collections.Counter()
    for seed in range(reps):
        twice = permute(permute(s, seed), seed + 10**6)
        counts[tuple(twice.X[:, 0].astype(int))] += 1
    assert set(counts) == set(itertools.permutations(range(n)))
    expected = reps / 24
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 49.7  # 99.9% point of chi-square with 23 degrees of freedom


def test_synthetic_streams():
    a = synth_stream(StreamSpec(100, "bernoulli:0.5", seed=3))
    b = synth_stream(StreamSpec(100, "bernoulli:0.5", seed=3))
    assert np.array_equal(a.X, b.X)
    assert set(np.unique(a.X)) <= {0.0, 1.0} and len(a) == 100
    all_post = synth_stream(StreamSpec(50, "normal:0,1", "normal:100,1", change_point=0, seed=1))
    assert all_post.X.min() > 90
    half = synth_stream(StreamSpec(50, "normal:0,1", "normal:100,1", change_point=25, seed=1))
    assert half.X[:25].max() < 10 < half.X[25:].min()
    lab = synth_stream(StreamSpec(20, "labelled:3,0.3", seed=2))
    assert lab.X.shape == (20, 3) and set(lab.y) <= {0, 1}


def test_synthetic_errors():
    with pytest.raises(DomainError):
        StreamSpec(10, change_point=3)
    with pytest.raises(DomainError):
        StreamSpec(10, post="uniform", change_point=-1)
    with pytest.raises(DomainError):
        synth_stream(StreamSpec(10, "poisson:3"))
    with pytest.raises(DomainError):
        synth_stream(StreamSpec(10, "uniform", "labelled:2,0.5", change_point=5))
