"""The compiled and pure-Python kernels must agree bit for bit."""
import numpy as np
import pytest

from availbound import _pykernels, kernels, rng
from availbound.model import ModelParams, SystemState

M = ModelParams.pareto(K1=4.0, K2=4.5, Lambda=5.0)
compiled = pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="extension not built")


def test_uniform_stream_matches_generator():
    s = rng.UniformStream(rng.bit_generator(1, "u"), block=7)
    ref = rng.generator(1, "u").random(50)
    assert [s.random() for _ in range(50)] == ref.tolist()


def test_streams_are_split_deterministically():
    a = rng.bit_generators(3, "name", 10, 5)
    b = [rng.bit_generator(3, "name", i) for i in range(10, 15)]
    assert all(x.random_raw() == y.random_raw() for x, y in zip(a, b))
    assert rng.bit_generator(3, "a").random_raw() != rng.bit_generator(3, "b").random_raw()


@compiled
@pytest.mark.parametrize("x,y", [(0.0, 1.0), (2.0, 5.0), (3.0, 3.0), (7.0, 1e-9)])
def test_splice_equivalence(x, y):
    a = _pykernels.splice_block(M, x, y, rng.bit_generator(1, "s"), 5000)
    b = kernels._ckernels.splice_block(M.K1, x, y, rng.bit_generator(1, "s"), 5000)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


@compiled
@pytest.mark.parametrize("z1,z2", [("1:0", "2:0"), ("1:3", "1:0.5"), ("2:1", "2:4")])
def test_coupling_equivalence(z1, z2):
    s1, s2 = SystemState.parse(z1), SystemState.parse(z2)
    a = _pykernels.coupling_block(M, rng.bit_generators(2, "c", 0, 400), int(s1.regime), s1.elapsed,
                                  int(s2.regime), s2.elapsed, 10**6)
    b = kernels._ckernels.coupling_block(M.K1, M.K2, rng.bit_generators(2, "c", 0, 400),
                                         int(s1.regime), s1.elapsed, int(s2.regime), s2.elapsed, 10**6)
    for p, q in zip(a, b):
        assert np.array_equal(p, q)


@compiled
def test_coupling_cap_equivalence():
    a = _pykernels.coupling_block(M, rng.bit_generators(2, "c", 0, 100), 1, 0.0, 2, 0.0, 2)
    b = kernels._ckernels.coupling_block(M.K1, M.K2, rng.bit_generators(2, "c", 0, 100), 1, 0.0, 2, 0.0, 2)
    assert a[2].sum() > 0
    for p, q in zip(a, b):
        assert np.array_equal(p, q)


@compiled
@pytest.mark.parametrize("equilibrium", [False, True])
def test_availability_equivalence(equilibrium):
    grid = np.linspace(0, 30, 61)
    n = 500
    r0, e0 = np.full(n, 2, dtype=np.int_), np.full(n, 0.7)
    a = _pykernels.availability_block(M, rng.bit_generators(4, "a", 0, n), r0, e0, equilibrium, grid)
    b = kernels._ckernels.availability_block(M.K1, M.K2, M.limiting_availability(),
                                             rng.bit_generators(4, "a", 0, n), r0, e0, equilibrium, grid)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_set_backend_roundtrip():
    prev = kernels.set_backend("python")
    try:
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.set_backend("fortran")
    finally:
        kernels.set_backend(prev)


def test_tabulated_models_use_python():
    from availbound.model import validate
    m = validate({"K1": 4, "K2": 4, "Lambda": 5, "work_family": "tabulated_hazard",
                  "work_table": [[0, 4.5], [1, 3.0], [4, 1.5], [8, 1.0]]})
    assert not kernels._compiled(m)
    counts, _ = kernels.availability_block(m, rng.bit_generators(1, "t", 0, 50),
                                           np.ones(50, dtype=np.int_), np.zeros(50), False, [0.0, 1.0])
    assert counts[0] == 50
