import numpy as np
import pytest

from mwhittaker.rand import RngStream
from mwhittaker.spd import random_spd
from mwhittaker.triangle import TriangularArray, energy, flat_index, log_delta


def scalar_array(rows):
    return TriangularArray([np.asarray(r, dtype=float)[:, None, None] for r in rows])


def test_flat_layout():
    assert [flat_index(i, j) for i in range(1, 4) for j in range(1, i + 1)] == list(range(6))
    x = scalar_array([[1.0], [2.0, 3.0], [4.0, 5.0, 6.0]])
    assert x.to_flat().tolist() == [1, 2, 3, 4, 5, 6]
    y = TriangularArray.from_flat(x.to_flat(), 3)
    assert np.array_equal(y.to_flat(), x.to_flat())


def test_shape_validation():
    with pytest.raises(ValueError):
        TriangularArray([np.ones((2, 1, 1))])


def test_log_delta():
    x = TriangularArray.constant(3, 2)
    assert log_delta([0.4, -1.0, 2.0], x) == pytest.approx(0.0)
    a, z1, z2 = 1.7, 0.6, 2.5
    x = scalar_array([[a], [z1, z2]])
    assert log_delta([0.0, 0.0], x) == 0.0
    assert log_delta([1.0, 1.0], x) == pytest.approx(-np.log(z1 * z2))


def test_energy():
    assert energy(TriangularArray.constant(1, 2)) == 0.0
    assert energy(TriangularArray.constant(2, 3)) == pytest.approx(6.0)
    assert energy(TriangularArray.constant(3, 1)) == pytest.approx(6.0)


def test_energy_agrees_with_graph_energy():
    from mwhittaker.energy import energy_Phi, triangular_graph

    rng = RngStream(3, 0)
    rows = [random_spd(2, rng, size=i) for i in (1, 2, 3)]
    x = TriangularArray(rows)
    g = triangular_graph(3, list(rows[2]))
    free = [x.entry(*v) for v in g.free]
    assert energy(x) == pytest.approx(energy_Phi(g, free), rel=1e-12)
