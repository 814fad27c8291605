"""Acceptance criteria, one test per criterion, each at its stated tolerance.

Each test prints one line ``criterion <k> <label>: PASS|FAIL ...`` (shown even
without ``-s``).  Statistical checks apply the three-seed rule inside
:mod:`mwhittaker.verify`.
"""

import pytest

from mwhittaker import verify

SEED = 0

CRITERIA = [
    (1, "gamma function consistency", ["gamma"]),
    (2, "sampler moments", ["sampler_moments"]),
    (3, "kernel relations", ["kernel_relations"]),
    (4, "normalisations", ["normalisations"]),
    (5, "intertwining", ["intertwining"]),
    (6, "eigenfunction equation", ["eigenfunction"]),
    (7, "Stade identity", ["stade"]),
    (8, "Whittaker asymptotics", ["asymptotics"]),
    (9, "energy minimiser", ["energy_minimiser"]),
    (10, "Laplace integral", ["laplace"]),
    (11, "polymer oracles", ["polymer"]),
    (12, "Dufresne identity", ["dufresne_d1", "dufresne_d2"]),
    (13, "Feynman-Kac", ["feynman_kac"]),
    (14, "fixed-time law and edge marginals", ["fixed_time_law", "right_marginal", "left_marginal"]),
    (15, "bottom-edge Markovianity", ["bottom_markov"]),
    (16, "Cauchy-Littlewood and Pieri", ["schur"]),
]


def _summary(rep):
    p = "" if rep.p_value is None else f" p={rep.p_value:.3g}"
    return f"{rep.name} stat={rep.statistic:.3g} thr={rep.threshold:.3g}{p} ({rep.runtime_ms / 1e3:.1f}s)"


@pytest.mark.slow
@pytest.mark.parametrize("number,label,names", CRITERIA, ids=[f"c{c[0]:02d}-{c[2][0]}" for c in CRITERIA])
def test_criterion(number, label, names, capsys):
    reports = [verify.run(n, seed=SEED) for n in names]
    ok = all(r.passed for r in reports)
    line = f"criterion {number} {label}: {'PASS' if ok else 'FAIL'} " + "; ".join(_summary(r) for r in reports)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line
