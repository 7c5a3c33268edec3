"""Smoke test for the qcorr Python extension.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import json
import math

import numpy as np

import qcorr


def ket0():
    return qcorr.State([[1, 0], [0, 0]], [2])


def bell():
    v = np.zeros(4, dtype=complex)
    v[0] = v[3] = 1 / math.sqrt(2)
    return qcorr.State(np.outer(v, v.conj()).tolist(), [2, 2])


def vn_cond_entropy(rho, da, db):
    """Independent numpy oracle for H(A|B)."""

    def s(m):
        w = np.linalg.eigvalsh(m)
        w = w[w > 1e-12]
        return float(-(w * np.log2(w)).sum())

    r = np.array(rho).reshape(da, db, da, db)
    rho_b = np.einsum("ijik->jk", r)
    return s(np.array(rho)) - s(rho_b)


def main():
    x, y, z = qcorr.pauli_pvms()

    # Premeasuring |0> in the X basis gives a maximally entangled state.
    pre = qcorr.premeasure(ket0(), x)
    assert abs(qcorr.cond_entropy(pre) + 1.0) < 1e-10
    cert = qcorr.certify_collapse(pre, "vn")
    assert cert["collapsed"] and abs(cert["lower"] - 1.0) < 1e-8

    # Z basis: product state, nothing to collapse to but zero.
    flat = qcorr.premeasure(ket0(), z)
    assert abs(qcorr.cond_entropy(flat)) < 1e-10

    # Conditional entropy against the numpy oracle.
    rho = qcorr.State.random([2, 3], "random", 11)
    assert abs(qcorr.cond_entropy(rho) - vn_cond_entropy(rho.matrix(), 2, 3)) < 1e-9

    # Two-way delta of a Bell state is one bit.
    rep = qcorr.measure(bell(), "delta2")
    assert abs(rep["value"] - 1.0) < 1e-8, rep

    cls = qcorr.classify(bell())
    assert cls["mq"] and not cls["separable"]

    chk = qcorr.check_eur("sanchez", ket0(), [x, y, z])
    assert chk["pass"] and abs(chk["lhs"] - 2.0) < 1e-12

    game = qcorr.play_game(ket0(), rounds=10)
    assert abs(game["total_yield"] - 20.0) < 1e-9 and game["verdict"] == "bound_met"

    assert abs(qcorr.overlap_c(x, z) - 0.5) < 1e-12

    smooth = qcorr.smooth_cond_entropy(pre, "min", 0.0)
    assert abs(smooth["value"] + 1.0) < 1e-6

    back = qcorr.State.from_json(rho.to_json())
    assert back.dims == [2, 3] and np.allclose(back.matrix(), rho.matrix(), atol=0)
    json.loads(rho.to_json())

    try:
        qcorr.certify_collapse(qcorr.State((np.eye(4) / 4).tolist(), [2, 2]), "vn")
    except ValueError as e:
        assert "measured-quantum" in str(e)
    else:
        raise AssertionError("maximally mixed state is not a premeasurement state")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
