import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from zkw.resonance import (FreqPair, SurfacePoint, normals_det, resonance_Phi, resonance_Phi_hat,
                           surface_normal, transversality_det, transversality_F)
from zkw.spectral_lattice import dispersion_phi, dispersion_psi_sym

reals = st.floats(-20, 20, allow_nan=False)
pairs = st.tuples(reals, reals)


@pytest.mark.parametrize("N", [1, 3, 8, 64])
def test_symmetrized_triple_is_resonant_and_transverse(N):
    p = FreqPair((N, -N), (N, 2 * N))
    assert resonance_Phi(p) == 0
    assert transversality_F(p) == 3 * N * N


def test_polynomial_examples():
    assert resonance_Phi((0, 0), (2.5, -1.0)) == 0
    assert resonance_Phi((1, 2), (3, 4)) == 60
    assert transversality_F((0, 0), (0, 0)) == 0
    assert transversality_F((1, 0), (0, 1)) == 1
    assert resonance_Phi_hat((0, 0), (3.0, 7.0)) == 0
    assert resonance_Phi_hat((1, 1), (1, 1)) == 12
    assert dispersion_phi((2, 2)) - 2 * dispersion_phi((1, 1)) == 12


@pytest.mark.parametrize("N", [2, 16, 100])
def test_norm_inflation_modes_are_resonant(N):
    assert resonance_Phi_hat((0, 2), (N, -1)) == 0
    assert dispersion_phi((N, 1)) - dispersion_phi((0, 2)) - dispersion_phi((N, -1)) == 0


@given(pairs, pairs)
def test_phi_hat_is_the_phi_defect(k1, k2):
    k3 = (k1[0] + k2[0], k1[1] + k2[1])
    oracle = dispersion_phi(k3) - dispersion_phi(k1) - dispersion_phi(k2)
    assert resonance_Phi_hat(k1, k2) == pytest.approx(oracle, rel=1e-9, abs=1e-6)


@given(pairs, pairs)
def test_phi_is_a_third_of_the_psi_sym_defect(k1, k2):
    k3 = (k1[0] + k2[0], k1[1] + k2[1])
    oracle = (dispersion_psi_sym(k3) - dispersion_psi_sym(k1) - dispersion_psi_sym(k2)) / 3
    assert resonance_Phi(k1, k2) == pytest.approx(oracle, rel=1e-9, abs=1e-6)


@given(pairs, pairs)
def test_polynomials_are_symmetric(k1, k2):
    assert resonance_Phi(k1, k2) == pytest.approx(resonance_Phi(k2, k1), rel=1e-12, abs=1e-9)
    assert transversality_F(k1, k2) == pytest.approx(transversality_F(k2, k1), rel=1e-12, abs=1e-9)


def test_normal_examples():
    assert np.allclose(surface_normal((0.0, 0.0)), (-1, 0, 0))
    assert np.allclose(surface_normal(SurfacePoint((1.0, 0.0))), np.array([-1, 3, 0]) / math.sqrt(10))


@given(st.floats(-3, 3), st.floats(-3, 3), st.sampled_from(["phi", "psi_sym"]))
def test_normal_is_unit_and_tangent(x, y, symbol):
    n = surface_normal((x, y), symbol)
    assert np.linalg.norm(n) == pytest.approx(1.0, rel=1e-12)
    psi = dispersion_phi if symbol == "phi" else dispersion_psi_sym
    # the normal annihilates the tangent chord up to O(delta^2); the chord is (tau, xi, eta)
    for d in (1e-3, 5e-4):
        for chord in ((psi((x + d, y)) - psi((x, y)), d, 0.0), (psi((x, y + d)) - psi((x, y)), 0.0, d)):
            assert abs(np.dot(n, chord)) <= 40 * d * d * (1 + abs(x) + abs(y))


def test_det_examples():
    assert transversality_det((1.0, 2.0), (1.0, 2.0), (1.0, 2.0)) == pytest.approx(0.0, abs=1e-15)
    e = np.eye(3)
    assert normals_det(e[:, 0], e[:, 1], e[:, 2]) == 1.0


@pytest.mark.parametrize("N", [8, 16, 32])
def test_sharpness_triple_is_transverse_at_unit_scale(N):
    # evaluated on the rescaled points k / N
    pts = [(N, -N), (N, 2 * N), (2 * N, N)]
    d = transversality_det(*[(a / N, b / N) for a, b in pts], symbol="psi_sym")
    assert abs(d) >= 0.1


def test_det_broadcasts():
    x = np.linspace(0.1, 1.0, 5)
    d = transversality_det((x, 0 * x), (0 * x, x), (x, x))
    single = [transversality_det((v, 0.0), (0.0, v), (v, v)) for v in x]
    assert np.allclose(d, single, rtol=1e-14, atol=0)
