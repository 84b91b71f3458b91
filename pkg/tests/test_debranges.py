import numpy as np
import pytest

from diracnlft.debranges import (
    estimate_w,
    gamma_factor,
    hb_exp_fit,
    hb_sine_fit,
    kernel_K,
    kernel_probe,
    kernel_sinc,
    universality_gap,
)
from diracnlft.errors import PreconditionError, RangeError, ValidationError
from diracnlft.potential import SampledPotential

TALL_ZERO = 2.4517263992197713 + 0.8301314959136796j


# ---------------------------------------------------------------------------
# sinc kernel
# ---------------------------------------------------------------------------


def test_sinc_diagonal_and_shape():
    assert kernel_sinc(3.0, 1.5, 1.5) == pytest.approx(3.0 / np.pi, abs=1e-15)
    lam = np.array([0.0, 1.0, 2.0])
    out = kernel_sinc(2.0, lam[:, None], lam[None, :])
    assert out.shape == (3, 3)
    assert np.allclose(np.diag(out), 2.0 / np.pi)


def test_sinc_series_continuity():
    # straddle the Taylor switch |t d| = 1e-4
    t = 1.0
    for eps in (0.9e-4, 1.1e-4):
        direct = np.sin(t * eps) / (np.pi * eps)
        got = kernel_sinc(t, 0.0, eps)
        assert abs(got - direct) < 1e-16 * 10


def test_sinc_hermitian():
    lam, z = 0.7 + 0.2j, -0.3 + 0.5j
    assert kernel_sinc(2.0, lam, z) == pytest.approx(
        np.conj(kernel_sinc(2.0, z, lam)), abs=1e-15
    )


def test_sinc_validation():
    with pytest.raises(ValidationError):
        kernel_sinc(0.0, 1.0, 2.0)


# ---------------------------------------------------------------------------
# reproducing kernel
# ---------------------------------------------------------------------------


def test_free_kernel_is_the_sinc(free_pot):
    pts = [0.0, 0.8, -1.3, 0.4 + 0.3j, -0.2 - 0.4j]
    t = 2.0
    worst = 0.0
    for lam in pts:
        for z in pts:
            got = kernel_K(free_pot, t, lam, z)
            want = kernel_sinc(t, lam, z)
            worst = max(worst, abs(got - want))
    assert worst < 1e-12


def test_kernel_hermitian_symmetry_is_exact(const_pot):
    # conj A(p) = A(conj p) holds bit for bit, so swapping arguments
    # conjugates the kernel exactly
    t = 2.0
    for lam, z in [(0.5, 1.5), (0.5 + 0.2j, 1.0 - 0.3j), (-1.0 + 0.4j, 2.0 + 0.1j)]:
        assert kernel_K(const_pot, t, lam, z) == np.conj(kernel_K(const_pot, t, z, lam))


def test_kernel_diagonal_real_positive(const_pot):
    for lam in (0.0, 1.0, 2.5, 0.5 + 0.4j):
        val = kernel_K(const_pot, 2.0, lam, lam)
        assert val.imag == 0.0 or abs(val.imag) < 1e-14 * abs(val)
        assert val.real > 0.0


def test_kernel_confluent_switch_continuity(const_pot):
    lam = 1.2
    base = 1e-6 * (1.0 + abs(lam))
    for sep in (0.9 * base, 1.1 * base):
        val = kernel_K(const_pot, 2.0, lam, lam + sep)
        near = kernel_K(const_pot, 2.0, lam, lam)
        # both routes agree to the digits the direct quotient has left
        assert abs(val - near) < 1e-5 * abs(near)


def test_kernel_time_guard(const_pot):
    with pytest.raises(RangeError):
        kernel_K(const_pot, const_pot.T + 1.0, 0.0, 1.0)
    with pytest.raises(ValidationError):
        kernel_K(const_pot, 0.0, 0.0, 1.0)


# ---------------------------------------------------------------------------
# w estimation
# ---------------------------------------------------------------------------


def test_estimate_w_free(free_pot):
    w, spread = estimate_w(free_pot, 0.7, (1.0, 3.0), 8)
    assert abs(w - 1.0) < 1e-12
    assert spread < 1e-12


def test_estimate_w_past_support_is_exact(bump_pot):
    w, spread = estimate_w(bump_pot, 0.5, (40.0, 71.0), 8)
    wt, spread_t = estimate_w(bump_pot, 0.5, (40.0, 71.0), 8, component="Etilde")
    # |E(t, s)| freezes once the potential has ended
    assert spread < 1e-12 and spread_t < 1e-12
    assert w == pytest.approx(0.5852682, rel=1e-5)
    assert wt == pytest.approx(1.5808137, rel=1e-5)
    # Cauchy-Schwarz style upper bound of the product
    assert np.sqrt(w * wt) <= 1.0 + 1e-9


def test_estimate_w_validation(bump_pot):
    with pytest.raises(ValidationError):
        estimate_w(bump_pot, 0.5, (3.0, 2.0), 8)
    with pytest.raises(ValidationError):
        estimate_w(bump_pot, 0.5, (1.0, 2.0), 3)
    with pytest.raises(ValidationError):
        estimate_w(bump_pot, 0.5, (1.0, 2.0), 8, component="F")
    with pytest.raises(RangeError):
        estimate_w(bump_pot, 0.5, (1.0, bump_pot.T + 5.0), 8)


# ---------------------------------------------------------------------------
# universality gap
# ---------------------------------------------------------------------------


def test_free_gap_vanishes(free_pot):
    probe = kernel_probe(free_pot, 0.0, 4.0, 2.0, w_hat=1.0)
    assert probe.gap < 1e-12
    assert probe.w_hat == 1.0
    assert probe.lambda_grid.shape == (256,)
    assert probe.K_values.shape == (256, 256)


def test_gap_decreases_with_time(bump_pot):
    w, _ = estimate_w(bump_pot, 0.5, (40.0, 71.0), 8)
    g8 = universality_gap(bump_pot, 0.5, 8.0, 4.0, w_hat=w)
    g32 = universality_gap(bump_pot, 0.5, 32.0, 4.0, w_hat=w)
    assert g32 < g8


def test_probe_validation(bump_pot):
    with pytest.raises(ValidationError):
        kernel_probe(bump_pot, 0.5, 8.0, 4.0, w_hat=-1.0)


# ---------------------------------------------------------------------------
# gamma factor
# ---------------------------------------------------------------------------


def test_gamma_factor_values():
    assert gamma_factor(0.5) == pytest.approx(np.sqrt(2.0 / np.sinh(1.0)), abs=1e-15)
    with pytest.raises(ValidationError):
        gamma_factor(0.0)
    with pytest.raises(ValidationError):
        gamma_factor(-1.0)


# ---------------------------------------------------------------------------
# sine fit (resonant boxes)
# ---------------------------------------------------------------------------


def test_sine_fit_at_a_frozen_zero(tall_bump_pot):
    fit = hb_sine_fit(tall_bump_pot, TALL_ZERO.real, 2.0, 4.0)
    assert abs(abs(fit.alpha) - 1.0) < 1e-12  # alpha is exactly unimodular
    # model zero stays within the minimal shift of the true zero
    assert abs(fit.x - TALL_ZERO.real) < 0.2
    assert abs(fit.y - TALL_ZERO.imag) < 0.2
    assert fit.w_used > 0
    assert fit.residual > 0


def test_sine_fit_pins_value_at_s(tall_bump_pot):
    from diracnlft.propagator import hermite_biehler, transfer

    s, t = TALL_ZERO.real, 2.0
    fit = hb_sine_fit(tall_bump_pot, s, t, 4.0)
    model = (fit.alpha * gamma_factor(t * TALL_ZERO.imag) / np.sqrt(fit.w_used)) * np.sin(
        t * (s - (fit.x - 1j * fit.y))
    )
    E_s = hermite_biehler(transfer(tall_bump_pot, s, t)).E
    assert abs(model - E_s) < 1e-12 * max(1.0, abs(E_s))


def test_sine_fit_improves_with_time(tall_bump_pot):
    from diracnlft.propagator import transfer_batch
    from diracnlft.resonance import Box

    ratios = []
    for t in (2.0, 3.0, 4.0):
        fit = hb_sine_fit(tall_bump_pot, TALL_ZERO.real, t, 4.0)
        pts = Box(TALL_ZERO.real, 4.0 / t).tensor_grid(full=True)
        B = transfer_batch(tall_bump_pot, pts, t)
        sup_E = float(np.max(np.abs(B.A - 1j * B.C)))
        ratios.append(fit.residual / sup_E)
    assert ratios[0] > ratios[1] > ratios[2]


def test_sine_fit_mirror_symmetry(tall_bump_pot):
    plus = hb_sine_fit(tall_bump_pot, TALL_ZERO.real, 2.0, 4.0)
    minus = hb_sine_fit(tall_bump_pot, -TALL_ZERO.real, 2.0, 4.0)
    assert minus.x == pytest.approx(-plus.x, abs=1e-9)
    assert minus.y == pytest.approx(plus.y, abs=1e-9)
    assert minus.residual == pytest.approx(plus.residual, rel=1e-9)


def test_sine_fit_preconditions(free_pot, tall_bump_pot):
    with pytest.raises(PreconditionError):
        hb_sine_fit(free_pot, 0.0, 2.0, 4.0)  # no zero anywhere
    with pytest.raises(PreconditionError):
        # t * y = 0.83 < 1: below the calibrated band
        hb_sine_fit(tall_bump_pot, TALL_ZERO.real, 1.0, 4.0)


# ---------------------------------------------------------------------------
# exponential fit (zero-free boxes)
# ---------------------------------------------------------------------------


def test_exp_fit_free_is_exact(free_pot):
    alpha, res = hb_exp_fit(free_pot, 0.5, 3.0, 2.0, w_hat=1.0)
    assert abs(abs(alpha) - 1.0) < 1e-12
    assert res < 1e-12


def test_exp_fit_residual_decays(bump_pot):
    w, _ = estimate_w(bump_pot, 1.5, (40.0, 71.0), 8)
    res = [hb_exp_fit(bump_pot, 1.5, t, 4.0, w_hat=w)[1] for t in (4.0, 8.0, 16.0)]
    assert res[0] > res[1] > res[2]


def test_exp_fit_far_horizon(bump_pot):
    # propagation far past the support stays O(cells) and exact, so the
    # model defect keeps shrinking like 1/t
    _, res = hb_exp_fit(bump_pot, 1.5, 1e6, 4.0)
    assert res < 1e-2
    _, res = hb_exp_fit(bump_pot, 1.5, 1e11, 4.0)
    assert res < 1e-10


def test_exp_fit_refuses_resonant_box(tall_bump_pot):
    with pytest.raises(PreconditionError):
        hb_exp_fit(tall_bump_pot, TALL_ZERO.real, 2.0, 4.0)
