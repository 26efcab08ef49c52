"""Adversarial and composite reconstruction losses."""

import numpy as np
import pytest

from opgan.errors import InputError
from opgan.losses import (
    MAGNITUDE_FLOOR,
    LossReport,
    LossWeights,
    d_loss,
    d_loss_grads,
    g_adv_loss,
    g_adv_loss_grad,
    loss_fd,
    loss_fd_grad,
    loss_td,
    loss_td_grad,
    total_g_loss,
)

from conftest import fd_gradient, rel_err


def test_d_loss_hand_values():
    # perfect discriminator: real scores 1, fake scores 0 -> loss 0
    assert d_loss(np.ones(10), np.zeros(10)) == 0.0
    # fully fooled: real 0, fake 1 -> 1/2 + 1/2
    assert d_loss(np.zeros(10), np.ones(10)) == pytest.approx(1.0)
    # accepts 1xN tensors
    assert d_loss(np.ones((1, 5)), np.zeros((1, 5))) == 0.0


def test_g_adv_hand_values():
    assert g_adv_loss(np.ones(8)) == 0.0
    assert g_adv_loss(np.zeros(8)) == pytest.approx(0.5)


def test_adversarial_grads_match_finite_differences():
    rng = np.random.default_rng(40)
    for _ in range(20):
        p = int(rng.integers(3, 30))
        sr = rng.standard_normal(p)
        sf = rng.standard_normal(p)

        dsr, dsf = d_loss_grads(sr, sf)
        assert rel_err(dsr, fd_gradient(lambda v: d_loss(v, sf), sr.copy())) < 1e-6
        assert rel_err(dsf, fd_gradient(lambda v: d_loss(sr, v), sf.copy())) < 1e-6

        dg = g_adv_loss_grad(sf)
        assert rel_err(dg, fd_gradient(g_adv_loss, sf.copy())) < 1e-6


def test_loss_td_is_mse_and_grad_checks():
    rng = np.random.default_rng(41)
    t = rng.standard_normal(64)
    g = rng.standard_normal(64)
    assert loss_td(t, g) == pytest.approx(float(np.mean((g - t) ** 2)))
    assert loss_td(t, t) == 0.0
    got = loss_td_grad(t, g)
    assert rel_err(got, fd_gradient(lambda v: loss_td(t, v), g.copy())) < 1e-6
    with pytest.raises(InputError):
        loss_td(np.zeros(10), np.zeros(11))


def test_loss_fd_zero_on_identical_and_positive_otherwise():
    rng = np.random.default_rng(42)
    x = rng.standard_normal(1024)
    assert loss_fd(x, x) == 0.0
    assert loss_fd(x, x + 0.1 * rng.standard_normal(1024)) > 0.0


def test_loss_fd_grad_matches_finite_differences_through_stft():
    rng = np.random.default_rng(43)
    for _ in range(20):
        n = int(rng.integers(600, 1200))
        target = rng.standard_normal(n)
        gen = rng.standard_normal(n)
        got = loss_fd_grad(target, gen)
        want = fd_gradient(lambda v: loss_fd(target, v), gen.copy(), eps=1e-6)
        assert rel_err(got, want) < 1e-3


def test_loss_fd_floor_keeps_gradients_finite():
    # silent generated signal: every magnitude sits at the floor, so the
    # gradient must be exactly zero rather than blowing up through log
    target = np.sin(np.arange(512) * 0.1)
    gen = np.zeros(512)
    val = loss_fd(target, gen)
    assert np.isfinite(val)
    g = loss_fd_grad(target, gen)
    assert np.all(np.isfinite(g))
    assert np.array_equal(g, np.zeros_like(g))
    assert MAGNITUDE_FLOOR == pytest.approx(1e-8)


def test_total_weighting():
    w = LossWeights()
    assert w.lambda_td == 10.0 and w.lambda_fd == 5.0
    assert total_g_loss(1.0, 2.0, 3.0, w) == pytest.approx(1.0 + 20.0 + 15.0)


def test_loss_report_finiteness():
    ok = LossReport(d_loss=0.1, g_adv=0.2, loss_td=0.3, loss_fd=0.4, total=0.5)
    assert ok.is_finite()
    bad = LossReport(d_loss=0.1, g_adv=np.nan, loss_td=0.3, loss_fd=0.4, total=np.nan)
    assert not bad.is_finite()
