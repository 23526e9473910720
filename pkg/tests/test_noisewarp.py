import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erpmotion import (
    FlowField,
    NoiseGrid,
    degrade,
    load_noise,
    remap_pixel,
    roll_longitude,
    sample_noise,
    save_noise,
    unroll,
    warp_chain,
    warp_noise,
)
from erpmotion.errors import ConfigError, FormatError, ShapeError


def uniform_flow(h, w, du, dv):
    return FlowField(np.full((h, w), float(du)), np.full((h, w), float(dv)))


# ---- Eq.-style boundary remap ----


def test_remap_top_overshoot():
    assert remap_pixel(-1, 100, 480, 960) == (1, 580)


def test_remap_bottom_overshoot():
    assert remap_pixel(485, 50, 480, 960) == (473, 530)


def test_remap_inrange_wraps_columns():
    assert remap_pixel(200, 965, 480, 960) == (200, 5)


def test_remap_exhaustive_scan_small():
    h, w = 12, 24
    for i in range(-h, 2 * h):
        for j in range(-w, 2 * w):
            fi, fj = remap_pixel(i, j, h, w)
            assert 0 <= fi < h and 0 <= fj < w


def test_remap_pole_branch_involution():
    h, w = 16, 32
    for i in range(1, h):
        for j in range(w):
            # Push over the top by -i, remap, push back with the same overshoot.
            fi, fj = remap_pixel(-i, j, h, w)
            gi, gj = remap_pixel(-fi, fj, h, w)
            assert (gi, gj) == (i, j % w)


def test_remap_rejects_double_overshoot():
    with pytest.raises(ConfigError):
        remap_pixel(2 * 480, 0, 480, 960)
    with pytest.raises(ConfigError):
        remap_pixel(-2 * 480, 0, 480, 960)


# ---- sampling ----


def test_sample_noise_deterministic():
    a = sample_noise(8, 16, 3, seed=7)
    b = sample_noise(8, 16, 3, seed=7)
    assert np.array_equal(a.values, b.values)
    assert (a.counts == 1).all()


def test_sample_noise_seed_decorrelated():
    n = 100_000
    a = sample_noise(250, 400, 1, seed=1).values.ravel()[:n]
    b = sample_noise(250, 400, 1, seed=2).values.ravel()[:n]
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 0.02


def test_sample_noise_moments():
    v = sample_noise(1000, 1000, 1, seed=3).values
    assert abs(v.mean()) < 0.01
    assert 0.99 <= v.var() <= 1.01


# ---- warping ----


def test_warp_zero_flow_identity():
    q = sample_noise(8, 16, 2, seed=5)
    out = warp_noise(q, FlowField.zeros(8, 16), seed=9)
    assert np.array_equal(out.values, q.values)
    assert (out.counts == 1).all()


def test_warp_integer_shift_is_permutation():
    q = sample_noise(8, 16, 3, seed=5)
    out = warp_noise(q, uniform_flow(8, 16, 10, 0), seed=9)
    np.testing.assert_array_equal(out.values, np.roll(q.values, 10, axis=1))
    assert (out.counts == 1).all()


def test_warp_two_pixel_contraction():
    q = sample_noise(2, 4, 1, seed=11)
    du = np.zeros((2, 4))
    du[0, 0] = 1.0
    out = warp_noise(q, FlowField(du, np.zeros((2, 4))), seed=3)
    a, b = q.values[0, 0, 0], q.values[0, 1, 0]
    assert out.values[0, 1, 0] == pytest.approx((a + b) / np.sqrt(2.0), abs=1e-12)
    assert out.counts[0, 1] == 2
    assert out.counts[0, 0] == 0  # hole, refilled fresh


def test_warp_hole_fill_is_fresh_and_seeded():
    q = sample_noise(4, 8, 1, seed=1)
    flow = uniform_flow(4, 8, 0, 0)
    flow.du[0, 0] = 1.0  # (0,0) -> (0,1): makes (0,0) a hole
    a = warp_noise(q, flow, seed=7)
    b = warp_noise(q, flow, seed=7)
    c = warp_noise(q, flow, seed=8)
    assert np.array_equal(a.values, b.values)
    assert a.values[0, 0, 0] != c.values[0, 0, 0]
    assert a.values[0, 0, 0] not in q.values  # fresh, never copied


def test_warp_shape_mismatch():
    q = sample_noise(4, 8, 1, seed=1)
    with pytest.raises(ShapeError):
        warp_noise(q, FlowField.zeros(4, 10), seed=0)


def test_warp_rounding_ties_to_even():
    # du = 0.5 rounds to 0 for even columns and to +1 ... rint ties-to-even
    q = sample_noise(2, 4, 1, seed=2)
    out = warp_noise(q, uniform_flow(2, 4, 0.5, 0), seed=0)
    # columns 0->0 (0.5 -> 0), 1->2 (1.5 -> 2), 2->2 (2.5 -> 2), 3->4->wrap 0 (3.5 -> 4)
    assert out.counts[0, 0] == 2 and out.counts[0, 2] == 2
    assert out.counts[0, 1] == 0 and out.counts[0, 3] == 0


# ---- chains ----


def test_chain_empty_returns_input():
    q = sample_noise(4, 8, 1, seed=6)
    grids = warp_chain(q, [], seed=0)
    assert len(grids) == 1 and grids[0] is q


def test_chain_of_shifts_composes():
    q = sample_noise(8, 16, 1, seed=6)
    flows = [uniform_flow(8, 16, 3, 0), uniform_flow(8, 16, 5, 0)]
    grids = warp_chain(q, flows, seed=1)
    np.testing.assert_array_equal(grids[2].values, np.roll(q.values, 8, axis=1))


def test_chain_deterministic():
    q = sample_noise(8, 16, 1, seed=6)
    rngf = np.random.default_rng(0)
    flows = [FlowField(rngf.normal(0, 2, (8, 16)), rngf.normal(0, 1, (8, 16))) for _ in range(5)]
    a = warp_chain(q, flows, seed=42)
    b = warp_chain(q, flows, seed=42)
    for x, y in zip(a, b):
        assert np.array_equal(x.values, y.values)


def test_chain_variance_stays_bounded():
    """Marginal variance after a 48-step chain of smooth random flows,
    averaged over 200 seeds."""
    h, w = 12, 24
    rngf = np.random.default_rng(3)
    flows = []
    for _ in range(48):
        du = rngf.normal(0, 1.5) + rngf.normal(0, 0.7, (h, w))
        dv = rngf.normal(0, 0.8) + rngf.normal(0, 0.5, (h, w))
        flows.append(FlowField(du, dv))
    finals = []
    for seed in range(200):
        grids = warp_chain(sample_noise(h, w, 1, seed=seed), flows, seed=seed + 1000)
        finals.append(grids[-1].values)
    var = np.var(np.stack(finals))
    assert 0.9 <= var <= 1.1


# ---- degradation ----


def test_degrade_gamma_zero_identity():
    q = sample_noise(8, 16, 1, seed=4)
    out = degrade(q, 0.0, seed=9)
    assert np.array_equal(out.values, q.values)


def test_degrade_gamma_one_independent():
    q = sample_noise(250, 400, 1, seed=4)
    out = degrade(q, 1.0, seed=9)
    rho = np.corrcoef(q.values.ravel()[:100_000], out.values.ravel()[:100_000])[0, 1]
    assert abs(rho) < 0.02


def test_degrade_half_correlation():
    q = sample_noise(250, 400, 1, seed=4)
    out = degrade(q, 0.5, seed=9)
    rho = np.corrcoef(q.values.ravel()[:100_000], out.values.ravel()[:100_000])[0, 1]
    assert rho == pytest.approx(np.sqrt(0.5), abs=0.02)


@pytest.mark.parametrize("gamma", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_degrade_preserves_unit_variance(gamma):
    q = sample_noise(300, 600, 1, seed=4)
    out = degrade(q, gamma, seed=9)
    assert 0.99 <= out.values.var() <= 1.01


def test_degrade_rejects_bad_gamma():
    q = sample_noise(4, 8, 1, seed=4)
    for g in (-0.1, 1.1, float("nan")):
        with pytest.raises(ConfigError):
            degrade(q, g, seed=0)


# ---- longitude rolling ----


def test_roll_theta40_width90():
    grid = np.arange(90 * 4, dtype=np.float64).reshape(4, 90)
    rolled, shift = roll_longitude(grid, 40.0)
    assert shift == 10
    np.testing.assert_array_equal(rolled, np.roll(grid, 10, axis=1))


def test_nine_rolls_of_40_compose_to_identity(rng):
    grid = rng.normal(size=(4, 90, 2))
    out = grid
    total = 0
    for _ in range(9):
        out, s = roll_longitude(out, 40.0)
        total += s
    assert total % 90 == 0
    np.testing.assert_array_equal(out, grid)


@given(theta_steps=st.integers(min_value=-8, max_value=8))
@settings(max_examples=20, deadline=None)
def test_roll_unroll_bit_exact(theta_steps):
    rng = np.random.default_rng(abs(theta_steps) + 1)
    grid = rng.normal(size=(3, 16, 2))
    theta = theta_steps * 360.0 / 16.0
    rolled, shift = roll_longitude(grid, theta)
    assert shift == theta_steps
    np.testing.assert_array_equal(unroll(rolled, shift), grid)


def test_roll_rejects_non_integer_shift():
    with pytest.raises(ConfigError):
        roll_longitude(np.zeros((2, 90)), 37.0)


# ---- serialization ----


def test_noise_file_round_trip(tmp_path):
    q = sample_noise(6, 12, 3, seed=8)
    warped = warp_noise(q, uniform_flow(6, 12, 2, 1), seed=3)
    path = tmp_path / "noise.erpf"
    save_noise(warped, path)
    back = load_noise(path)
    np.testing.assert_array_equal(back.values, warped.values.astype(np.float32).astype(np.float64))
    np.testing.assert_array_equal(back.counts, warped.counts)


def test_noise_file_missing_counts(tmp_path):
    from erpmotion.image_io import save_erpf

    path = tmp_path / "plain.erpf"
    save_erpf(np.zeros((4, 8, 1)), path)
    with pytest.raises(FormatError):
        load_noise(path)


# ---- distributional contract ----


@pytest.mark.parametrize("fixture", ["contraction", "expansion", "seam"])
def test_warp_gaussianity(fixture):
    """Marginals stay standard normal under contraction, expansion and
    seam-crossing flows (reduced-size version of the acceptance check)."""
    h, w = 8, 16
    if fixture == "contraction":
        du = -0.35 * (np.arange(w) - w / 2.0)[None, :] * np.ones((h, 1))
        flow = FlowField(du, np.zeros((h, w)))
    elif fixture == "expansion":
        du = 0.6 * (np.arange(w) - w / 2.0)[None, :] * np.ones((h, 1))
        flow = FlowField(du, np.zeros((h, w)))
    else:
        flow = uniform_flow(h, w, 5, -3)
    outs = np.stack([warp_noise(sample_noise(h, w, 1, seed=s), flow, seed=s + 50_000).values for s in range(2000)])
    means = outs.mean(axis=0)
    variances = outs.var(axis=0)
    assert np.abs(means).max() < 0.12
    assert variances.min() > 0.8 and variances.max() < 1.2


def test_seam_crossing_patch_preserved():
    h, w = 8, 16
    q = sample_noise(h, w, 1, seed=1)
    tagged = q.values[2:5, w - 2:, 0].copy()
    out = warp_noise(q, uniform_flow(h, w, 4, 0), seed=2)
    np.testing.assert_array_equal(out.values[2:5, 2:4, 0], tagged)


def test_pole_crossing_patch_reflects_with_halfwidth_shift():
    h, w = 8, 16
    q = sample_noise(h, w, 1, seed=1)
    tagged = q.values[0, 3, 0]
    out = warp_noise(q, uniform_flow(h, w, 0, -2), seed=2)
    # Row 0 -> -2 reflects to row 2 with a W/2 column shift.  The interior
    # source (4, 11) lands there too, so the target holds the normalised sum.
    target = (2, (3 + w // 2) % w)
    other = q.values[4, 11, 0]
    assert out.counts[target] == 2
    assert out.values[target + (0,)] == pytest.approx((tagged + other) / np.sqrt(2.0), abs=1e-12)
