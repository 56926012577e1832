import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gstamp import kernels
from gstamp.catalog import Catalog, ClusterRecord, with_records
from gstamp.epoch import (
    DEFAULT_DD_CASES_KPC,
    EpochEstimate,
    drift_objective,
    epoch_error_bound,
    golden_section,
    propagate_catalog,
    recover_epoch,
    resolution_curves,
    resolution_from_csv,
    resolution_to_csv,
    time_resolution,
)
from gstamp.errors import EmptyGrid, MatchFailed, WindowTooNarrow, ZeroVelocity
from gstamp.frames import PhaseState, Vec3, catalog_phase_space, from_galactocentric
from gstamp.stamp import build_location_map, match_anchors
from gstamp.units import KPC_PER_MYR_PER_KMS

from conftest import GOLDEN_ANCHORS

# derivation: 1 kpc in km / Julian year in s
YEARS_PER_KPC_AT_1KMS = (1.495978707e8 * 648000.0 / math.pi * 1000.0) / 3.15576e7


def test_time_resolution_half_kpc_at_500_kms():
    # 0.5 kpc at 500 km/s is about one million years
    dt = time_resolution(0.5, 500.0)
    assert dt == pytest.approx(9.78e5, rel=5e-3)
    assert dt == pytest.approx(0.5 / 500.0 * YEARS_PER_KPC_AT_1KMS, rel=1e-12)


def test_time_resolution_tenth_kpc_at_300_kms():
    dt = time_resolution(0.1, 300.0)
    # two significant figures: 3.3e5
    assert round(dt / 1e4) * 1e4 == pytest.approx(3.3e5)
    assert dt == pytest.approx(3.26e5, rel=5e-3)


def test_time_resolution_zero_error():
    assert time_resolution(0.0, 123.4) == 0.0


def test_time_resolution_zero_velocity():
    with pytest.raises(ZeroVelocity):
        time_resolution(0.5, 0.0)
    with pytest.raises(ZeroVelocity):
        time_resolution(0.5, -10.0)


def test_time_resolution_negative_dd():
    with pytest.raises(ValueError):
        time_resolution(-0.1, 100.0)


@settings(max_examples=100, deadline=None)
@given(dd=st.floats(1e-3, 10.0), v=st.floats(1e-2, 2e3), a=st.floats(1e-3, 1e3))
def test_time_resolution_homogeneous(dd, v, a):
    assert time_resolution(a * dd, a * v) == pytest.approx(
        time_resolution(dd, v), rel=1e-9)


def test_resolution_curves_anchor_cell():
    curve = resolution_curves(DEFAULT_DD_CASES_KPC, 50.0, 1000.0, 96)
    j = int(np.argmin(np.abs(curve.v_kms - 500.0)))
    assert curve.v_kms[j] == 500.0
    i = curve.dd_kpc.index(0.5)
    assert curve.dt_yr[i, j] == pytest.approx(9.78e5, rel=5e-3)


def test_resolution_curves_shape_and_monotonicity():
    curve = resolution_curves()
    assert len(curve.dd_kpc) == 4
    assert curve.dt_yr.shape == (4, 96)
    assert np.all(np.diff(curve.dt_yr, axis=1) < 0)  # decreasing along v
    assert np.all(np.diff(curve.dt_yr, axis=0) > 0)  # increasing along dd


def test_resolution_doubling_velocity_halves_entries():
    c1 = resolution_curves(DEFAULT_DD_CASES_KPC, 100.0, 800.0, 15)
    c2 = resolution_curves(DEFAULT_DD_CASES_KPC, 200.0, 1600.0, 15)
    assert np.allclose(c2.dt_yr, c1.dt_yr / 2.0, rtol=1e-12)


def test_resolution_csv_round_trip():
    curve = resolution_curves(n_points=12)
    again = resolution_from_csv(resolution_to_csv(curve))
    assert again.dd_kpc == curve.dd_kpc
    assert np.allclose(again.v_kms, curve.v_kms)
    assert np.allclose(again.dt_yr, curve.dt_yr)


def test_resolution_empty_grid():
    with pytest.raises(EmptyGrid):
        resolution_curves((), 50.0, 1000.0, 10)
    with pytest.raises(EmptyGrid):
        resolution_curves(DEFAULT_DD_CASES_KPC, 50.0, 1000.0, 0)


# --- propagation --------------------------------------------------------

def test_propagate_zero_dt_round_trip(fp, snapshot):
    again = propagate_catalog(snapshot, fp, 0.0)
    assert again.epoch_jyear == snapshot.epoch_jyear
    for a, b in zip(again.records, snapshot.records):
        assert a.name == b.name
        assert a.dist_kpc == pytest.approx(b.dist_kpc, rel=1e-9)
        assert a.ra_deg == pytest.approx(b.ra_deg, abs=1e-9)
        assert a.rv_kms == pytest.approx(b.rv_kms, abs=1e-9)


def test_propagate_linear_displacement_oracle(fp):
    # 300 km/s for 1 Myr covers 300 * 1.02271e-3 kpc = 0.30681 kpc
    sun = fp.sun_pos().to_array()
    pos0 = sun + np.array([5.0, 0.0, 0.0])
    st0 = PhaseState(Vec3.from_array(pos0),
                     Vec3(300.0, 0.0, 0.0))
    obs = from_galactocentric(st0, fp)
    rec = ClusterRecord(name="D", dist_err_kpc=0.1, mv_abs=-8.0, feh_dex=-1.0, **obs)
    cat = Catalog(epoch_jyear=2023.0, records=(rec,))
    moved = propagate_catalog(cat, fp, 1.0, mode="linear")
    p0, _ = catalog_phase_space(cat, fp)
    p1, _ = catalog_phase_space(moved, fp)
    step = float(np.linalg.norm(p1[0] - p0[0]))
    assert step == pytest.approx(0.30681, abs=5e-5)
    assert step == pytest.approx(300.0 * KPC_PER_MYR_PER_KMS, rel=1e-9)
    assert moved.epoch_jyear == pytest.approx(2023.0 + 1e6)


def test_propagate_linear_vs_orbit_short_time(fp, pp, snapshot):
    lin = propagate_catalog(snapshot, fp, 1.0, mode="linear")
    orb = propagate_catalog(snapshot, fp, 1.0, mode="orbit", pp=pp, step_myr=0.1)
    p1, _ = catalog_phase_space(lin, fp)
    p2, _ = catalog_phase_space(orb, fp)
    gap = np.linalg.norm(p1 - p2, axis=1)
    # the gap is the orbit's curvature term: bounded by 0.5*|a|*t^2 per cluster
    pos, _ = catalog_phase_space(snapshot, fp)
    amag = np.linalg.norm(kernels.acceleration_array(pos, pp.as_tuple()),
                          axis=1) * KPC_PER_MYR_PER_KMS
    assert np.all(gap <= 0.6 * amag + 1e-4)
    assert float(np.median(gap)) < 0.01


def test_propagate_round_trip(fp, snapshot):
    there = propagate_catalog(snapshot, fp, 2.0, mode="linear")
    back = propagate_catalog(there, fp, -2.0, mode="linear")
    p0, v0 = catalog_phase_space(snapshot, fp)
    p1, v1 = catalog_phase_space(back, fp)
    assert np.max(np.abs(p1 - p0)) < 1e-9
    assert np.max(np.abs(v1 - v0)) < 1e-7


def test_propagate_orbit_negative_dt(fp, pp, snapshot):
    small = with_records(snapshot, snapshot.records[:5])
    there = propagate_catalog(small, fp, 1.5, mode="orbit", pp=pp, step_myr=0.1)
    back = propagate_catalog(there, fp, -1.5, mode="orbit", pp=pp, step_myr=0.1)
    p0, _ = catalog_phase_space(small, fp)
    p1, _ = catalog_phase_space(back, fp)
    assert np.max(np.abs(p1 - p0)) < 1e-6


def test_propagate_bad_mode(fp, snapshot):
    with pytest.raises(ValueError):
        propagate_catalog(snapshot, fp, 1.0, mode="ballistic")


# --- error bound ----------------------------------------------------------

def bound_catalog(fp, speeds, dist_errs):
    """k well-separated anchors around the Sun with given speeds/errors."""
    sun = fp.sun_pos().to_array()
    rng = np.random.default_rng(5)
    k = len(speeds)
    offsets = [np.array([1.0, 1.0, 1.0]), np.array([1.0, -1.0, -1.0]),
               np.array([-1.0, 1.0, -1.0]), np.array([-1.0, -1.0, 1.0])]
    while len(offsets) < k:
        u = rng.normal(size=3)
        offsets.append(u / np.linalg.norm(u) * rng.uniform(1.0, 2.2))
    recs = []
    for i in range(k):
        direction = rng.normal(size=3)
        vel = direction / np.linalg.norm(direction) * speeds[i]
        st0 = PhaseState(Vec3.from_array(sun + 3.0 * offsets[i]), Vec3(*vel))
        obs = from_galactocentric(st0, fp)
        recs.append(ClusterRecord(name=f"B-{i}", dist_err_kpc=dist_errs[i],
                                  mv_abs=-8.0 + 0.25 * i, feh_dex=-1.0 - 0.1 * i,
                                  **obs))
    return Catalog(epoch_jyear=2023.0, records=tuple(recs))


def test_bound_single_anchor(fp):
    cat = bound_catalog(fp, speeds=[500.0] * 4, dist_errs=[0.5] * 4)
    got = epoch_error_bound(cat, fp, [0])
    assert got == pytest.approx(9.78e5, rel=5e-3)


def test_bound_zero_errors(fp):
    cat = bound_catalog(fp, speeds=[300.0] * 4, dist_errs=[0.0] * 4)
    assert epoch_error_bound(cat, fp, [0, 1, 2, 3]) == 0.0


def test_bound_max_rule(fp):
    cat = bound_catalog(fp, speeds=[300.0, 500.0, 400.0, 450.0],
                        dist_errs=[0.1, 0.5, 0.1, 0.1])
    got = epoch_error_bound(cat, fp, [0, 1])
    assert got == pytest.approx(time_resolution(0.5, 500.0), rel=1e-6)
    assert got == pytest.approx(9.78e5, rel=5e-3)


def test_bound_zero_velocity(fp):
    sun = fp.sun_pos().to_array()
    st0 = PhaseState(Vec3.from_array(sun + np.array([3.0, 0.0, 0.0])),
                     Vec3(0.0, 0.0, 0.0))
    obs = from_galactocentric(st0, fp)
    rec = ClusterRecord(name="Z", dist_err_kpc=0.1, mv_abs=-8.0, feh_dex=-1.0, **obs)
    cat = Catalog(epoch_jyear=2023.0, records=(rec,))
    with pytest.raises(ZeroVelocity):
        epoch_error_bound(cat, fp, [0])


# --- golden-section utility ------------------------------------------------

def test_golden_section_against_scipy():
    from scipy.optimize import minimize_scalar

    def f(x):
        return (x - 0.7) ** 4 + 3.0 * (x - 0.7) ** 2 + 1.0

    got = golden_section(f, -2.0, 3.0, 1e-8)
    ref = minimize_scalar(f, bounds=(-2.0, 3.0), method="bounded",
                          options={"xatol": 1e-10}).x
    assert got == pytest.approx(ref, abs=1e-6)
    assert got == pytest.approx(0.7, abs=1e-6)


# --- epoch recovery ---------------------------------------------------------

def test_recover_zero_dt(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    est = recover_epoch(lmap, propagate_catalog(snapshot, fp, 0.0), fp)
    assert abs(est.dt_myr) <= 1e-3
    assert est.bound_myr > 0


@pytest.mark.parametrize("dt", [0.1, 0.5, 1.0])
def test_recover_injected_dt_noiseless(fp, snapshot, dt):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    cat_now = propagate_catalog(snapshot, fp, dt, mode="linear")
    est = recover_epoch(lmap, cat_now, fp)
    assert est.dt_myr == pytest.approx(dt, abs=1e-3)
    assert est.residual_kpc < 2e-3


def test_recover_negative_dt(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    cat_now = propagate_catalog(snapshot, fp, -0.75, mode="linear")
    est = recover_epoch(lmap, cat_now, fp)
    assert est.dt_myr == pytest.approx(-0.75, abs=1e-3)


def test_recover_orbit_mode_long_dt(fp, pp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    cat_now = propagate_catalog(snapshot, fp, 3.0, mode="orbit", pp=pp,
                                step_myr=0.1)
    est = recover_epoch(lmap, cat_now, fp, tol_kpc=5.0, mode="orbit", pp=pp,
                        step_myr=0.1)
    assert est.dt_myr == pytest.approx(3.0, abs=2e-3)
    # linear back-propagation leaves the orbit-curvature misfit behind
    est_lin = recover_epoch(lmap, cat_now, fp, tol_kpc=5.0, mode="linear")
    assert est.residual_kpc < est_lin.residual_kpc


def test_recover_global_minimum_sanity(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    cat_now = propagate_catalog(snapshot, fp, 0.5, mode="linear")
    corr = match_anchors(lmap, cat_now, fp, tol_kpc=1.0)
    f = drift_objective(lmap, corr, cat_now, fp)
    truth_value = f(0.5)
    for t in np.linspace(-5.0, 5.0, 64):
        assert truth_value <= f(t) + 1e-12


def test_recover_noise_within_bound_monte_carlo(fp):
    # anchors: distance error 0.1 kpc, speeds >= 300 km/s; the bound is
    # then time_resolution(0.1, 300) ~ 0.33 Myr
    rng0 = np.random.default_rng(6)
    speeds = [300.0] + list(rng0.uniform(320.0, 500.0, 7))
    cat0 = bound_catalog(fp, speeds=speeds, dist_errs=[0.1] * 8)
    lmap = build_location_map(cat0, fp, list(range(8)))
    cat_now = propagate_catalog(cat0, fp, 0.5, mode="linear")
    expected_bound = time_resolution(0.1, 300.0) / 1e6
    hits = 0
    for trial in range(100):
        rng = np.random.default_rng(3000 + trial)
        recs = [replace(r, dist_kpc=max(r.dist_kpc + float(rng.normal(0.0, 0.1)), 1e-3))
                for r in cat_now.records]
        noisy = with_records(cat_now, recs)
        est = recover_epoch(lmap, noisy, fp, window_myr=(-5.0, 5.0), tol_kpc=1.5)
        assert est.bound_myr == pytest.approx(expected_bound, rel=0.25)
        if abs(est.dt_myr - 0.5) <= est.bound_myr:
            hits += 1
    assert hits >= 90


def test_recover_window_too_narrow(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    cat_now = propagate_catalog(snapshot, fp, 3.0, mode="linear")
    with pytest.raises(WindowTooNarrow):
        recover_epoch(lmap, cat_now, fp, window_myr=(-1.0, 1.0), tol_kpc=5.0)


def test_recover_match_failed(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    faint = with_records(snapshot, [replace(r, mv_abs=-1.0)
                                    for r in snapshot.records])
    with pytest.raises(MatchFailed):
        recover_epoch(lmap, faint, fp)


def _epoch_error_for(fp, sigma, speed_scale, trials=40):
    rng0 = np.random.default_rng(11)
    speeds = rng0.uniform(300.0, 500.0, 8) * speed_scale
    cat0 = bound_catalog(fp, speeds=list(speeds), dist_errs=[0.1] * 8)
    lmap = build_location_map(cat0, fp, list(range(8)))
    errs = []
    for trial in range(trials):
        rng = np.random.default_rng(4000 + trial)  # common random numbers
        recs = [replace(r, dist_kpc=max(r.dist_kpc + float(rng.normal(0.0, sigma)), 1e-3))
                for r in cat0.records]
        noisy = with_records(cat0, recs)
        est = recover_epoch(lmap, noisy, fp, window_myr=(-5.0, 5.0), tol_kpc=3.0)
        errs.append(abs(est.dt_myr))
    return float(np.median(errs))


def test_epoch_error_scales_with_sigma(fp):
    sigmas = [0.03, 0.1, 0.3]
    med = [_epoch_error_for(fp, s, 1.0) for s in sigmas]
    slope = np.polyfit(np.log(sigmas), np.log(med), 1)[0]
    assert 0.8 <= slope <= 1.2


def test_epoch_error_scales_inverse_speed(fp):
    scales = [1.0, 2.0, 4.0]
    med = [_epoch_error_for(fp, 0.1, s) for s in scales]
    slope = np.polyfit(np.log(scales), np.log(med), 1)[0]
    assert -1.2 <= slope <= -0.8


def test_epoch_estimate_fields(fp, snapshot):
    lmap = build_location_map(snapshot, fp, GOLDEN_ANCHORS)
    est = recover_epoch(lmap, propagate_catalog(snapshot, fp, 0.2), fp)
    assert isinstance(est, EpochEstimate)
    assert est.residual_kpc >= 0.0
    assert est.bound_myr > 0.0
