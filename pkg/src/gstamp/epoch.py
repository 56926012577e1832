"""Time-stamp model: the dt = dd/v resolution surface and recovery of the
elapsed time from proper-motion drift of the anchor geometry.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import dynamics, stamp
from .catalog import Catalog
from .errors import (
    EmptyGrid,
    MatchFailed,
    StampError,
    WindowTooNarrow,
    ZeroVelocity,
)
from .frames import PhaseState, Vec3, catalog_phase_space, from_galactocentric
from .units import KPC_PER_MYR_PER_KMS, YR_PER_KPC_PER_KMS

GOLDEN_RATIO_INV = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_DD_CASES_KPC = (0.05, 0.1, 0.25, 0.5)


def time_resolution(dd_kpc, v_kms) -> float:
    """Smallest distinguishable elapsed time, Julian years.

    A landmark moving at v km/s traverses a position uncertainty of
    dd kpc in dd/v * 9.77792e8 yr.
    """
    if v_kms <= 0:
        raise ZeroVelocity(f"indicator speed must be positive, got {v_kms} km/s")
    if dd_kpc < 0:
        raise ValueError(f"spatial resolution must be non-negative, got {dd_kpc}")
    return dd_kpc / v_kms * YR_PER_KPC_PER_KMS


@dataclass(frozen=True)
class ResolutionCurve:
    """dt_yr[i][j] = time_resolution(dd_kpc[i], v_kms[j])."""

    dd_kpc: tuple
    v_kms: np.ndarray
    dt_yr: np.ndarray


def resolution_curves(dd_cases_kpc=DEFAULT_DD_CASES_KPC, v_min_kms=50.0,
                      v_max_kms=1000.0, n_points=96) -> ResolutionCurve:
    """Resolution surface over a uniform velocity grid, one row per dd case."""
    dd = tuple(float(d) for d in dd_cases_kpc)
    if len(dd) == 0 or n_points < 1:
        raise EmptyGrid("need at least one dd case and one velocity point")
    if any(d <= 0 for d in dd) or list(dd) != sorted(set(dd)):
        raise ValueError("dd cases must be positive, strictly increasing and unique")
    if v_min_kms <= 0 or v_max_kms < v_min_kms:
        raise ValueError("velocity grid must be positive and ordered")
    v = np.linspace(v_min_kms, v_max_kms, n_points)
    dt = np.array([[time_resolution(d, vv) for vv in v] for d in dd])
    return ResolutionCurve(dd_kpc=dd, v_kms=v, dt_yr=dt)


def resolution_to_csv(curve: ResolutionCurve, comments=()) -> str:
    lines = [f"# yr_per_kpc_per_kms = {YR_PER_KPC_PER_KMS!r}"]
    lines.extend(comments)
    lines.append("dd_kpc,v_kms,dt_yr")
    for i, d in enumerate(curve.dd_kpc):
        for j, v in enumerate(curve.v_kms):
            lines.append(f"{float(d)!r},{float(v)!r},{float(curve.dt_yr[i, j])!r}")
    return "\n".join(lines) + "\n"


def resolution_from_csv(text) -> ResolutionCurve:
    rows = []
    header_seen = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if line != "dd_kpc,v_kms,dt_yr":
                raise ValueError(f"unexpected resolution CSV header {line!r}")
            header_seen = True
            continue
        d, v, t = line.split(",")
        rows.append((float(d), float(v), float(t)))
    if not rows:
        raise EmptyGrid("resolution CSV holds no cells")
    dd = tuple(sorted({r[0] for r in rows}))
    v = np.array(sorted({r[1] for r in rows}))
    dt = np.empty((len(dd), len(v)))
    lookup = {(r[0], r[1]): r[2] for r in rows}
    for i, d in enumerate(dd):
        for j, vv in enumerate(v):
            dt[i, j] = lookup[(d, vv)]
    return ResolutionCurve(dd_kpc=dd, v_kms=v, dt_yr=dt)


def propagate_catalog(cat: Catalog, fp, dt_myr, mode="linear",
                      pp=None, step_myr=0.1) -> Catalog:
    """Catalog advanced by dt_myr (negative allowed).

    "linear" moves each cluster along its galactocentric velocity;
    "orbit" integrates in the stand-in potential with fixed steps of
    step_myr.  Observables are regenerated; name, distance error,
    magnitude and metallicity carry over; the epoch advances by dt.
    """
    if mode not in ("linear", "orbit"):
        raise ValueError(f"unknown propagation mode {mode!r}")
    pos, vel = catalog_phase_space(cat, fp)
    if mode == "linear" or dt_myr == 0:
        new_pos = pos + vel * (KPC_PER_MYR_PER_KMS * dt_myr)
        new_vel = vel
    else:
        if pp is None:
            pp = dynamics.PotentialParams()
        sign = 1.0 if dt_myr > 0 else -1.0
        # shrink the step if needed so the span divides exactly
        nsteps = max(1, math.ceil(abs(dt_myr) / step_myr - 1e-12))
        step = abs(dt_myr) / nsteps
        states = [PhaseState(Vec3.from_array(p), Vec3.from_array(sign * v))
                  for p, v in zip(pos, vel)]
        trajs = dynamics.integrate_orbits(states, pp, step, abs(dt_myr))
        new_pos = np.array([t.pos_kpc[-1] for t in trajs])
        new_vel = sign * np.array([t.vel_kms[-1] for t in trajs])
    records = []
    for rec, p, v in zip(cat.records, new_pos, new_vel):
        obs = from_galactocentric(
            PhaseState(Vec3.from_array(p), Vec3.from_array(v)), fp)
        records.append(replace(rec, **obs))
    return Catalog(epoch_jyear=cat.epoch_jyear + dt_myr * 1e6,
                   records=tuple(records), provenance=cat.provenance)


def epoch_error_bound(cat: Catalog, fp, anchor_indices) -> float:
    """Conservative per-map time resolution, Julian years.

    Max over anchors of time_resolution(distance error, galactocentric
    speed): the anchor least able to date the map limits the stamp.
    """
    _, vel = catalog_phase_space(cat, fp)
    worst = 0.0
    for i in anchor_indices:
        speed = float(np.linalg.norm(vel[i]))
        if speed <= 1e-9:
            raise ZeroVelocity(
                f"{cat.records[i].name}: speed {speed} km/s cannot date the map")
        worst = max(worst, time_resolution(cat.records[i].dist_err_kpc, speed))
    return worst


@dataclass(frozen=True)
class EpochEstimate:
    """Recovered elapsed time with its fit residual and a-priori bound."""

    dt_myr: float
    residual_kpc: float
    bound_myr: float


def golden_section(f, a, b, width_tol):
    """Golden-section minimum of a unimodal f on [a, b] to a bracket width."""
    inv = GOLDEN_RATIO_INV
    c = b - inv * (b - a)
    d = a + inv * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > width_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def drift_objective(location_map, corr, cat_now, fp, mode="linear",
                    pp=None, step_myr=0.1):
    """rms misfit between map anchors and back-propagated matched clusters.

    Returns f(dt_myr).  Clusters are moved back by dt (along straight
    lines, or along orbits in the stand-in potential when mode is
    "orbit"), then the two anchor constellations are compared after
    aligning centroids: the sender-relative origin is a pure translation.
    """
    pos, vel = catalog_phase_space(cat_now, fp)
    idx = [r for _, r in sorted(corr.pairs)]
    p = pos[idx]
    v = vel[idx]
    m = location_map.positions()
    m_centered = m - m.mean(axis=0)

    if mode == "linear":
        p_centered = p - p.mean(axis=0)
        v_centered = (v - v.mean(axis=0)) * KPC_PER_MYR_PER_KMS

        def f(dt_myr):
            d = p_centered - v_centered * dt_myr - m_centered
            return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))

        return f

    if mode != "orbit":
        raise ValueError(f"unknown back-propagation mode {mode!r}")
    from . import kernels

    params = (pp if pp is not None else dynamics.PotentialParams()).as_tuple()

    def f(dt_myr):
        if dt_myr == 0.0:
            q = p
        else:
            # integrating the velocity-flipped state forward traces the
            # orbit backward in the static potential
            sign = 1.0 if dt_myr > 0 else -1.0
            nsteps = max(1, math.ceil(abs(dt_myr) / step_myr - 1e-12))
            step = abs(dt_myr) / nsteps
            q, _, _ = kernels.integrate_batch(p, -sign * v, step, nsteps, params)
            q = q[:, -1, :]
        d = (q - q.mean(axis=0)) - m_centered
        return float(np.sqrt(np.mean(np.sum(d * d, axis=1))))

    return f


def recover_epoch(location_map, cat_now: Catalog, fp, window_myr=(-5.0, 5.0),
                  tol_kpc=1.0, coarse_samples=64, width_tol_myr=1e-3,
                  corr=None, mode="linear", pp=None, step_myr=0.1) -> EpochEstimate:
    """Elapsed time since the map epoch, from anchor drift.

    Matches the map anchors in cat_now (or reuses a precomputed
    correspondence), then minimizes the centroid-aligned rms misfit of
    back-propagated anchor positions: a coarse scan of the window
    brackets the global minimum and golden-section search refines it to
    width_tol_myr.  Back-propagation is linear by default; mode="orbit"
    integrates in the stand-in potential instead, which matters for long
    elapsed times.  Raises WindowTooNarrow when the minimum sits on the
    window edge and MatchFailed when the anchors cannot be identified.
    """
    lo, hi = float(window_myr[0]), float(window_myr[1])
    if not hi > lo:
        raise ValueError(f"bad search window ({lo}, {hi})")
    if corr is None:
        try:
            corr = stamp.match_anchors(location_map, cat_now, fp, tol_kpc=tol_kpc)
        except StampError as exc:
            raise MatchFailed(str(exc)) from exc
    f = drift_objective(location_map, corr, cat_now, fp, mode=mode, pp=pp,
                        step_myr=step_myr)
    ts = np.linspace(lo, hi, coarse_samples)
    vals = [f(t) for t in ts]
    j = int(np.argmin(vals))
    if j == 0 or j == coarse_samples - 1:
        raise WindowTooNarrow(
            f"objective minimum at window edge {ts[j]:.3f} Myr; widen the window")
    best = golden_section(f, ts[j - 1], ts[j + 1], width_tol_myr)
    idx = [r for _, r in sorted(corr.pairs)]
    bound_yr = epoch_error_bound(cat_now, fp, idx)
    return EpochEstimate(dt_myr=float(best), residual_kpc=f(best),
                         bound_myr=bound_yr / 1e6)
