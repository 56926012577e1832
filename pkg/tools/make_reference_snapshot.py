"""Generate the bundled 164-cluster reference snapshot.

The snapshot is a deterministic synthetic stand-in for the live catalog
the pipeline would normally ingest: tests must run offline, so the
repository freezes one kinematically realistic set.  Three populations
(bulge, disk, halo) are drawn in galactocentric phase space, converted to
observables with the default frame constants, and rejected until every
cluster satisfies the gates the test suite relies on:

* heliocentric distance within 1.2-39 kpc, galactocentric speed 50-650 km/s;
* |specific energy| >= 2e4 (km/s)^2, so relative-drift diagnostics are
  well conditioned despite the logarithmic halo's arbitrary zero point;
* orbital pericenter over 1 Gyr >= 0.45 kpc, so the default 0.1 Myr
  leapfrog step resolves every orbit;
* secular energy drift over 1 Gyr at that step < 3e-7 (3x headroom under
  the 1e-6 acceptance gate).

Run from the repository root:  python tools/make_reference_snapshot.py
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from gstamp.catalog import Catalog, ClusterRecord, parse_catalog, serialize_catalog, validate
from gstamp.dynamics import PotentialParams, Trajectory, energy_drift
from gstamp.frames import FrameParams, PhaseState, Vec3, from_galactocentric
from gstamp import kernels

SEED = 20230808
EPOCH_JYEAR = 2023.0
N_TOTAL = 164
OUT = os.path.join(os.path.dirname(__file__), "..", "src", "gstamp", "data",
                   "reference_snapshot.csv")

FP = FrameParams()
PP = PotentialParams()

DT_MYR = 0.1
N_STEPS = 10000
MIN_PERI_KPC = 0.45
MIN_ABS_E = 2.0e4
MAX_DRIFT = 3.0e-7


def orbit_gates(pos, vel):
    """(ok, r_min, drift) for one candidate's 1 Gyr orbit."""
    p, v, e = kernels.integrate_batch(pos[None, :], vel[None, :], DT_MYR,
                                      N_STEPS, PP.as_tuple(), "leapfrog")
    r_min = float(np.linalg.norm(p[0], axis=1).min())
    traj = Trajectory(times_myr=np.arange(N_STEPS + 1) * DT_MYR,
                      pos_kpc=p[0], vel_kms=v[0], energy_kms2=e[0])
    drift = energy_drift(traj)
    ok = (r_min >= MIN_PERI_KPC and abs(e[0, 0]) >= MIN_ABS_E
          and drift < MAX_DRIFT and np.isfinite(p).all())
    return ok, r_min, drift


def draw_population(rng, kind, n):
    """Draw n accepted members of one population; returns observable rows."""
    sun = FP.sun_pos().to_array()
    rows = []
    while len(rows) < n:
        if kind == "bulge":
            r = 0.6 + abs(rng.normal(0.0, 1.1))
            if r > 3.5:
                continue
            u = rng.normal(size=3)
            pos = r * u / np.linalg.norm(u)
            vel = rng.normal(0.0, (100.0, 100.0, 90.0))
            # mild prograde rotation
            phi_hat = np.array([-pos[1], pos[0], 0.0])
            nrm = np.linalg.norm(phi_hat)
            if nrm > 1e-6:
                vel += 45.0 * phi_hat / nrm
            feh = float(np.clip(rng.normal(-0.55, 0.35), -1.4, 0.3))
        elif kind == "disk":
            R = rng.uniform(3.5, 11.0)
            phi = rng.uniform(0.0, 2 * np.pi)
            z = rng.exponential(0.9) * rng.choice((-1.0, 1.0))
            if abs(z) > 3.0:
                continue
            pos = np.array([R * np.cos(phi), R * np.sin(phi), z])
            vel = rng.normal(0.0, (90.0, 80.0, 70.0))
            phi_hat = np.array([-pos[1], pos[0], 0.0]) / R
            vel += 110.0 * phi_hat
            feh = float(np.clip(rng.normal(-1.05, 0.45), -2.0, -0.2))
        else:  # halo
            r = np.exp(rng.uniform(np.log(4.0), np.log(36.0)))
            u = rng.normal(size=3)
            pos = r * u / np.linalg.norm(u)
            vel = rng.normal(0.0, (115.0, 115.0, 115.0))
            phi_hat = np.array([-pos[1], pos[0], 0.0])
            nrm = np.linalg.norm(phi_hat)
            if nrm > 1e-6:
                vel += 20.0 * phi_hat / nrm
            feh = float(np.clip(rng.normal(-1.7, 0.4), -2.45, -0.75))

        dist = float(np.linalg.norm(pos - sun))
        speed = float(np.linalg.norm(vel))
        if not 1.2 <= dist <= 39.0:
            continue
        if not 50.0 <= speed <= 650.0:
            continue
        ok, _, _ = orbit_gates(pos, vel)
        if not ok:
            continue

        obs = from_galactocentric(PhaseState(Vec3.from_array(pos),
                                             Vec3.from_array(vel)), FP)
        mv = float(np.clip(rng.normal(-7.4, 1.2), -9.9, -3.6))
        rel_err = float(np.clip(rng.normal(0.025, 0.008), 0.008, 0.05))
        rows.append({
            "ra_deg": round(obs["ra_deg"], 6) % 360.0,
            "dec_deg": round(obs["dec_deg"], 6),
            "dist_kpc": round(obs["dist_kpc"], 5),
            "dist_err_kpc": round(max(0.02, rel_err * obs["dist_kpc"]), 5),
            "pmra_masyr": round(obs["pmra_masyr"], 5),
            "pmdec_masyr": round(obs["pmdec_masyr"], 5),
            "rv_kms": round(obs["rv_kms"], 3),
            "mv_abs": round(mv, 3),
            "feh_dex": round(feh, 3),
        })
    return rows


def main():
    rng = np.random.default_rng(SEED)
    rows = (draw_population(rng, "bulge", 38)
            + draw_population(rng, "disk", 60)
            + draw_population(rng, "halo", 66))
    assert len(rows) == N_TOTAL
    rows.sort(key=lambda r: r["ra_deg"])
    records = [ClusterRecord(name=f"GC-{i + 1:03d}", **row)
               for i, row in enumerate(rows)]
    cat = Catalog(epoch_jyear=EPOCH_JYEAR, records=tuple(records),
                  provenance=f"gstamp synthetic reference snapshot v1 (seed {SEED})")
    text = serialize_catalog(cat)

    # verification pass on the exact bytes that will ship
    parsed = parse_catalog(text)
    assert len(parsed) == N_TOTAL
    assert validate(parsed).count() == 0
    from gstamp.frames import catalog_phase_space
    pos, vel = catalog_phase_space(parsed, FP)
    speeds = np.linalg.norm(vel, axis=1)
    assert speeds.max() < 1000.0, speeds.max()
    worst_drift = 0.0
    worst_peri = np.inf
    for p0, v0 in zip(pos, vel):
        ok, r_min, drift = orbit_gates(p0, v0)
        worst_drift = max(worst_drift, drift)
        worst_peri = min(worst_peri, r_min)
        assert ok, (r_min, drift)
    print(f"speeds: {speeds.min():.1f}..{speeds.max():.1f} km/s")
    print(f"worst pericenter: {worst_peri:.3f} kpc, worst secular drift: {worst_drift:.2e}")

    with open(OUT, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    print(f"wrote {OUT} ({len(parsed)} records)")


if __name__ == "__main__":
    main()
