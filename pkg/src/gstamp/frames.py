"""Coordinate transforms between equatorial observables and galactocentric
Cartesian phase space.

Conventions: right-handed galactocentric frame, Sun at (-r0, 0, zsun),
Galactic rotation toward +y, north Galactic pole toward +z.  Galactic
(l, b) are heliocentric; the Cartesian frame is the parallel translation
of the heliocentric galactic axes to the Galactic centre (no tilt for the
Sun's height above the plane).
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DegenerateDirection, InvariantViolation
from .units import DEG2RAD, KMS_PER_MASYR_KPC, RAD2DEG


@dataclass(frozen=True)
class Vec3:
    """Cartesian triple; kpc for positions, km/s for velocities."""

    x: float
    y: float
    z: float

    def to_array(self):
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def norm(self):
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class PhaseState:
    """Galactocentric position (kpc) and velocity (km/s)."""

    pos: Vec3
    vel: Vec3


@dataclass(frozen=True)
class FrameParams:
    """Solar position/velocity and the equatorial->galactic rotation constants."""

    r0_kpc: float = 8.3
    zsun_kpc: float = 0.02
    vsun_kms: tuple = (11.1, 250.0, 7.3)
    ngp_ra_deg: float = 192.85948
    ngp_dec_deg: float = 27.12825
    lncp_deg: float = 122.93192

    def __post_init__(self):
        if not self.r0_kpc > 0:
            raise InvariantViolation(f"r0_kpc must be positive, got {self.r0_kpc}")
        if not abs(self.zsun_kpc) < 0.2:
            raise InvariantViolation(f"|zsun_kpc| must be < 0.2, got {self.zsun_kpc}")
        vals = (self.r0_kpc, self.zsun_kpc, *self.vsun_kms,
                self.ngp_ra_deg, self.ngp_dec_deg, self.lncp_deg)
        if len(self.vsun_kms) != 3 or not all(math.isfinite(v) for v in vals):
            raise InvariantViolation("frame parameters must be three-component and finite")

    def sun_pos(self):
        """Sun's galactocentric position, kpc."""
        return Vec3(-self.r0_kpc, 0.0, self.zsun_kpc)

    def sun_vel(self):
        return Vec3(*self.vsun_kms)


def _unit_from_angles(lon_deg, lat_deg):
    lon = lon_deg * DEG2RAD
    lat = lat_deg * DEG2RAD
    clat = math.cos(lat)
    return np.array([clat * math.cos(lon), clat * math.sin(lon), math.sin(lat)])


@lru_cache(maxsize=8)
def _rotation(ngp_ra_deg, ngp_dec_deg, lncp_deg):
    """Rows are the galactic basis vectors expressed in equatorial axes.

    Built from two direction correspondences: the NGP maps to +z, and the
    north celestial pole lands at galactic longitude lncp_deg.
    """
    z = _unit_from_angles(ngp_ra_deg, ngp_dec_deg)
    ncp = np.array([0.0, 0.0, 1.0])
    p = ncp - np.dot(ncp, z) * z
    p /= np.linalg.norm(p)
    q = np.cross(z, p)
    lncp = lncp_deg * DEG2RAD
    x = math.cos(lncp) * p - math.sin(lncp) * q
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def rotation_matrix(fp: FrameParams):
    """3x3 matrix taking equatorial Cartesian vectors to galactic ones."""
    return _rotation(fp.ngp_ra_deg, fp.ngp_dec_deg, fp.lncp_deg)


def _angles_from_unit(v):
    lat = math.asin(min(1.0, max(-1.0, float(v[2]))))
    lon = math.atan2(float(v[1]), float(v[0]))
    return (lon * RAD2DEG) % 360.0, lat * RAD2DEG


def equatorial_to_galactic(ra_deg, dec_deg, fp: FrameParams):
    """(ra, dec) J2000 degrees -> galactic (l, b) degrees."""
    v = rotation_matrix(fp) @ _unit_from_angles(ra_deg, dec_deg)
    return _angles_from_unit(v)


def galactic_to_equatorial(l_deg, b_deg, fp: FrameParams):
    """Galactic (l, b) degrees -> (ra, dec) J2000 degrees."""
    v = rotation_matrix(fp).T @ _unit_from_angles(l_deg, b_deg)
    return _angles_from_unit(v)


def _equatorial_triad(ra_deg, dec_deg):
    """Line-of-sight unit vector and the (east, north) tangent basis."""
    ra = ra_deg * DEG2RAD
    dec = dec_deg * DEG2RAD
    cra, sra = math.cos(ra), math.sin(ra)
    cdec, sdec = math.cos(dec), math.sin(dec)
    los = np.array([cdec * cra, cdec * sra, sdec])
    east = np.array([-sra, cra, 0.0])
    north = np.array([-sdec * cra, -sdec * sra, cdec])
    return los, east, north


def to_galactocentric(rec, fp: FrameParams) -> PhaseState:
    """Observables of one cluster record -> galactocentric phase state.

    Position: heliocentric direction from (l, b) scaled by distance, plus
    the solar offset.  Velocity: radial + tangential components in the
    equatorial triad (4.74047 km/s per mas/yr/kpc), rotated to galactic
    axes, plus the solar velocity.
    """
    m = rotation_matrix(fp)
    los, east, north = _equatorial_triad(rec.ra_deg, rec.dec_deg)
    d_gal = m @ los
    sun = fp.sun_pos()
    pos = Vec3(sun.x + rec.dist_kpc * d_gal[0],
               sun.y + rec.dist_kpc * d_gal[1],
               sun.z + rec.dist_kpc * d_gal[2])
    vt = KMS_PER_MASYR_KPC * rec.dist_kpc
    v_eq = rec.rv_kms * los + vt * (rec.pmra_masyr * east + rec.pmdec_masyr * north)
    v_gal = m @ v_eq
    vsun = fp.sun_vel()
    vel = Vec3(v_gal[0] + vsun.x, v_gal[1] + vsun.y, v_gal[2] + vsun.z)
    return PhaseState(pos, vel)


def from_galactocentric(st: PhaseState, fp: FrameParams):
    """Inverse of to_galactocentric.

    Returns a dict of the six regenerated observables: ra_deg, dec_deg,
    dist_kpc, pmra_masyr, pmdec_masyr, rv_kms.  Raises DegenerateDirection
    when the state coincides with the Sun.
    """
    m = rotation_matrix(fp)
    sun = fp.sun_pos()
    rel = np.array([st.pos.x - sun.x, st.pos.y - sun.y, st.pos.z - sun.z])
    dist = float(np.linalg.norm(rel))
    if dist < 1e-9:
        raise DegenerateDirection("state coincides with the Sun")
    d_eq = m.T @ (rel / dist)
    ra, dec = _angles_from_unit(d_eq)
    vsun = fp.sun_vel()
    v_gal = np.array([st.vel.x - vsun.x, st.vel.y - vsun.y, st.vel.z - vsun.z])
    v_eq = m.T @ v_gal
    los, east, north = _equatorial_triad(ra, dec)
    rv = float(np.dot(v_eq, los))
    vt = KMS_PER_MASYR_KPC * dist
    pmra = float(np.dot(v_eq, east)) / vt
    pmdec = float(np.dot(v_eq, north)) / vt
    return {
        "ra_deg": ra,
        "dec_deg": dec,
        "dist_kpc": dist,
        "pmra_masyr": pmra,
        "pmdec_masyr": pmdec,
        "rv_kms": rv,
    }


def catalog_phase_space(cat, fp: FrameParams):
    """Positions (n,3) kpc and velocities (n,3) km/s for a whole catalog."""
    m = rotation_matrix(fp)
    ra = np.array([r.ra_deg for r in cat.records]) * DEG2RAD
    dec = np.array([r.dec_deg for r in cat.records]) * DEG2RAD
    dist = np.array([r.dist_kpc for r in cat.records])
    pmra = np.array([r.pmra_masyr for r in cat.records])
    pmdec = np.array([r.pmdec_masyr for r in cat.records])
    rv = np.array([r.rv_kms for r in cat.records])

    cra, sra = np.cos(ra), np.sin(ra)
    cdec, sdec = np.cos(dec), np.sin(dec)
    los = np.stack([cdec * cra, cdec * sra, sdec], axis=1)
    east = np.stack([-sra, cra, np.zeros_like(ra)], axis=1)
    north = np.stack([-sdec * cra, -sdec * sra, cdec], axis=1)

    sun = fp.sun_pos().to_array()
    pos = sun + dist[:, None] * (los @ m.T)
    vt = KMS_PER_MASYR_KPC * dist
    v_eq = rv[:, None] * los + (vt * pmra)[:, None] * east + (vt * pmdec)[:, None] * north
    vel = v_eq @ m.T + fp.sun_vel().to_array()
    return pos, vel
