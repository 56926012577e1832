# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled single-orbit integration kernels.

Formulas and operation order mirror the pure-numpy fallback in
gstamp.kernels so both backends agree to floating-point precision.
Positions kpc, velocities km/s, time Myr, energies (km/s)^2.
"""

from libc.math cimport log, sqrt

import numpy as np

# 1 km/s in kpc/Myr; kept in sync with gstamp.units.
cdef double C_KMS = 1.0227121650537077e-3


cdef inline double _phi(double x, double y, double z,
                        double gmb, double ab, double gmd, double ad,
                        double bd, double vh, double rc) nogil:
    cdef double r2 = x * x + y * y + z * z
    cdef double s = sqrt(z * z + bd * bd)
    cdef double t = ad + s
    return (-gmb / sqrt(r2 + ab * ab)
            - gmd / sqrt(x * x + y * y + t * t)
            + 0.5 * vh * vh * log(r2 + rc * rc))


cdef inline void _accel(double x, double y, double z,
                        double gmb, double ab, double gmd, double ad,
                        double bd, double vh, double rc,
                        double* out) nogil:
    # -grad(phi) scaled to km/s per Myr
    cdef double r2 = x * x + y * y + z * z
    cdef double b2 = r2 + ab * ab
    cdef double fb = gmb / (b2 * sqrt(b2))
    cdef double s = sqrt(z * z + bd * bd)
    cdef double t = ad + s
    cdef double d2 = x * x + y * y + t * t
    cdef double fd = gmd / (d2 * sqrt(d2))
    cdef double fh = vh * vh / (r2 + rc * rc)
    cdef double common = fb + fh
    out[0] = -(common + fd) * x * C_KMS
    out[1] = -(common + fd) * y * C_KMS
    out[2] = -(common + fd * (t / s)) * z * C_KMS


def integrate(double[::1] pos0, double[::1] vel0, double dt, Py_ssize_t nsteps,
              double gmb, double ab, double gmd, double ad, double bd,
              double vh, double rc, bint use_rk4):
    """Integrate one orbit for nsteps fixed steps; returns (pos, vel, energy)."""
    pos_out = np.empty((nsteps + 1, 3), dtype=np.float64)
    vel_out = np.empty((nsteps + 1, 3), dtype=np.float64)
    en_out = np.empty(nsteps + 1, dtype=np.float64)
    cdef double[:, ::1] P = pos_out
    cdef double[:, ::1] V = vel_out
    cdef double[::1] E = en_out

    cdef double x = pos0[0], y = pos0[1], z = pos0[2]
    cdef double vx = vel0[0], vy = vel0[1], vz = vel0[2]
    cdef double a1[3]
    cdef double a2[3]
    cdef double a3[3]
    cdef double a4[3]
    cdef double half = 0.5 * dt
    cdef double cdt = dt * C_KMS
    cdef double chalf = half * C_KMS
    cdef double sixth = dt / 6.0
    cdef double x2, y2, z2, x3, y3, z3, x4, y4, z4
    cdef double vx2, vy2, vz2, vx3, vy3, vz3, vx4, vy4, vz4
    cdef Py_ssize_t i

    with nogil:
        P[0, 0] = x; P[0, 1] = y; P[0, 2] = z
        V[0, 0] = vx; V[0, 1] = vy; V[0, 2] = vz
        E[0] = 0.5 * (vx * vx + vy * vy + vz * vz) + _phi(
            x, y, z, gmb, ab, gmd, ad, bd, vh, rc)

        if not use_rk4:
            # kick-drift-kick leapfrog
            _accel(x, y, z, gmb, ab, gmd, ad, bd, vh, rc, a1)
            for i in range(nsteps):
                vx = vx + half * a1[0]
                vy = vy + half * a1[1]
                vz = vz + half * a1[2]
                x = x + cdt * vx
                y = y + cdt * vy
                z = z + cdt * vz
                _accel(x, y, z, gmb, ab, gmd, ad, bd, vh, rc, a1)
                vx = vx + half * a1[0]
                vy = vy + half * a1[1]
                vz = vz + half * a1[2]
                P[i + 1, 0] = x; P[i + 1, 1] = y; P[i + 1, 2] = z
                V[i + 1, 0] = vx; V[i + 1, 1] = vy; V[i + 1, 2] = vz
                E[i + 1] = 0.5 * (vx * vx + vy * vy + vz * vz) + _phi(
                    x, y, z, gmb, ab, gmd, ad, bd, vh, rc)
        else:
            # classical RK4 on (x, v) with dx/dt = C*v, dv/dt = accel(x)
            for i in range(nsteps):
                _accel(x, y, z, gmb, ab, gmd, ad, bd, vh, rc, a1)
                x2 = x + chalf * vx
                y2 = y + chalf * vy
                z2 = z + chalf * vz
                vx2 = vx + half * a1[0]
                vy2 = vy + half * a1[1]
                vz2 = vz + half * a1[2]
                _accel(x2, y2, z2, gmb, ab, gmd, ad, bd, vh, rc, a2)
                x3 = x + chalf * vx2
                y3 = y + chalf * vy2
                z3 = z + chalf * vz2
                vx3 = vx + half * a2[0]
                vy3 = vy + half * a2[1]
                vz3 = vz + half * a2[2]
                _accel(x3, y3, z3, gmb, ab, gmd, ad, bd, vh, rc, a3)
                x4 = x + cdt * vx3
                y4 = y + cdt * vy3
                z4 = z + cdt * vz3
                vx4 = vx + dt * a3[0]
                vy4 = vy + dt * a3[1]
                vz4 = vz + dt * a3[2]
                _accel(x4, y4, z4, gmb, ab, gmd, ad, bd, vh, rc, a4)
                x = x + sixth * C_KMS * (vx + 2.0 * vx2 + 2.0 * vx3 + vx4)
                y = y + sixth * C_KMS * (vy + 2.0 * vy2 + 2.0 * vy3 + vy4)
                z = z + sixth * C_KMS * (vz + 2.0 * vz2 + 2.0 * vz3 + vz4)
                vx = vx + sixth * (a1[0] + 2.0 * a2[0] + 2.0 * a3[0] + a4[0])
                vy = vy + sixth * (a1[1] + 2.0 * a2[1] + 2.0 * a3[1] + a4[1])
                vz = vz + sixth * (a1[2] + 2.0 * a2[2] + 2.0 * a3[2] + a4[2])
                P[i + 1, 0] = x; P[i + 1, 1] = y; P[i + 1, 2] = z
                V[i + 1, 0] = vx; V[i + 1, 1] = vy; V[i + 1, 2] = vz
                E[i + 1] = 0.5 * (vx * vx + vy * vy + vz * vz) + _phi(
                    x, y, z, gmb, ab, gmd, ad, bd, vh, rc)

    return pos_out, vel_out, en_out
