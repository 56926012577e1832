"""Integration kernels with a compiled fast path and a pure-numpy fallback.

The compiled extension (gstamp._speedups, Cython) integrates one orbit at
a time in a tight C loop; the fallback vectorizes the same arithmetic over
a whole batch of orbits.  Both use identical operation ordering, so they
agree to floating-point precision.  Set GSTAMP_PURE=1 to force the
fallback; ``backend()`` reports which one is active.
"""

import os

import numpy as np

from .units import KPC_PER_MYR_PER_KMS

try:
    from . import _speedups
except ImportError:
    _speedups = None

PURE_ENV = "GSTAMP_PURE"


def compiled_available():
    return _speedups is not None


def backend(name=None):
    """Resolve a backend name: explicit arg > GSTAMP_PURE env > compiled if built."""
    if name is None:
        if os.environ.get(PURE_ENV, "") == "1":
            return "pure"
        return "compiled" if compiled_available() else "pure"
    if name not in ("pure", "compiled"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and not compiled_available():
        raise RuntimeError("compiled kernels are not built")
    return name


def potential_array(pos, params):
    """Potential (km/s)^2 at pos (...,3) for params (gmb, ab, gmd, ad, bd, vh, rc)."""
    gmb, ab, gmd, ad, bd, vh, rc = params
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    r2 = x * x + y * y + z * z
    s = np.sqrt(z * z + bd * bd)
    t = ad + s
    return (-gmb / np.sqrt(r2 + ab * ab)
            - gmd / np.sqrt(x * x + y * y + t * t)
            + 0.5 * vh * vh * np.log(r2 + rc * rc))


def acceleration_array(pos, params):
    """-grad(potential) at pos (...,3), in km/s per Myr."""
    gmb, ab, gmd, ad, bd, vh, rc = params
    pos = np.asarray(pos, dtype=float)
    x, y, z = pos[..., 0], pos[..., 1], pos[..., 2]
    r2 = x * x + y * y + z * z
    b2 = r2 + ab * ab
    fb = gmb / (b2 * np.sqrt(b2))
    s = np.sqrt(z * z + bd * bd)
    t = ad + s
    d2 = x * x + y * y + t * t
    fd = gmd / (d2 * np.sqrt(d2))
    fh = vh * vh / (r2 + rc * rc)
    common = fb + fh
    out = np.empty(np.shape(pos), dtype=float)
    out[..., 0] = -(common + fd) * x * KPC_PER_MYR_PER_KMS
    out[..., 1] = -(common + fd) * y * KPC_PER_MYR_PER_KMS
    out[..., 2] = -(common + fd * (t / s)) * z * KPC_PER_MYR_PER_KMS
    return out


def _energy(pos, vel, params):
    return 0.5 * np.sum(vel * vel, axis=-1) + potential_array(pos, params)


def _integrate_pure(pos0, vel0, dt, nsteps, params, use_rk4):
    """Vectorized fallback over a batch of m orbits; mirrors _speedups.integrate."""
    m = pos0.shape[0]
    pos_out = np.empty((m, nsteps + 1, 3))
    vel_out = np.empty((m, nsteps + 1, 3))
    en_out = np.empty((m, nsteps + 1))
    x = pos0.copy()
    v = vel0.copy()
    pos_out[:, 0] = x
    vel_out[:, 0] = v
    en_out[:, 0] = _energy(x, v, params)
    half = 0.5 * dt
    cdt = dt * KPC_PER_MYR_PER_KMS
    chalf = half * KPC_PER_MYR_PER_KMS
    sixth = dt / 6.0

    with np.errstate(all="ignore"):
        if not use_rk4:
            a = acceleration_array(x, params)
            for i in range(nsteps):
                v = v + half * a
                x = x + cdt * v
                a = acceleration_array(x, params)
                v = v + half * a
                pos_out[:, i + 1] = x
                vel_out[:, i + 1] = v
                en_out[:, i + 1] = _energy(x, v, params)
        else:
            for i in range(nsteps):
                a1 = acceleration_array(x, params)
                x2 = x + chalf * v
                v2 = v + half * a1
                a2 = acceleration_array(x2, params)
                x3 = x + chalf * v2
                v3 = v + half * a2
                a3 = acceleration_array(x3, params)
                x4 = x + cdt * v3
                v4 = v + dt * a3
                a4 = acceleration_array(x4, params)
                x = x + sixth * KPC_PER_MYR_PER_KMS * (v + 2.0 * v2 + 2.0 * v3 + v4)
                v = v + sixth * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
                pos_out[:, i + 1] = x
                vel_out[:, i + 1] = v
                en_out[:, i + 1] = _energy(x, v, params)
    return pos_out, vel_out, en_out


def integrate_batch(pos0, vel0, dt, nsteps, params, scheme="leapfrog", backend_name=None):
    """Integrate m orbits for nsteps fixed steps of dt Myr.

    pos0, vel0: (m, 3) arrays.  Returns (pos (m, nsteps+1, 3),
    vel (m, nsteps+1, 3), energy (m, nsteps+1)).
    """
    if scheme not in ("leapfrog", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    pos0 = np.ascontiguousarray(pos0, dtype=float)
    vel0 = np.ascontiguousarray(vel0, dtype=float)
    use_rk4 = scheme == "rk4"
    which = backend(backend_name)
    if which == "pure":
        return _integrate_pure(pos0, vel0, dt, nsteps, params, use_rk4)
    m = pos0.shape[0]
    pos_out = np.empty((m, nsteps + 1, 3))
    vel_out = np.empty((m, nsteps + 1, 3))
    en_out = np.empty((m, nsteps + 1))
    for j in range(m):
        p, v, e = _speedups.integrate(pos0[j], vel0[j], dt, nsteps, *params, use_rk4)
        pos_out[j] = p
        vel_out[j] = v
        en_out[j] = e
    return pos_out, vel_out, en_out
