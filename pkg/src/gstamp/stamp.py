"""Location-map construction, the binary stamp codec, and the
recipient-side anchor matching and trilateration.

Binary stamp format v1 (all little-endian):

====== ======= ==========================================
offset size    field
====== ======= ==========================================
0      4       magic "MIAB" (0x4D 0x49 0x41 0x42)
4      1       version = 1
5      2       k, unsigned 16-bit anchor count
7      8       epoch, IEEE-754 64-bit Julian year
15     16*k    anchor blocks
\\-      2       quantized absolute magnitude, signed 16-bit
\\-      2       quantized metallicity, signed 16-bit
\\-      4*3     x, y, z sender-relative position, signed
               32-bit fixed point in parsecs
end    4       CRC32 over all preceding bytes
====== ======= ==========================================
"""

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadK,
    BadMagic,
    ChecksumFail,
    Degenerate,
    DegenerateGeometry,
    MatchAmbiguous,
    NoConvergence,
    NoMatch,
    TooFewCandidates,
    Truncated,
    UnsupportedVersion,
)
from .frames import Vec3, catalog_phase_space

MAGIC = b"MIAB"
VERSION = 1
MV_QUANTUM_MAG = 0.25
FEH_QUANTUM_DEX = 0.1
MIN_ANCHORS = 4
MIN_PAIR_SEP_KPC = 0.5

_HEADER = struct.Struct("<4sBHd")
_ANCHOR = struct.Struct("<hhiii")
_CRC = struct.Struct("<I")


def quantize(value, quantum):
    return int(round(value / quantum))


@dataclass(frozen=True)
class AnchorSignature:
    """Observable fingerprint of one anchor, in quantization units."""

    mv_q: int
    feh_q: int

    @classmethod
    def from_record(cls, rec):
        return cls(mv_q=quantize(rec.mv_abs, MV_QUANTUM_MAG),
                   feh_q=quantize(rec.feh_dex, FEH_QUANTUM_DEX))

    def mv_abs(self):
        return self.mv_q * MV_QUANTUM_MAG

    def feh_dex(self):
        return self.feh_q * FEH_QUANTUM_DEX


@dataclass(frozen=True)
class LocationMap:
    """Stamp payload: anchor signatures plus sender-relative positions (kpc)."""

    epoch_jyear: float
    anchors: tuple  # of (AnchorSignature, Vec3)

    @property
    def k(self):
        return len(self.anchors)

    def positions(self):
        return np.array([[p.x, p.y, p.z] for _, p in self.anchors])

    def distances(self):
        """Sender-to-anchor distances, kpc."""
        return np.linalg.norm(self.positions(), axis=1)


def select_anchors(cat, fp, k, min_sep_kpc=1.0):
    """Pick k anchor record indices, brightest (lowest mv_abs) first.

    Candidates closer than min_sep_kpc to an already-chosen anchor are
    skipped; ties in brightness break by name.  Deterministic.
    """
    if k < MIN_ANCHORS or k > len(cat):
        raise BadK(k, f"need {MIN_ANCHORS} <= k <= {len(cat)}")
    pos, _ = catalog_phase_space(cat, fp)
    order = sorted(range(len(cat)),
                   key=lambda i: (cat.records[i].mv_abs, cat.records[i].name))
    chosen = []
    for i in order:
        if len(chosen) == k:
            break
        if all(np.linalg.norm(pos[i] - pos[j]) >= min_sep_kpc for j in chosen):
            chosen.append(i)
    if len(chosen) < k:
        raise TooFewCandidates(
            f"only {len(chosen)} of {k} anchors survive min_sep={min_sep_kpc} kpc")
    return chosen


def _quantize_pos_kpc(value_kpc, quantum_pc):
    return quantize(value_kpc * 1000.0, quantum_pc) * quantum_pc / 1000.0


def build_location_map(cat, fp, anchor_indices, pos_quantum_pc=1) -> LocationMap:
    """Sender-relative location map for the given anchors.

    Positions are galactocentric minus the Sun's position, quantized to
    pos_quantum_pc.  Raises DegenerateGeometry for collinear anchors or
    pairwise separations at or below 0.5 kpc.
    """
    if len(anchor_indices) < MIN_ANCHORS:
        raise BadK(len(anchor_indices), f"need at least {MIN_ANCHORS} anchors")
    if len(set(anchor_indices)) != len(anchor_indices):
        raise DegenerateGeometry("repeated anchor index")
    pos, _ = catalog_phase_space(cat, fp)
    sun = fp.sun_pos().to_array()
    anchors = []
    for i in anchor_indices:
        rel = pos[i] - sun
        qrel = Vec3(*(_quantize_pos_kpc(c, pos_quantum_pc) for c in rel))
        anchors.append((AnchorSignature.from_record(cat.records[i]), qrel))
    pts = np.array([[p.x, p.y, p.z] for _, p in anchors])
    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    iu = np.triu_indices(len(pts), k=1)
    if dists[iu].min() <= MIN_PAIR_SEP_KPC:
        raise DegenerateGeometry(
            f"anchor pair separation {dists[iu].min():.3f} kpc <= {MIN_PAIR_SEP_KPC}")
    sv = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if sv[1] < 1e-9 * max(sv[0], 1.0):
        raise DegenerateGeometry("anchors are collinear")
    return LocationMap(epoch_jyear=cat.epoch_jyear, anchors=tuple(anchors))


def encode_stamp(location_map: LocationMap, pos_quantum_pc=1) -> bytes:
    """Serialize a map to the v1 binary format (bit-stable across platforms)."""
    if not (isinstance(pos_quantum_pc, int) and pos_quantum_pc >= 1):
        raise ValueError("pos_quantum_pc must be a positive integer of parsecs")
    k = location_map.k
    if k < 1 or k > 0xFFFF:
        raise BadK(k, "stamp format carries 1..65535 anchors")
    out = bytearray(_HEADER.pack(MAGIC, VERSION, k, float(location_map.epoch_jyear)))
    for sig, p in location_map.anchors:
        ints = [quantize(c * 1000.0, pos_quantum_pc) * pos_quantum_pc
                for c in (p.x, p.y, p.z)]
        if any(not -2**31 <= v < 2**31 for v in ints):
            raise ValueError(f"anchor position {p} exceeds the 32-bit parsec range")
        out += _ANCHOR.pack(sig.mv_q, sig.feh_q, *ints)
    out += _CRC.pack(zlib.crc32(bytes(out)))
    return bytes(out)


def decode_stamp(blob: bytes) -> LocationMap:
    """Parse v1 stamp bytes back into a LocationMap."""
    if len(blob) < _HEADER.size + _CRC.size:
        raise Truncated(f"stamp of {len(blob)} bytes is shorter than a header")
    magic, version, k, epoch = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise UnsupportedVersion(version)
    expected = _HEADER.size + k * _ANCHOR.size + _CRC.size
    if len(blob) < expected:
        raise Truncated(f"expected {expected} bytes for k={k}, got {len(blob)}")
    if len(blob) > expected:
        raise Truncated(f"trailing bytes: expected {expected}, got {len(blob)}")
    (crc,) = _CRC.unpack_from(blob, expected - _CRC.size)
    if crc != zlib.crc32(blob[: expected - _CRC.size]):
        raise ChecksumFail("stamp CRC32 mismatch")
    anchors = []
    for i in range(k):
        mv_q, feh_q, xi, yi, zi = _ANCHOR.unpack_from(blob, _HEADER.size + i * _ANCHOR.size)
        anchors.append((AnchorSignature(mv_q, feh_q),
                        Vec3(xi / 1000.0, yi / 1000.0, zi / 1000.0)))
    return LocationMap(epoch_jyear=epoch, anchors=tuple(anchors))


@dataclass(frozen=True)
class Correspondence:
    """Mapping from map anchor indices to catalog record indices."""

    pairs: tuple  # of (anchor_index, record_index)
    rms_residual_kpc: float

    def record_indices(self):
        return [r for _, r in sorted(self.pairs)]


def _pairwise(points):
    d = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.sum(d * d, axis=2))


def match_anchors(location_map: LocationMap, cat, fp, tol_kpc=1.0) -> Correspondence:
    """Identify the map's anchors among the catalog records.

    Candidate records must agree with an anchor's quantized signature to
    within one quantum; assignments must keep every anchor-pair distance
    within tol_kpc of the map's.  All signature-compatible assignments
    are searched (most-constrained anchor first, distance pruning); the
    one minimizing the rms pairwise-distance residual wins.  Raises
    MatchAmbiguous when the runner-up is within 10% of the winner, and
    NoMatch when no consistent assignment exists.
    """
    k = location_map.k
    if len(cat) < k:
        raise NoMatch(f"catalog has {len(cat)} records for {k} anchors")
    cat_pos, _ = catalog_phase_space(cat, fp)
    cat_sig = [AnchorSignature.from_record(r) for r in cat.records]
    map_pos = location_map.positions()
    dm = _pairwise(map_pos)
    dc = _pairwise(cat_pos)

    candidates = []
    for sig, _ in location_map.anchors:
        cands = [j for j, s in enumerate(cat_sig)
                 if abs(s.mv_q - sig.mv_q) <= 1 and abs(s.feh_q - sig.feh_q) <= 1]
        if not cands:
            raise NoMatch("an anchor has no signature-compatible catalog record")
        candidates.append(cands)

    order = sorted(range(k), key=lambda i: (len(candidates[i]), i))
    solutions = []

    def search(pos_in_order, assignment, used):
        if pos_in_order == k:
            chosen = [assignment[i] for i in range(k)]
            iu = np.triu_indices(k, 1)
            resid = dm[iu] - dc[np.ix_(chosen, chosen)][iu]
            solutions.append((float(np.sqrt(np.mean(resid * resid))), tuple(chosen)))
            return
        i = order[pos_in_order]
        for j in candidates[i]:
            if j in used:
                continue
            ok = True
            for prev_pos in range(pos_in_order):
                i2 = order[prev_pos]
                if abs(dm[i, i2] - dc[j, assignment[i2]]) > tol_kpc:
                    ok = False
                    break
            if ok:
                assignment[i] = j
                used.add(j)
                search(pos_in_order + 1, assignment, used)
                used.discard(j)
                del assignment[i]

    search(0, {}, set())
    if not solutions:
        raise NoMatch("no assignment satisfies the pairwise-distance constraints")
    solutions.sort()
    best_rms, best = solutions[0]
    if len(solutions) > 1:
        second_rms = solutions[1][0]
        if second_rms <= 1.1 * best_rms:
            raise MatchAmbiguous(
                f"best rms {best_rms:.4f} kpc vs runner-up {second_rms:.4f} kpc")
    pairs = tuple((i, best[i]) for i in range(k))
    return Correspondence(pairs=pairs, rms_residual_kpc=best_rms)


def _gauss_newton(anchor_pos, ranges, start, max_iter=100, step_tol=1e-6):
    """Damped Gauss-Newton for sum((|x_i - s| - d_i)^2); rms history returned."""
    s = np.asarray(start, dtype=float).copy()

    def residual(sv):
        return np.linalg.norm(anchor_pos - sv, axis=1) - ranges

    r = residual(s)
    rms = float(np.sqrt(np.mean(r * r)))
    history = [rms]
    for _ in range(max_iter):
        sep = s - anchor_pos
        dist = np.linalg.norm(sep, axis=1)
        dist = np.maximum(dist, 1e-12)
        jac = sep / dist[:, None]
        step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        alpha = 1.0
        while alpha > 1e-8:
            trial = s + alpha * step
            rt = residual(trial)
            rms_t = float(np.sqrt(np.mean(rt * rt)))
            if rms_t <= rms:
                break
            alpha *= 0.5
        else:
            return s, rms, history, True
        moved = float(np.linalg.norm(alpha * step))
        s, r, rms = trial, rt, rms_t
        history.append(rms)
        if moved < step_tol:
            return s, rms, history, True
    return s, rms, history, False


def locate_sender(corr: Correspondence, location_map: LocationMap, cat, fp):
    """Trilaterate the sender from matched anchors.

    Minimizes sum((|x_i - s| - d_i)^2) over the sender position s, where
    x_i are the matched records' galactocentric positions and d_i the
    map's sender-anchor distances.  Returns (Vec3 estimate, rms residual
    kpc).  Raises Degenerate for rank-deficient (e.g. coplanar) anchor
    geometry and NoConvergence if Gauss-Newton stalls.
    """
    if len(corr.pairs) < MIN_ANCHORS:
        raise Degenerate(f"need at least {MIN_ANCHORS} matched anchors")
    cat_pos, _ = catalog_phase_space(cat, fp)
    idx = [r for _, r in sorted(corr.pairs)]
    x = cat_pos[idx]
    d = location_map.distances()
    sv = np.linalg.svd(x - x.mean(axis=0), compute_uv=False)
    if sv[2] < 1e-6:
        raise Degenerate("anchors are coplanar; sender position is ambiguous")
    s, rms, _, converged = _gauss_newton(x, d, x.mean(axis=0))
    if not converged:
        raise NoConvergence(f"no convergence after 100 iterations (rms {rms:.4f} kpc)")
    return Vec3.from_array(s), rms
