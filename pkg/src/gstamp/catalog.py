"""Globular-cluster catalog ingestion, validation, synthesis and caching.

The interchange format is a strict CSV contract: exactly these columns
(order-insensitive), UTF-8, LF line endings, '.' decimals::

    name,ra_deg,dec_deg,dist_kpc,dist_err_kpc,pmra_masyr,pmdec_masyr,rv_kms,mv_abs,feh_dex

Lines starting with '#' are comments; ``# epoch_jyear = X`` and
``# provenance = ...`` comments carry catalog-level metadata through
serialization round trips.
"""

import hashlib
import math
import os
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np

from .errors import (
    BadCount,
    BadNumber,
    CacheUnwritable,
    ChecksumMismatch,
    DuplicateName,
    InvariantViolation,
    MissingColumn,
    NetworkUnavailable,
)
from .units import KMS_PER_MASYR_KPC

COLUMNS = (
    "name", "ra_deg", "dec_deg", "dist_kpc", "dist_err_kpc",
    "pmra_masyr", "pmdec_masyr", "rv_kms", "mv_abs", "feh_dex",
)

OFFLINE_ENV = "GSTAMP_OFFLINE"
CACHE_ENV = "GSTAMP_CACHE"

_REFERENCE_FILE = "reference_snapshot.csv"


@dataclass(frozen=True)
class ClusterRecord:
    """One cluster's observables (J2000 sky position, kinematics, fingerprint)."""

    name: str
    ra_deg: float
    dec_deg: float
    dist_kpc: float
    dist_err_kpc: float
    pmra_masyr: float
    pmdec_masyr: float
    rv_kms: float
    mv_abs: float
    feh_dex: float

    def check(self, row=None):
        """Raise InvariantViolation if any field is out of its documented range."""
        fields = (self.ra_deg, self.dec_deg, self.dist_kpc, self.dist_err_kpc,
                  self.pmra_masyr, self.pmdec_masyr, self.rv_kms,
                  self.mv_abs, self.feh_dex)
        if not self.name:
            raise InvariantViolation("empty cluster name", row=row)
        if "," in self.name or "\n" in self.name:
            raise InvariantViolation(f"name {self.name!r} breaks the CSV contract", row=row)
        if not all(math.isfinite(v) for v in fields):
            raise InvariantViolation(f"{self.name}: non-finite field", row=row)
        if not 0.0 <= self.ra_deg < 360.0:
            raise InvariantViolation(f"{self.name}: ra_deg {self.ra_deg} outside [0, 360)", row=row)
        if not -90.0 <= self.dec_deg <= 90.0:
            raise InvariantViolation(f"{self.name}: dec_deg {self.dec_deg} outside [-90, 90]", row=row)
        if not self.dist_kpc > 0:
            raise InvariantViolation(f"{self.name}: dist_kpc {self.dist_kpc} must be positive", row=row)
        if not self.dist_err_kpc >= 0:
            raise InvariantViolation(f"{self.name}: dist_err_kpc {self.dist_err_kpc} negative", row=row)
        if not -15.0 <= self.mv_abs <= 0.0:
            raise InvariantViolation(f"{self.name}: mv_abs {self.mv_abs} outside [-15, 0]", row=row)
        if not -3.5 <= self.feh_dex <= 0.5:
            raise InvariantViolation(f"{self.name}: feh_dex {self.feh_dex} outside [-3.5, 0.5]", row=row)


@dataclass(frozen=True)
class Catalog:
    """Immutable, ordered collection of cluster records at one epoch."""

    epoch_jyear: float
    records: tuple
    provenance: str = ""

    def __len__(self):
        return len(self.records)

    def index_of(self, name):
        for i, rec in enumerate(self.records):
            if rec.name == name:
                return i
        raise KeyError(name)


def parse_catalog(text, epoch_jyear=None, provenance=None) -> Catalog:
    """Parse canonical CSV text into a Catalog.

    Explicit epoch_jyear/provenance arguments win over values embedded in
    '#' comment lines; the epoch defaults to 2000.0 when neither is given.
    """
    meta = {}
    header = None
    data_rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = value.strip()
            continue
        if header is None:
            header = [c.strip() for c in line.split(",")]
        else:
            data_rows.append(line)

    if header is None:
        raise MissingColumn(COLUMNS[0])
    for col in COLUMNS:
        if col not in header:
            raise MissingColumn(col)
    col_idx = {col: header.index(col) for col in COLUMNS}

    records = []
    seen = set()
    for row_no, line in enumerate(data_rows, start=1):
        parts = [p.strip() for p in line.split(",")]
        values = {}
        for col in COLUMNS:
            idx = col_idx[col]
            if idx >= len(parts):
                raise BadNumber(row_no, col, None)
            values[col] = parts[idx]
        name = values["name"]
        if name in seen:
            raise DuplicateName(name)
        seen.add(name)
        numeric = {}
        for col in COLUMNS[1:]:
            try:
                numeric[col] = float(values[col])
            except ValueError:
                raise BadNumber(row_no, col, values[col]) from None
        rec = ClusterRecord(name=name, **numeric)
        rec.check(row=row_no)
        records.append(rec)

    if epoch_jyear is None:
        epoch_jyear = float(meta.get("epoch_jyear", 2000.0))
    if provenance is None:
        provenance = meta.get("provenance", "")
    return Catalog(epoch_jyear=float(epoch_jyear), records=tuple(records),
                   provenance=provenance)


def serialize_catalog(cat: Catalog, extra_comments=()) -> str:
    """Render a Catalog back to canonical CSV (round-trips via parse_catalog)."""
    lines = [f"# epoch_jyear = {cat.epoch_jyear!r}"]
    if cat.provenance:
        lines.append(f"# provenance = {cat.provenance}")
    lines.extend(extra_comments)
    lines.append(",".join(COLUMNS))
    for rec in cat.records:
        vals = [rec.name] + [repr(getattr(rec, col)) for col in COLUMNS[1:]]
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


@dataclass
class ValidationReport:
    """Per-record warnings; an empty report means the catalog is clean."""

    warnings: list = field(default_factory=list)

    def __bool__(self):
        return bool(self.warnings)

    def count(self):
        return len(self.warnings)


def validate(cat: Catalog) -> ValidationReport:
    """Non-fatal plausibility checks; never mutates or raises."""
    report = ValidationReport()
    for rec in cat.records:
        if rec.dist_err_kpc > rec.dist_kpc:
            report.warnings.append(
                f"{rec.name}: distance error {rec.dist_err_kpc} kpc exceeds distance")
        if rec.dist_kpc > 60.0:
            report.warnings.append(
                f"{rec.name}: distance {rec.dist_kpc} kpc beyond plausible cluster range")
        if abs(rec.rv_kms) > 1000.0:
            report.warnings.append(
                f"{rec.name}: |radial velocity| {rec.rv_kms} km/s implausibly large")
    return report


def _cache_paths(url, cache_dir):
    stem = hashlib.sha256(url.encode()).hexdigest()
    return (os.path.join(cache_dir, stem + ".csv"),
            os.path.join(cache_dir, stem + ".csv.sha256"))


def _offline(offline):
    if offline is not None:
        return offline
    return os.environ.get(OFFLINE_ENV, "") == "1"


def fetch_snapshot(url, cache_dir=None, offline=None, timeout=30.0) -> str:
    """Return catalog text for ``url``, caching on disk.

    A cached copy with a valid sha256 sidecar is returned without touching
    the network.  Offline mode (GSTAMP_OFFLINE=1 or offline=True) forbids
    network access entirely.  GSTAMP_CACHE overrides cache_dir.
    """
    cache_dir = os.environ.get(CACHE_ENV) or cache_dir
    if cache_dir is None:
        raise CacheUnwritable("no cache directory configured")
    data_path, sum_path = _cache_paths(url, cache_dir)

    if os.path.exists(data_path):
        with open(data_path, "rb") as fh:
            blob = fh.read()
        digest = hashlib.sha256(blob).hexdigest()
        if not os.path.exists(sum_path):
            raise ChecksumMismatch(f"missing checksum sidecar for {data_path}")
        with open(sum_path, encoding="ascii") as fh:
            expected = fh.read().strip()
        if digest != expected:
            raise ChecksumMismatch(f"cache corrupt for {url}")
        return blob.decode("utf-8")

    if _offline(offline):
        raise NetworkUnavailable(f"offline mode and no cached copy of {url}")

    try:
        os.makedirs(cache_dir, exist_ok=True)
    except OSError as exc:
        raise CacheUnwritable(str(exc)) from exc
    if not os.access(cache_dir, os.W_OK):
        raise CacheUnwritable(cache_dir)

    try:
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            blob = resp.read()
    except (urllib.error.URLError, OSError) as exc:
        raise NetworkUnavailable(f"cannot fetch {url}: {exc}") from exc

    lock_path = data_path + ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CacheUnwritable(f"cache locked: {lock_path}") from None
    try:
        with open(data_path, "wb") as fh:
            fh.write(blob)
        with open(sum_path, "w", encoding="ascii") as fh:
            fh.write(hashlib.sha256(blob).hexdigest() + "\n")
    finally:
        os.close(fd)
        os.unlink(lock_path)
    return blob.decode("utf-8")


def synth_catalog(seed, n, epoch_jyear=2000.0) -> Catalog:
    """Deterministic pseudo-random catalog for tests and demos.

    Same (seed, n) yields an identical catalog.  Fields are drawn from
    plausible ranges: distance 1-40 kpc, velocity analogues within
    +/-500 km/s, mv_abs ~ N(-10, 2), [Fe/H] ~ N(-1.5, 0.6), all clipped
    to the record invariants.
    """
    if n < 1:
        raise BadCount(n)
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        dist = float(np.exp(rng.uniform(np.log(1.0), np.log(40.0))))
        ra = float(rng.uniform(0.0, 360.0))
        dec = float(np.degrees(np.arcsin(rng.uniform(-1.0, 1.0))))
        # tangential velocity analogue bounded by 500 km/s per component
        vt_ra = float(np.clip(rng.normal(0.0, 150.0), -500.0, 500.0))
        vt_dec = float(np.clip(rng.normal(0.0, 150.0), -500.0, 500.0))
        kms_per_pm = KMS_PER_MASYR_KPC * dist
        rec = ClusterRecord(
            name=f"SYN-{i + 1:04d}",
            ra_deg=ra,
            dec_deg=dec,
            dist_kpc=round(dist, 6),
            dist_err_kpc=round(float(rng.uniform(0.01, 0.05)) * dist, 6),
            pmra_masyr=round(vt_ra / kms_per_pm, 6),
            pmdec_masyr=round(vt_dec / kms_per_pm, 6),
            rv_kms=round(float(np.clip(rng.normal(0.0, 150.0), -500.0, 500.0)), 6),
            mv_abs=round(float(np.clip(rng.normal(-10.0, 2.0), -14.9, -0.1)), 6),
            feh_dex=round(float(np.clip(rng.normal(-1.5, 0.6), -3.4, 0.4)), 6),
        )
        rec.check()
        records.append(rec)
    return Catalog(epoch_jyear=epoch_jyear, records=tuple(records),
                   provenance=f"synthetic seed={seed} n={n}")


def load_reference_snapshot() -> Catalog:
    """The bundled frozen 164-cluster kinematic snapshot."""
    ref = resources.files("gstamp").joinpath("data").joinpath(_REFERENCE_FILE)
    return parse_catalog(ref.read_text("utf-8"))


def with_records(cat: Catalog, records) -> Catalog:
    """Catalog with the same metadata but different records."""
    return replace(cat, records=tuple(records))
