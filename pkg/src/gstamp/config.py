"""Plain-text configuration: ``[section]`` headers and ``key = value``
lines, mirroring each module's parameters.

Unknown sections or keys are rejected; values are validated by the owning
module's invariants at load time.  ``dump`` renders the effective config
canonically; its sha256 is embedded in every output file.
"""

import hashlib
import math
from dataclasses import dataclass, field

from .dynamics import PotentialParams, check_calibration
from .errors import InvariantViolation, ParseError, UnknownKey
from .frames import FrameParams


@dataclass(frozen=True)
class IntegratorParams:
    dt_myr: float = 0.1
    scheme: str = "leapfrog"

    def __post_init__(self):
        if not (math.isfinite(self.dt_myr) and self.dt_myr > 0):
            raise InvariantViolation(f"dt_myr must be positive, got {self.dt_myr}")
        if self.scheme not in ("leapfrog", "rk4"):
            raise InvariantViolation(f"scheme must be leapfrog or rk4, got {self.scheme!r}")


@dataclass(frozen=True)
class StampParams:
    k: int = 16
    min_sep_kpc: float = 1.0
    pos_quantum_pc: int = 1
    match_tol_kpc: float = 1.0

    def __post_init__(self):
        if self.k < 4:
            raise InvariantViolation(f"stamp k must be >= 4, got {self.k}")
        if not self.min_sep_kpc > 0:
            raise InvariantViolation("min_sep_kpc must be positive")
        if not (isinstance(self.pos_quantum_pc, int) and self.pos_quantum_pc >= 1):
            raise InvariantViolation("pos_quantum_pc must be a positive integer")
        if not self.match_tol_kpc > 0:
            raise InvariantViolation("match_tol_kpc must be positive")


@dataclass(frozen=True)
class EpochParams:
    window_myr: float = 5.0
    coarse_samples: int = 64
    mode: str = "linear"
    dd_cases_kpc: tuple = (0.05, 0.1, 0.25, 0.5)
    v_min_kms: float = 50.0
    v_max_kms: float = 1000.0
    n_points: int = 96

    def __post_init__(self):
        if not self.window_myr > 0:
            raise InvariantViolation("window_myr must be positive")
        if self.coarse_samples < 3:
            raise InvariantViolation("coarse_samples must be >= 3")
        if self.mode not in ("linear", "orbit"):
            raise InvariantViolation(f"mode must be linear or orbit, got {self.mode!r}")
        if len(self.dd_cases_kpc) == 0 or any(d <= 0 for d in self.dd_cases_kpc):
            raise InvariantViolation("dd_cases_kpc must be positive")
        if self.v_min_kms <= 0 or self.v_max_kms < self.v_min_kms:
            raise InvariantViolation("velocity grid must be positive and ordered")
        if self.n_points < 2:
            raise InvariantViolation("n_points must be >= 2")


@dataclass(frozen=True)
class Config:
    frame: FrameParams = field(default_factory=FrameParams)
    potential: PotentialParams = field(default_factory=PotentialParams)
    vcirc_target_kms: float = 240.0
    integrator: IntegratorParams = field(default_factory=IntegratorParams)
    stamp: StampParams = field(default_factory=StampParams)
    epoch: EpochParams = field(default_factory=EpochParams)


# section -> key -> (parser, default extractor)
def _floats(text):
    return tuple(float(p) for p in text.split())


_SCHEMA = {
    "frame": {
        "r0_kpc": float, "zsun_kpc": float,
        "vsun_x_kms": float, "vsun_y_kms": float, "vsun_z_kms": float,
        "ngp_ra_deg": float, "ngp_dec_deg": float, "lncp_deg": float,
    },
    "potential": {
        "bulge_gm": float, "bulge_a_kpc": float,
        "disk_gm": float, "disk_a_kpc": float, "disk_b_kpc": float,
        "halo_vh_kms": float, "halo_rc_kpc": float,
        "vcirc_target_kms": float,
    },
    "integrator": {"dt_myr": float, "scheme": str},
    "stamp": {"k": int, "min_sep_kpc": float, "pos_quantum_pc": int,
              "match_tol_kpc": float},
    "epoch": {"window_myr": float, "coarse_samples": int, "mode": str,
              "dd_cases_kpc": _floats, "v_min_kms": float,
              "v_max_kms": float, "n_points": int},
}


def parse_config_text(text) -> Config:
    """Parse key = value text into a validated Config."""
    values = {section: {} for section in _SCHEMA}
    section = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise UnknownKey(section)
            continue
        if "=" not in line:
            raise ParseError(line_no, raw)
        if section is None:
            raise ParseError(line_no, raw)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA[section]:
            raise UnknownKey(f"{section}.{key}")
        try:
            values[section][key] = _SCHEMA[section][key](value)
        except ValueError:
            raise ParseError(line_no, raw) from None
    return _build(values)


def _build(values) -> Config:
    fr = dict(values["frame"])
    vsun = (fr.pop("vsun_x_kms", 11.1), fr.pop("vsun_y_kms", 250.0),
            fr.pop("vsun_z_kms", 7.3))
    frame = FrameParams(vsun_kms=vsun, **fr)
    pot_values = dict(values["potential"])
    target = pot_values.pop("vcirc_target_kms", 240.0)
    potential = PotentialParams(**pot_values)
    check_calibration(potential, frame.r0_kpc, target_kms=target)
    return Config(
        frame=frame,
        potential=potential,
        vcirc_target_kms=target,
        integrator=IntegratorParams(**values["integrator"]),
        stamp=StampParams(**values["stamp"]),
        epoch=EpochParams(**values["epoch"]),
    )


def load_config(path=None) -> Config:
    """Config from a file path; all defaults when path is None."""
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def dump(cfg: Config) -> str:
    """Canonical text rendering of the effective configuration."""
    f, p = cfg.frame, cfg.potential
    e, s, it = cfg.epoch, cfg.stamp, cfg.integrator
    lines = [
        "[frame]",
        f"r0_kpc = {f.r0_kpc!r}",
        f"zsun_kpc = {f.zsun_kpc!r}",
        f"vsun_x_kms = {f.vsun_kms[0]!r}",
        f"vsun_y_kms = {f.vsun_kms[1]!r}",
        f"vsun_z_kms = {f.vsun_kms[2]!r}",
        f"ngp_ra_deg = {f.ngp_ra_deg!r}",
        f"ngp_dec_deg = {f.ngp_dec_deg!r}",
        f"lncp_deg = {f.lncp_deg!r}",
        "[potential]",
        f"bulge_gm = {p.bulge_gm!r}",
        f"bulge_a_kpc = {p.bulge_a_kpc!r}",
        f"disk_gm = {p.disk_gm!r}",
        f"disk_a_kpc = {p.disk_a_kpc!r}",
        f"disk_b_kpc = {p.disk_b_kpc!r}",
        f"halo_vh_kms = {p.halo_vh_kms!r}",
        f"halo_rc_kpc = {p.halo_rc_kpc!r}",
        f"vcirc_target_kms = {cfg.vcirc_target_kms!r}",
        "[integrator]",
        f"dt_myr = {it.dt_myr!r}",
        f"scheme = {it.scheme}",
        "[stamp]",
        f"k = {s.k}",
        f"min_sep_kpc = {s.min_sep_kpc!r}",
        f"pos_quantum_pc = {s.pos_quantum_pc}",
        f"match_tol_kpc = {s.match_tol_kpc!r}",
        "[epoch]",
        f"window_myr = {e.window_myr!r}",
        f"coarse_samples = {e.coarse_samples}",
        f"mode = {e.mode}",
        "dd_cases_kpc = " + " ".join(repr(d) for d in e.dd_cases_kpc),
        f"v_min_kms = {e.v_min_kms!r}",
        f"v_max_kms = {e.v_max_kms!r}",
        f"n_points = {e.n_points}",
    ]
    return "\n".join(lines) + "\n"


def config_hash(cfg: Config) -> str:
    return hashlib.sha256(dump(cfg).encode("utf-8")).hexdigest()
