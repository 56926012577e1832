"""gstamp: a globular-cluster galactic positioning system.

Builds, serializes and decodes a location map of the Sun anchored to
globular clusters, integrates cluster orbits in an analytic Milky Way
potential, and recovers sender position and emission epoch from a
received stamp.
"""

__version__ = "1.0.0"

from .catalog import (  # noqa: F401
    Catalog,
    ClusterRecord,
    load_reference_snapshot,
    parse_catalog,
    serialize_catalog,
    synth_catalog,
    validate,
)
from .config import Config, load_config  # noqa: F401
from .dynamics import (  # noqa: F401
    PotentialParams,
    Trajectory,
    acceleration,
    circular_velocity,
    integrate_orbit,
    potential_value,
    velocity_distribution,
)
from .epoch import (  # noqa: F401
    EpochEstimate,
    ResolutionCurve,
    epoch_error_bound,
    propagate_catalog,
    recover_epoch,
    resolution_curves,
    time_resolution,
)
from .frames import (  # noqa: F401
    FrameParams,
    PhaseState,
    Vec3,
    equatorial_to_galactic,
    from_galactocentric,
    galactic_to_equatorial,
    to_galactocentric,
)
from .stamp import (  # noqa: F401
    AnchorSignature,
    Correspondence,
    LocationMap,
    build_location_map,
    decode_stamp,
    encode_stamp,
    locate_sender,
    match_anchors,
    select_anchors,
)
