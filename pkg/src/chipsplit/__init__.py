"""chipsplit: magnetic microtraps and beam splitters from current-carrying chip wires.

Computes guiding potentials of wire circuits plus bias fields, traces and
classifies potential minima through the splitter bifurcation, transports
thermal ensembles by classical Monte Carlo, and solves transverse quantum
modes to test splitter symmetry.
"""

__version__ = "0.1.0"

from .geometry import (  # noqa: F401
    Circuit,
    WireSegment,
    YSplitterParams,
    build_counter_wire_guide,
    build_parallel_then_split,
    build_side_guide,
    build_y_splitter,
    validate_circuit,
    vec3,
)
from .field import (  # noqa: F401
    FieldSample,
    FieldSingularityError,
    field_jacobian,
    segment_field,
    total_field,
)
from .potential import (  # noqa: F401
    LI7,
    AtomSpecies,
    DegenerateTrapError,
    MinimaTrace,
    MinimumPoint,
    ParameterError,
    TwoWireCase,
    TwoWireKind,
    barrier_height,
    classify_two_wire,
    find_transverse_minima,
    harmonic_frequencies,
    side_guide_height,
    split_separation,
    trace_minima,
)
from .dynamics import (  # noqa: F401
    EnsembleSpec,
    Fate,
    SetupError,
    SplitStats,
    TrajectoryOutcome,
    TransportRegion,
    back_reflection_estimate,
    min_field_diagnostic,
    propagate,
    propagate_ensemble,
    run_split_experiment,
    sample_ensemble,
)
from .modes import (  # noqa: F401
    ModeSet,
    SliceGrid,
    SolverError,
    SymmetryReport,
    build_slice,
    solve_modes,
    symmetry_check,
)
