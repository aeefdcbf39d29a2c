"""Prime periodic orbit census and pair-correlation checks for symbolic flow models."""

__version__ = "0.1.0"

from .errors import (
    DomainError,
    IngestionError,
    ModelError,
    NumericError,
    OrbitPairsError,
    OutOfRangeError,
    ResourceError,
)
from .homology_model import (
    Edge,
    HomologyClass,
    MarkovFlowModel,
    ValidationReport,
    golden_model,
    integer_part,
    load_model,
    symmetric_model,
    validate_model,
)
from .census import (
    OrbitTable,
    PrimeOrbit,
    count_orbits,
    count_orbits_in_class,
    empirical_clt,
    enumerate_prime_orbits,
    ingest_orbit_table,
    pair_count_convolution,
    pair_count_direct,
    shifted_count,
    sup_normalized_count,
    write_orbit_table,
)
from .thermo import ThermoSummary, flow_pressure, pair_constant, summarize, winding_cycle
from .asymptotics import (
    CensusReport,
    convergence_report,
    gaussian_box_mass,
    gaussian_pair_sum,
    gaussian_tail,
    local_limit_prediction,
    theorem1_prediction,
)
