"""Digital twin and calibration toolkit for a proximal-shaft optical force/torque sensor.

The package models a 6-unit slit/bi-cell optical transducer mounted between two
clamps on the proximal shaft of a minimally invasive instrument, the elastic
boundary condition imposed by a leaf-spring-suspended cannula inner tube, a
trajectory-level measurement simulator with actuation disturbances, and two
calibration routes (structured least squares and a small neural network) with
shared evaluation metrics and scenario studies.
"""

__version__ = "0.1.0"

SCHEMA = "wrench-twin/v1"

from .errors import (  # noqa: E402,F401
    BoundaryViolationError,
    ConditioningError,
    ConfigError,
    ConstantReferenceError,
    DegenerateSignalError,
    EmptyResidualError,
    IdentificationError,
    PartitionError,
    SaturationError,
    SchemaError,
    TrainingError,
    UnboundedNominalError,
    ValidityError,
    WrenchTwinError,
)
