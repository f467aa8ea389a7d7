"""Surrogate-based calibration of disc material parameters.

Thin Python layer over the C++ core in ``disc_calib._core``.
"""

from ._core import (
    CalibrationResult,
    ConstraintMode,
    Error,
    BoundsViolation,
    ParseError,
    ShapeError,
    FrozenRequired,
    EmptyDataset,
    GridMismatch,
    DegenerateVariance,
    DatasetMissing,
    GaConfig,
    InverseNet,
    InverseNetConfig,
    LoadCase,
    LoadGrid,
    LossKind,
    MaterialBounds,
    NetConfig,
    PgdConfig,
    RomTable,
    SurrogateNet,
    calibrate,
    denormalize,
    ga_calibrate,
    generate_dataset,
    inverse_calibrate,
    lhs_unit,
    load_dataset,
    mae,
    normalize,
    oracle_rom,
    oracle_table,
    project,
    r2_mean,
    r2_per_case,
    result_to_json,
    save_dataset,
    sum_exceeding,
    train_inverse,
    train_surrogate,
    uniform_unit,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
