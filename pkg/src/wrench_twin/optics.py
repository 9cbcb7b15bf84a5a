"""Slit/bi-cell optical transduction and sensing-unit geometry.

Each sensing unit is a light source shining through a slit onto a two-segment
photodiode. A relative displacement ``delta`` of the slit along the unit's
sensitive axis shifts the illuminated band, trading photocurrent between the
two segments:

    I1 = kappa * (1 + delta / c)
    I2 = kappa * (1 - delta / c)

with ``c = (slit_width - gap_width) / 2`` the half-margin of the linear range
(the slit must overhang the dead gap between segments on both sides). The
contrast ``n = (I1 - I2) / (I1 + I2) = delta / c`` is dimensionless, bounded by
1 in magnitude inside the linear range, and independent of the source power
``kappa``.

Six such units sit on a hexagon between the two sensor clamps, alternating
sensitive directions, so the stacked contrast vector responds to all six
relative motion components of the clamp pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateSignalError, SaturationError

_SQ3_2 = math.sqrt(3.0) / 2.0


@dataclass(frozen=True)
class OpticalUnitParams:
    """Per-unit transduction constants (identical for all six units)."""

    kappa: float       # single-segment photocurrent at centered slit (A)
    slit_width: float  # illuminated slit width (m)
    gap_width: float   # dead gap between photodiode segments (m)

    def __post_init__(self):
        if not (self.kappa > 0.0):
            raise ConfigError("kappa must be positive", "optics.kappa_A")
        if not (self.gap_width > 0.0):
            raise ConfigError("gap width must be positive", "optics.gap_width_m")
        if not (self.slit_width > self.gap_width):
            raise ConfigError(
                "slit width must exceed the segment gap", "optics.slit_width_m"
            )

    @property
    def half_margin(self) -> float:
        """Half-width ``c`` of the linear displacement range (m)."""
        return 0.5 * (self.slit_width - self.gap_width)


def photocurrents(
    delta: float, params: OpticalUnitParams, clamp: bool = False
) -> tuple[float, float]:
    """Segment photocurrents (I1, I2) for a slit displacement ``delta``.

    Parameters
    ----------
    delta : float
        Slit displacement along the sensitive axis (m).
    params : OpticalUnitParams
        Transduction constants.
    clamp : bool
        If True, displacements beyond the half-margin are clipped to the
        range edge instead of raising.

    Raises
    ------
    SaturationError
        If ``|delta|`` exceeds the half-margin and ``clamp`` is False. The
        error carries the clipped displacement.
    """
    c = params.half_margin
    if abs(delta) > c:
        clipped = math.copysign(c, delta)
        if not clamp:
            raise SaturationError(
                f"slit displacement {delta:.3e} m beyond half-margin {c:.3e} m",
                clamped=clipped,
            )
        delta = clipped
    ratio = delta / c
    return params.kappa * (1.0 + ratio), params.kappa * (1.0 - ratio)


def normalize(i1: float, i2: float) -> float:
    """Contrast ``(i1 - i2) / (i1 + i2)`` of a segment pair.

    Raises
    ------
    DegenerateSignalError
        If the photocurrent sum is not positive (dark or inverted segments).
    """
    total = i1 + i2
    if not (total > 0.0):
        raise DegenerateSignalError(
            f"photocurrent sum {total:.3e} A is not positive"
        )
    return (i1 - i2) / total


@dataclass(frozen=True)
class HexGeometry:
    """Placement of the six sensing units between the clamps.

    Units sit at azimuths 0, 60, ..., 300 degrees on a circle of radius
    ``r_s`` and alternate slit orientation around the hexagon. ``d_z`` is the
    axial lever arm between the slit plane and the clamp rotation center, so
    clamp tilts translate the slit picture. ``orientations`` is a cosmetic
    6-tuple of 'H'/'V' labels recorded with the geometry; the response
    pattern itself is fixed by the row structure of the geometry matrix.
    """

    d_z: float  # axial offset slit plane to clamp rotation center (m)
    r_s: float  # hexagon circumradius (m)
    orientations: tuple[str, ...] = ("H", "V", "H", "V", "H", "V")

    def __post_init__(self):
        if not (self.d_z > 0.0):
            raise ConfigError("d_z must be positive", "hexagon.d_z_m")
        if not (self.r_s > 0.0):
            raise ConfigError("r_s must be positive", "hexagon.r_s_m")
        if len(self.orientations) != 6 or any(
            o not in ("H", "V") for o in self.orientations
        ):
            raise ConfigError(
                "orientations must be six 'H'/'V' labels", "hexagon.orientations"
            )


def build_hg(geom: HexGeometry) -> np.ndarray:
    """Geometry matrix mapping clamp-frame relative motion to slit displacements.

    The input is the relative motion twist of the distal clamp with respect to
    the proximal one, ``[dx, dy, dz, rx, ry, rz]`` (m, rad); the output is the
    six slit displacements along each unit's sensitive axis (m). Rows
    alternate between lateral/torsion-sensitive units (azimuths 0, 120, 240
    degrees) and axial/tilt-sensitive units (azimuths 60, 180, 300 degrees).
    Every entry is a signed projection of the twist onto the sensitive axis,
    with ``d_z`` levering the tilts and ``r_s`` levering the torsion.
    """
    d, r = geom.d_z, geom.r_s
    return np.array(
        [
            [0.0, 1.0, 0.0, d, 0.0, r],
            [0.0, 0.0, 1.0, _SQ3_2 * r, -0.5 * r, 0.0],
            [-_SQ3_2, -0.5, 0.0, -0.5 * d, _SQ3_2 * d, r],
            [0.0, 0.0, 1.0, 0.0, r, 0.0],
            [_SQ3_2, -0.5, 0.0, -0.5 * d, -_SQ3_2 * d, r],
            [0.0, 0.0, 1.0, -_SQ3_2 * r, -0.5 * r, 0.0],
        ]
    )
