"""Shaft elasticity, cannula boundary condition, and the tip-to-signal map.

Geometry, proximal to distal along the insertion axis: the robot-side clamp
``b`` (origin of the beam coordinate ``xi``), the sensor clamp ``c`` at
``xi = l_c`` where the internal wrench is sensed, the cannula inner-tube tip
``s`` at ``xi = l_s = l_os - q3`` where a leaf-spring suspension presses the
tube against the shaft, and the instrument tip ``t`` at ``xi = l`` where the
external wrench acts.

Three matrices compose the forward model:

* ``H_w`` turns the internal wrench at ``c`` into the relative motion of the
  sensor clamp pair (separation ``H``), with the wrench referenced one clamp
  separation below the lower clamp.
* ``H_c`` transports the tip wrench to ``c`` while accounting for the elastic
  reaction of the spring-loaded tube at ``s`` (statically indeterminate
  cantilever with an elastic point support).
* ``H_G`` (optics module) projects the clamp motion onto the six slit axes.

The stacked contrast vector is ``n = (2 / c_margin) * H_G @ H_w @ H_c @ w_t``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import (
    BoundaryViolationError,
    ConfigError,
    SaturationError,
    ValidityError,
)
from .optics import HexGeometry, OpticalUnitParams, build_hg

FRAME_TIP = "tip"
FRAME_CLAMP = "clamp"


@dataclass(frozen=True)
class ShaftProperties:
    """Tubular shaft section and sensor segment geometry."""

    young_modulus: float     # E (Pa)
    shear_modulus: float     # G (Pa)
    area: float              # cross-section area (m^2)
    i_xx: float              # second moment about x (m^4)
    i_yy: float              # second moment about y (m^4)
    j_zz: float              # torsion constant (m^4)
    clamp_separation: float  # H, distance between the sensor clamps (m)
    length: float            # l, tip to proximal clamp (m)

    def __post_init__(self):
        for name in (
            "young_modulus",
            "shear_modulus",
            "area",
            "i_xx",
            "i_yy",
            "j_zz",
            "clamp_separation",
            "length",
        ):
            if not (getattr(self, name) > 0.0):
                raise ConfigError("must be positive", f"shaft.{name}")
        if not (self.clamp_separation < self.length):
            raise ConfigError(
                "clamp separation must be smaller than the shaft length",
                "shaft.clamp_separation_m",
            )


@dataclass(frozen=True)
class CannulaConfig:
    """Inner-tube suspension: three leaf-spring arms cut into a disc.

    Each arm is a cantilevered strip of length ``arm_length`` whose section is
    the disc thickness ``sheet_thickness`` by the strip width
    ``arm_width - slot_width``. The arms sit on a circle of radius
    ``arm_circle_radius`` at the tube top; their combined stiffness, levered
    over the tube length, acts at the tube tip in any radial direction.
    """

    tube_length: float        # l_t (m)
    arm_circle_radius: float  # r (m)
    gap: float                # radial clearance inner to outer tube (m)
    spring_modulus: float     # E_s (Pa)
    sheet_thickness: float    # t_s (m)
    arm_width: float          # d_o (m)
    slot_width: float         # d_i (m)
    arm_length: float         # l_e (m)

    def __post_init__(self):
        for name in (
            "tube_length",
            "arm_circle_radius",
            "gap",
            "spring_modulus",
            "sheet_thickness",
            "arm_width",
            "arm_length",
        ):
            if not (getattr(self, name) > 0.0):
                raise ConfigError("must be positive", f"cannula.{name}")
        if self.slot_width < 0.0 or self.slot_width > self.arm_width:
            raise ConfigError(
                "slot width must lie in [0, arm width]", "cannula.slot_width_m"
            )


@dataclass(frozen=True)
class KinematicDefaults:
    """Insertion-axis constants of the instrument mount."""

    l_os: float          # support offset: l_s = l_os - q3 (m)
    l_c: float = 0.035   # sensor clamp position below b (m)
    q3_min: float = 0.0  # insertion stroke lower bound (m)
    q3_max: float = 0.3  # insertion stroke upper bound (m)

    def __post_init__(self):
        if not (self.l_os > 0.0):
            raise ConfigError("must be positive", "kinematics.l_os_m")
        if not (self.l_c > 0.0):
            raise ConfigError("must be positive", "kinematics.l_c_m")
        if not (self.q3_min < self.q3_max):
            raise ConfigError(
                "q3_min must be below q3_max", "kinematics.q3_min_m"
            )


@dataclass(frozen=True)
class KinematicState:
    """Joint values and grip effort of one sample."""

    q3: float          # insertion depth (m)
    q4: float = 0.0    # shaft roll (rad)
    q5: float = 0.0    # wrist pitch (rad)
    q6: float = 0.0    # wrist yaw (rad)
    q7: float = 0.0    # gripper opening (rad)
    m_g: float = 0.0   # grip effort (N*m)
    l_os: float = 0.4  # support offset constant (m)
    l_c: float = 0.035

    @property
    def l_s(self) -> float:
        """Support position below the proximal clamp (m)."""
        return self.l_os - self.q3


@dataclass(frozen=True, eq=False)
class Wrench:
    """Force/moment pair with an explicit reference frame tag."""

    f: np.ndarray  # (3,) N
    m: np.ndarray  # (3,) N*m
    frame: str = FRAME_TIP

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float).reshape(3)
        m = np.asarray(self.m, dtype=float).reshape(3)
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(m))):
            raise ConfigError("wrench components must be finite")
        if self.frame not in (FRAME_TIP, FRAME_CLAMP):
            raise ConfigError(f"unknown wrench frame {self.frame!r}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "m", m)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.f, self.m])

    @classmethod
    def from_vector(cls, vec, frame: str = FRAME_TIP) -> "Wrench":
        vec = np.asarray(vec, dtype=float).reshape(6)
        return cls(f=vec[:3], m=vec[3:], frame=frame)


def build_hw(shaft: ShaftProperties) -> np.ndarray:
    """Compliance of the sensor segment: internal wrench at ``c`` to clamp motion.

    Output is the relative twist ``[dx, dy, dz, rx, ry, rz]`` of the distal
    clamp seen from the proximal clamp across the separation ``H``, for a unit
    internal wrench referenced one separation below the lower clamp. Bending is
    Euler-Bernoulli, axial and torsional terms are the plain bar values.
    """
    e, g = shaft.young_modulus, shaft.shear_modulus
    h = shaft.clamp_separation
    ei_xx = e * shaft.i_xx
    ei_yy = e * shaft.i_yy
    h_w = np.zeros((6, 6))
    h_w[0, 0] = 5.0 * h**3 / (6.0 * ei_yy)
    h_w[0, 4] = h**2 / (2.0 * ei_yy)
    h_w[1, 1] = 5.0 * h**3 / (6.0 * ei_xx)
    h_w[1, 3] = -(h**2) / (2.0 * ei_xx)
    h_w[2, 2] = h / (shaft.area * e)
    h_w[3, 1] = -3.0 * h**2 / (2.0 * ei_xx)
    h_w[3, 3] = h / ei_xx
    h_w[4, 0] = 3.0 * h**2 / (2.0 * ei_yy)
    h_w[4, 4] = h / ei_yy
    h_w[5, 5] = h / (g * shaft.j_zz)
    return h_w


def leaf_spring_stiffness(cannula: CannulaConfig) -> tuple[float, float]:
    """Stiffness of one suspension arm and the equivalent tube-tip stiffness.

    Returns ``(k_l, k_s)`` in N/m: ``k_l`` is the cantilever stiffness of a
    single arm (rectangular strip, length ``l_e``), ``k_s`` the radial
    stiffness felt at the tube tip after levering the arm circle radius over
    the tube length.
    """
    i_s = (cannula.arm_width - cannula.slot_width) * cannula.sheet_thickness**3 / 12.0
    k_l = 3.0 * cannula.spring_modulus * i_s / cannula.arm_length**3
    k_s = (2.0 * cannula.arm_circle_radius / cannula.tube_length) * k_l
    return k_l, k_s


def support_gain(l_s: float, compliance: float):
    """Boundary gain ``g = l_s^2 / (compliance + 2 l_s^3)``.

    ``compliance`` is ``6 E I / k_s`` (m^3) for the relevant bending plane.
    An infinite compliance (zero support stiffness) gives zero gain; zero
    compliance (rigid support) gives the pinned-support limit ``1 / (2 l_s)``.
    Accepts scalars or arrays in ``l_s``.
    """
    l_s = np.asarray(l_s, dtype=float)
    gain = l_s**2 / (compliance + 2.0 * l_s**3)
    return float(gain) if gain.ndim == 0 else gain


def _check_support_span(l_s: float, l: float, l_c: float):
    if not (l_c < l_s < l):
        raise BoundaryViolationError(
            f"support at {l_s:.4f} m must lie strictly between the wrench "
            f"reference at {l_c:.4f} m and the tip at {l:.4f} m"
        )


def hc_from_gains(l_s, l: float, l_c: float, g_x, g_y) -> np.ndarray:
    """Tip-to-``c`` wrench transport for given boundary gains.

    ``g_x`` scales the reaction in the y-bending plane (stiffness about x),
    ``g_y`` the x-bending plane. Accepts array-valued ``l_s``/gains, in which
    case the result has shape (6, 6) + broadcast shape.
    """
    l_s = np.asarray(l_s, dtype=float)
    a = 3.0 * l - l_s
    b = l_s - l_c
    lever = l - l_c
    one = np.ones_like(l_s)
    zero = np.zeros_like(l_s)
    rows = [
        [1.0 - a * g_y, zero, zero, zero, -3.0 * g_y * one, zero],
        [zero, 1.0 - a * g_x, zero, 3.0 * g_x * one, zero, zero],
        [zero, zero, one, zero, zero, zero],
        [zero, a * b * g_x - lever, zero, 1.0 - 3.0 * b * g_x, zero, zero],
        [lever - a * b * g_y, zero, zero, zero, 1.0 - 3.0 * b * g_y, zero],
        [zero, zero, zero, zero, zero, one],
    ]
    return np.array(rows)


def hc_from_compliances(l_s: float, l: float, l_c: float, c_x: float, c_y: float) -> np.ndarray:
    """Wrench transport for given boundary compliances ``c_x``, ``c_y`` (m^3)."""
    _check_support_span(l_s, l, l_c)
    return hc_from_gains(
        l_s, l, l_c, support_gain(l_s, c_x), support_gain(l_s, c_y)
    )


def hc_apply(l_s, l: float, l_c: float, c_x: float, c_y: float, w: np.ndarray) -> np.ndarray:
    """Row-wise ``H_c(l_s) @ w`` for (n,) support positions and (n, 6) wrenches.

    Exploits the sparsity of the transport matrix; used on trajectory data
    where assembling n full matrices would be wasteful.
    """
    l_s = np.asarray(l_s, dtype=float)
    w = np.asarray(w, dtype=float)
    g_x = support_gain(l_s, c_x)
    g_y = support_gain(l_s, c_y)
    a = 3.0 * l - l_s
    b = l_s - l_c
    lever = l - l_c
    fx, fy, fz = w[:, 0], w[:, 1], w[:, 2]
    mx, my, mz = w[:, 3], w[:, 4], w[:, 5]
    out = np.empty_like(w)
    out[:, 0] = (1.0 - a * g_y) * fx - 3.0 * g_y * my
    out[:, 1] = (1.0 - a * g_x) * fy + 3.0 * g_x * mx
    out[:, 2] = fz
    out[:, 3] = (a * b * g_x - lever) * fy + (1.0 - 3.0 * b * g_x) * mx
    out[:, 4] = (lever - a * b * g_y) * fx + (1.0 - 3.0 * b * g_y) * my
    out[:, 5] = mz
    return out


def build_hc(state: KinematicState, shaft: ShaftProperties, k_s: float) -> np.ndarray:
    """Tip-to-``c`` wrench transport at the current insertion depth.

    The spring-loaded tube tip at ``l_s`` reacts proportionally to the local
    shaft deflection; the reaction re-enters the internal wrench at ``c``
    through force balance and its lever arm. Axial force and torsion pass
    through unchanged (columns 3 and 6 are unit vectors). ``k_s = 0`` is the
    free-boundary limit (identity force transfer plus the plain tip levers).

    Raises
    ------
    BoundaryViolationError
        If ``l_s`` does not lie strictly between ``l_c`` and the tip.
    """
    if k_s < 0.0:
        raise ConfigError("support stiffness must be non-negative", "k_s")
    _check_support_span(state.l_s, shaft.length, state.l_c)
    if k_s == 0.0:
        g_x = g_y = 0.0
    else:
        g_x = support_gain(state.l_s, 6.0 * shaft.young_modulus * shaft.i_xx / k_s)
        g_y = support_gain(state.l_s, 6.0 * shaft.young_modulus * shaft.i_yy / k_s)
    return hc_from_gains(state.l_s, shaft.length, state.l_c, g_x, g_y)


@dataclass(frozen=True)
class SensorModel:
    """All physical parameters of one instrument build."""

    optics: OpticalUnitParams
    hexagon: HexGeometry
    shaft: ShaftProperties
    cannula: CannulaConfig
    kinematics: KinematicDefaults

    @property
    def k_s(self) -> float:
        return leaf_spring_stiffness(self.cannula)[1]

    def state(self, q3: float, **kwargs) -> KinematicState:
        """Kinematic state at insertion ``q3`` with the model's constants."""
        return KinematicState(
            q3=q3, l_os=self.kinematics.l_os, l_c=self.kinematics.l_c, **kwargs
        )


def clamp_signal_map(model: SensorModel) -> np.ndarray:
    """Contrast per unit internal wrench at ``c``: ``(2/c) H_G H_w``."""
    scale = 2.0 / model.optics.half_margin
    return scale * build_hg(model.hexagon) @ build_hw(model.shaft)


def signal_map(model: SensorModel, state: KinematicState) -> np.ndarray:
    """Contrast per unit tip wrench at the given insertion depth."""
    return clamp_signal_map(model) @ build_hc(state, model.shaft, model.k_s)


class Validity(enum.Enum):
    """Contact regime of the shaft inside the cannula."""

    VALID = "valid"
    NO_CONTACT = "no_contact"
    DOUBLE_CONTACT = "double_contact"


def _force_profile(xi, a):
    """Cantilever deflection shape for a unit transverse load at ``xi = a``.

    Clamped at 0; returns ``v * EI`` so callers divide by the plane stiffness.
    """
    xi = np.asarray(xi, dtype=float)
    inside = xi <= a
    return np.where(
        inside,
        xi**2 * (3.0 * a - xi) / 6.0,
        a**2 * (3.0 * xi - a) / 6.0,
    )


def _plane_profiles(xi, l, l_s, ei, k_s, f_eff, m_eff):
    """Free and spring-supported deflections in one bending plane.

    ``f_eff``/``m_eff`` are the tip force and tip moment producing positive
    deflection in this plane. All load arguments broadcast against ``xi``.
    Returns ``(v0_s, v_sup, v_sup_s)``: free deflection at the support,
    supported profile at ``xi``, supported deflection at the support.
    """
    q_s = l_s**2 * (3.0 * l - l_s) / 6.0
    v0_s = (f_eff * q_s + 0.5 * m_eff * l_s**2) / ei
    flex_ss = l_s**3 / (3.0 * ei)
    reaction = -k_s * v0_s / (1.0 + k_s * flex_ss)
    v0_xi = (f_eff * _force_profile(xi, l) + 0.5 * m_eff * xi**2) / ei
    v_sup = v0_xi + reaction * _force_profile(xi, l_s) / ei
    v_sup_s = v0_s + reaction * flex_ss
    return v0_s, v_sup, v_sup_s


def _classify_arrays(
    fx, fy, mx, my, l_s, model: SensorModel, n_points: int, contact_tol: float
):
    """Vectorized contact classification; load args and l_s broadcast."""
    shaft, cannula = model.shaft, model.cannula
    l = shaft.length
    k_s = model.k_s
    ei_x = shaft.young_modulus * shaft.i_xx
    ei_y = shaft.young_modulus * shaft.i_yy

    l_s = np.atleast_1d(np.asarray(l_s, dtype=float))
    fx, fy, mx, my = np.broadcast_arrays(
        np.atleast_1d(fx), np.atleast_1d(fy), np.atleast_1d(mx), np.atleast_1d(my)
    )
    fx, fy, mx, my, l_s = np.broadcast_arrays(fx, fy, mx, my, l_s)

    # tube span: tip at l_s, pivot one tube length above; check along the
    # instrumented span only, excluding the distal end itself
    x_top = l_s - cannula.tube_length
    span_lo = np.maximum(0.0, x_top)
    frac = np.arange(n_points) / n_points
    xi = span_lo[..., None] + (l_s - span_lo)[..., None] * frac

    args = dict(l=l, l_s=l_s[..., None], k_s=k_s)
    v0x_s, vx, vx_s = _plane_profiles(
        xi, ei=ei_y, f_eff=fx[..., None], m_eff=my[..., None], **args
    )
    v0y_s, vy, vy_s = _plane_profiles(
        xi, ei=ei_x, f_eff=fy[..., None], m_eff=-mx[..., None], **args
    )
    free_mag = np.hypot(v0x_s[..., 0], v0y_s[..., 0])

    chord = (xi - x_top[..., None]) / cannula.tube_length
    rel = np.hypot(vx - vx_s * chord, vy - vy_s * chord)
    interior = np.max(rel, axis=-1)

    out = np.full(l_s.shape, Validity.VALID, dtype=object)
    out[interior > cannula.gap] = Validity.DOUBLE_CONTACT
    out[free_mag < contact_tol] = Validity.NO_CONTACT
    return out


def check_validity(
    w_t: Wrench,
    model: SensorModel,
    state: KinematicState,
    n_points: int = 50,
    contact_tol: float | None = None,
) -> Validity:
    """Classify the contact regime for a tip wrench at one insertion depth.

    The transport model assumes the shaft presses on the spring-loaded tube
    tip and nothing else. ``NO_CONTACT``: the free-shaft deflection at the
    tube tip stays below the engagement clearance ``contact_tol`` (default a
    tenth of the inner/outer tube gap, the assumed bore clearance), so the
    tube never loads the shaft. ``DOUBLE_CONTACT``: with the support engaged,
    the shaft deviates from the tube axis by more than the tube gap somewhere
    along the instrumented span short of the distal end, i.e. it also touches
    the outer tube wall. Lateral force and moment components decide the
    regime; axial force and torsion do not bend the shaft.

    Raises
    ------
    BoundaryViolationError
        If the support leaves the open interval (l_c, l).
    """
    _check_support_span(state.l_s, model.shaft.length, state.l_c)
    if contact_tol is None:
        contact_tol = 0.1 * model.cannula.gap
    vec = w_t.vector()
    out = _classify_arrays(
        vec[0], vec[1], vec[3], vec[4], state.l_s, model, n_points, contact_tol
    )
    return out.reshape(-1)[0]


def classify_rows(
    wrench: np.ndarray,
    l_s: np.ndarray,
    model: SensorModel,
    n_points: int = 50,
    contact_tol: float | None = None,
) -> np.ndarray:
    """Row-wise contact classification for (n, 6) tip wrenches."""
    if contact_tol is None:
        contact_tol = 0.1 * model.cannula.gap
    wrench = np.asarray(wrench, dtype=float)
    return _classify_arrays(
        wrench[:, 0], wrench[:, 1], wrench[:, 3], wrench[:, 4],
        np.asarray(l_s, dtype=float), model, n_points, contact_tol,
    )


def forward(
    w_t: Wrench,
    model: SensorModel,
    state: KinematicState,
    *,
    force: bool = False,
    clamp_signals: bool = False,
) -> np.ndarray:
    """Six normalized unit signals for a tip wrench.

    By default the load state is classified first: double contact always
    raises, and no-contact raises when the wrench has lateral content (a
    laterally loaded shaft that never reaches the support is outside the
    transport model; axial force, torsion, and the zero wrench pass through
    the boundary untouched). ``force=True`` skips the gate, which the
    simulator and tests use to evaluate the linear map on its own.

    Raises
    ------
    ValidityError
        Load state outside the single-contact regime (see above).
    SaturationError
        Any unit leaving its linear range, unless ``clamp_signals``.
    """
    if w_t.frame != FRAME_TIP:
        raise ConfigError(f"forward expects a tip-frame wrench, got {w_t.frame!r}")
    vec = w_t.vector()
    if not force:
        status = check_validity(w_t, model, state)
        lateral = max(abs(vec[0]), abs(vec[1]), abs(vec[3]), abs(vec[4]))
        if status is Validity.DOUBLE_CONTACT or (
            status is Validity.NO_CONTACT and lateral > 0.0
        ):
            raise ValidityError(f"load state is {status.value}", status=status)
    n = signal_map(model, state) @ vec
    worst = np.max(np.abs(n))
    if worst > 1.0:
        if not clamp_signals:
            raise SaturationError(
                f"normalized signal magnitude {worst:.3f} beyond 1", clamped=1.0
            )
        n = np.clip(n, -1.0, 1.0)
    return n
