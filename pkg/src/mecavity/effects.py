"""Magneto-electric index anisotropies of gases and vacuum.

Coefficients are normalized to B = 1 T and E = 1 V/m.  Gas values refer to
1 bar and 293 K and scale with density in the ideal-gas approximation; the
vacuum values carry no reference conditions.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

BAR = 1.0e5  # Pa
REF_TEMPERATURE = 293.0  # K
REF_WAVELENGTH = 632.8e-9  # m

ANGLE_CONVENTION = (
    "angles counterclockwise from the field direction, seen by an observer "
    "into whose eye the light is travelling"
)


class UnknownMediumError(LookupError):
    pass


class MissingRatioError(ValueError):
    pass


class InvariantViolation(ValueError):
    pass


@dataclass(frozen=True)
class CoefficientRecord:
    medium: str
    eta_melb: float
    eta_meda: float | None = None
    ref_pressure: float | None = BAR
    ref_temperature: float | None = REF_TEMPERATURE
    ref_wavelength: float | None = REF_WAVELENGTH

    def __post_init__(self):
        for name in ("eta_melb", "eta_meda"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                raise ValueError(f"{self.medium}: {name} must be finite")
        if not self.is_vacuum:
            if self.ref_pressure is None or self.ref_temperature is None:
                raise ValueError(f"{self.medium}: gas record needs reference conditions")
            if self.ref_pressure <= 0 or self.ref_temperature <= 0:
                raise ValueError(f"{self.medium}: reference conditions must be positive")

    @property
    def is_vacuum(self) -> bool:
        return self.medium.lower() == "vacuum"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Conditions:
    pressure: float = BAR  # Pa
    temperature: float = REF_TEMPERATURE  # K

    def __post_init__(self):
        if not self.pressure >= 0:
            raise ValueError("pressure must be >= 0")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")


REFERENCE_CONDITIONS = Conditions()

BUILTIN_TABLE: dict[str, CoefficientRecord] = {
    r.medium: r
    for r in (
        CoefficientRecord("vacuum", 2.7e-32, -6.7e-32, None, None, None),
        CoefficientRecord("He", 1.6e-24),
        CoefficientRecord("H", 3.4e-23),
        CoefficientRecord("Ne", 4.2e-24),
        CoefficientRecord("Ar", 3.6e-23),
        CoefficientRecord("Kr", 7.8e-23),
        CoefficientRecord("H2", 4.8e-23),
        CoefficientRecord("N2", 9.0e-23),
        CoefficientRecord("CO", 1.4e-22),
    )
}

_ALIASES = {
    "quantum vacuum": "vacuum",
    "helium": "He",
    "hydrogen": "H",
    "atomic hydrogen": "H",
    "neon": "Ne",
    "argon": "Ar",
    "krypton": "Kr",
    "molecular hydrogen": "H2",
    "nitrogen": "N2",
    "carbon monoxide": "CO",
}

COEFFICIENT_SCHEMA = {
    "type": "object",
    "required": ["medium", "eta_melb", "ref_pressure", "ref_temperature", "ref_wavelength"],
    "properties": {
        "medium": {"type": "string", "minLength": 1},
        "eta_melb": {"type": "number"},
        "eta_meda": {"type": ["number", "null"]},
        "ref_pressure": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "ref_temperature": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "ref_wavelength": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

TABLE_SCHEMA = {"type": "array", "items": COEFFICIENT_SCHEMA}


def load_table(source, base: Mapping[str, CoefficientRecord] | None = None):
    """Load coefficient records from a JSON file, string or decoded list.

    Records are merged over `base` (the built-in table by default), so a
    document may override a built-in medium or add user-defined ones.
    """
    import jsonschema

    if isinstance(source, (str, Path)) and Path(str(source)).exists():
        doc = json.loads(Path(source).read_text())
    elif isinstance(source, str):
        doc = json.loads(source)
    else:
        doc = source
    if isinstance(doc, dict):
        doc = [doc]
    jsonschema.validate(doc, TABLE_SCHEMA)
    table = dict(BUILTIN_TABLE if base is None else base)
    for entry in doc:
        rec = CoefficientRecord(**entry)
        table[rec.medium] = rec
    return table


def known_media(table: Mapping[str, CoefficientRecord] | None = None) -> list[str]:
    return list((table or BUILTIN_TABLE).keys())


def lookup_coefficient(medium, table: Mapping[str, CoefficientRecord] | None = None):
    """Return the coefficient record for `medium`.

    Names are matched case-insensitively, common English names are accepted
    and a `CoefficientRecord` passes straight through.
    """
    if isinstance(medium, CoefficientRecord):
        return medium
    table = BUILTIN_TABLE if table is None else table
    if medium in table:
        return table[medium]
    key = str(medium).strip()
    key = _ALIASES.get(key.lower(), key)
    for name, rec in table.items():
        if name.lower() == key.lower():
            return rec
    raise UnknownMediumError(
        f"unknown medium {medium!r}; known media: {', '.join(table)}"
    )


def scale_coefficient(record: CoefficientRecord, conditions: Conditions | None = None):
    """Ideal-gas density scaling of both coefficients.

    Returns ``(eta_melb, eta_meda)`` at `conditions`; ``eta_meda`` stays
    None when the record has none.  Vacuum passes through unchanged.
    """
    if conditions is None or record.is_vacuum:
        return record.eta_melb, record.eta_meda
    factor = (conditions.pressure / record.ref_pressure) * (
        record.ref_temperature / conditions.temperature
    )
    meda = None if record.eta_meda is None else record.eta_meda * factor
    return record.eta_melb * factor, meda


def delta_n_melb(medium, B, E, conditions: Conditions | None = None, table=None):
    """n_B - n_E for crossed transverse fields B (T) and E (V/m)."""
    rec = lookup_coefficient(medium, table)
    eta, _ = scale_coefficient(rec, conditions)
    return eta * B * E


def delta_n_meda(medium, B, E, conditions: Conditions | None = None,
                 meda_ratio: float | None = None, table=None):
    """n+ - n-, the positive direction being along E x B.

    Records without a tabulated MEDA coefficient (all the gases) need
    `meda_ratio`, the assumed ratio of MEDA to MELB.
    """
    rec = lookup_coefficient(medium, table)
    eta_melb, eta_meda = scale_coefficient(rec, conditions)
    if eta_meda is None:
        if meda_ratio is None:
            raise MissingRatioError(
                f"{rec.medium} has no tabulated MEDA coefficient; pass meda_ratio"
            )
        eta_meda = meda_ratio * eta_melb
    return eta_meda * B * E


@dataclass(frozen=True)
class JonesBirefringence:
    delta_n: float  # n(+45 deg) - n(-45 deg)
    eigenaxes_deg: tuple[float, float] = (45.0, -45.0)
    convention: str = ANGLE_CONVENTION


def jones_from_melb(dn_melb: float) -> JonesBirefringence:
    """Jones birefringence for parallel fields equal to the crossed-field MELB."""
    return JonesBirefringence(float(dn_melb))


# --- bilinear response on the transverse polarization plane -----------------

_ROT90 = np.array([[0.0, -1.0], [1.0, 0.0]])


def _sym(a, b):
    return 0.5 * (np.outer(a, b) + np.outer(b, a))


@dataclass(frozen=True)
class BilinearResponse:
    """Index perturbation tensor as a function of transverse B and E vectors.

    ``tensor(b, e)`` returns the symmetric 2x2 perturbation of the index
    tensor, in the (x, y) basis of the plane transverse to propagation.
    """

    tensor: Callable[[np.ndarray, np.ndarray], np.ndarray]

    def __call__(self, b, e) -> np.ndarray:
        return np.asarray(self.tensor(np.asarray(b, float), np.asarray(e, float)), float)


def melb_response(dn_melb: float, isotropic: float = 0.0,
                  parallel_axis: float = 0.0) -> BilinearResponse:
    """Rotation-covariant bilinear response with a given MELB.

    For unit crossed fields the anisotropy is n_B - n_E = `dn_melb`.
    `isotropic` adds a polarization-independent (E x B) term; `parallel_axis`
    adds the birefringence with axes along/orthogonal to parallel fields,
    which a centrosymmetric medium does not have.
    """

    def tensor(b, e):
        t = dn_melb * _sym(b, _ROT90 @ e)
        t = t + isotropic * (b[0] * e[1] - b[1] * e[0]) * np.eye(2)
        t = t + parallel_axis * (_sym(b, e) - 0.5 * float(b @ e) * np.eye(2))
        return t

    return BilinearResponse(tensor)


def _anisotropy(t, direction):
    """n along `direction` minus n along `direction` rotated by +90 deg."""
    u = np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    v = _ROT90 @ u
    return float(u @ t @ u - v @ t @ v)


def _check_bilinear(r: BilinearResponse, rng, n_samples=8, rtol=1e-9):
    for _ in range(n_samples):
        b, e = rng.normal(size=2), rng.normal(size=2)
        alpha, beta = rng.uniform(-3, 3, size=2)
        ref = r(b, e)
        got = r(alpha * b, beta * e)
        scale = max(np.abs(ref).max() * abs(alpha * beta), 1e-300)
        if np.abs(got - alpha * beta * ref).max() > rtol * scale + 1e-300:
            raise InvariantViolation("response is not bilinear in B and E")
        # additivity in each argument
        b2, e2 = rng.normal(size=2), rng.normal(size=2)
        lhs = r(b + b2, e)
        rhs = r(b, e) + r(b2, e)
        if np.abs(lhs - rhs).max() > rtol * max(np.abs(rhs).max(), np.abs(lhs).max(), 1e-300):
            raise InvariantViolation("response is not additive in B")
        lhs = r(b, e + e2)
        rhs = r(b, e) + r(b, e2)
        if np.abs(lhs - rhs).max() > rtol * max(np.abs(rhs).max(), np.abs(lhs).max(), 1e-300):
            raise InvariantViolation("response is not additive in E")


def _check_no_parallel_axis_term(r: BilinearResponse, scale: float, rng, atol=1e-12):
    for phi in np.concatenate([[0.0, np.pi / 2], rng.uniform(0, np.pi, 4)]):
        u = np.array([np.cos(phi), np.sin(phi)])
        if abs(_anisotropy(r(u, u), u)) > atol * max(scale, 1e-300):
            raise InvariantViolation(
                "parallel fields induce birefringence with axes along/orthogonal to the fields"
            )


@dataclass(frozen=True)
class EquivalenceReport:
    delta_n_melb: float
    delta_n_jones: float
    field_angle: float  # rad, direction of the parallel fields
    eigenaxes: tuple[float, float] | None  # rad, relative to the fields
    tensor: np.ndarray
    passed: bool


def verify_equivalence_construction(r: BilinearResponse, B: float = 1.0, E: float = 1.0,
                                    seed: int = 0, rtol: float = 1e-12,
                                    angle_tol: float = 1e-9) -> EquivalenceReport:
    """Run the rotate / invert / superpose / renormalize construction on `r`.

    Starting from crossed fields (E along x, B along y) the fields are rotated
    by pi/2, B is inverted, the result is superposed with the original and the
    fields renormalized.  The superposed fields are parallel; the returned
    report carries the eigenaxes of the final tensor relative to them and
    n(+45) - n(-45), which must equal the starting n_B - n_E.
    """
    rng = np.random.default_rng(seed)
    _check_bilinear(r, rng)

    ex, ey = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    b_a, e_a = B * ey, E * ex
    t_a = r(b_a, e_a)
    scale = max(np.abs(t_a).max(), np.abs(r(ex, ex)).max(), np.abs(r(ey, ey)).max())
    _check_no_parallel_axis_term(r, scale if scale > 0 else 1.0, rng)
    dn_melb = _anisotropy(t_a, b_a)  # n_B - n_E

    # (b) rotate both fields by pi/2: n_v and n_h swap
    b_b, e_b = _ROT90 @ b_a, _ROT90 @ e_a
    t_b = r(b_b, e_b)
    if np.abs(t_b - _ROT90 @ t_a @ _ROT90.T).max() > 1e-12 * max(scale, 1e-300):
        raise InvariantViolation("response is not covariant under rotation of the fields")
    # (c) invert B
    b_c, e_c = -b_b, e_b
    t_c = r(b_c, e_c)
    # (d) superpose (a) and (c); the fields become parallel
    b_d, e_d = b_a + b_c, e_a + e_c
    t_d = t_a + t_c
    direct = r(b_d, e_d)
    if np.abs(direct - t_d).max() > 1e-12 * max(scale, 1e-300):
        raise InvariantViolation("superposition of (a) and (c) does not hold")
    # (e) renormalize to field magnitudes B and E
    t_e = t_d * (B * E) / (np.linalg.norm(b_d) * np.linalg.norm(e_d))
    field_angle = math.atan2(b_d[1], b_d[0])

    plus = np.array([math.cos(field_angle + math.pi / 4), math.sin(field_angle + math.pi / 4)])
    dn_jones = _anisotropy(t_e, plus)

    aniso = t_e - 0.5 * np.trace(t_e) * np.eye(2)
    if np.abs(aniso).max() == 0.0:
        axes = None
        passed = dn_melb == 0.0 and dn_jones == 0.0
    else:
        w, v = np.linalg.eigh(t_e)
        rel = []
        for k in (1, 0):  # larger eigenvalue first
            ang = math.atan2(v[1, k], v[0, k]) - field_angle
            ang = (ang + math.pi / 2) % math.pi - math.pi / 2
            rel.append(ang)
        axes = (rel[0], rel[1])
        at_45 = all(abs(abs(a) - math.pi / 4) <= angle_tol for a in axes)
        same = abs(dn_jones - dn_melb) <= rtol * abs(dn_melb)
        passed = at_45 and same
    return EquivalenceReport(dn_melb, dn_jones, field_angle, axes, t_e, passed)
