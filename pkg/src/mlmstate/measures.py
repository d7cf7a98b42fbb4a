"""Discrete target measures and the extended (capped-strip) transport problem."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .costs import SeparableCost
from .errors import InputError, InternalError

__all__ = [
    "DiscreteMeasure",
    "ExtendedProblem",
    "load_measure",
    "dump_measure",
    "compute_p_cap",
    "extend",
]

MASS_SUM_TOL = 1e-6       # loader renormalises within this band, rejects beyond
P_CAP_GRID = 4096         # certification grid for the cap height
P_CAP_MARGIN = 0.05       # safety inflation on the certified cap


@dataclass(frozen=True)
class DiscreteMeasure:
    """Unit-mass atomic measure on (z, theta) space.

    Points must be pairwise distinct and strictly inside the positive
    quadrant; masses must be positive and sum to 1 to within 1e-12.
    """

    points: np.ndarray  # (n, 2) float, columns (z, theta)
    masses: np.ndarray  # (n,) float

    def __post_init__(self) -> None:
        points = np.atleast_2d(np.asarray(self.points, dtype=float))
        masses = np.atleast_1d(np.asarray(self.masses, dtype=float))
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] == 0:
            raise InputError(f"points must be a nonempty (n, 2) array, got shape {points.shape}")
        if masses.shape != (points.shape[0],):
            raise InputError("masses must have one entry per point")
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(masses)):
            raise InputError("points and masses must be finite")
        if np.any(points <= 0.0):
            raise InputError("nonpositive coordinate: atoms must lie strictly inside (0, inf)^2")
        if np.any(masses <= 0.0):
            raise InputError("nonpositive mass")
        if len({(z, t) for z, t in points.tolist()}) != points.shape[0]:
            raise InputError("duplicate points in measure")
        if abs(float(masses.sum()) - 1.0) > 1e-12:
            raise InputError(f"masses must sum to 1 within 1e-12, got {masses.sum()!r}")

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def z(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def theta(self) -> np.ndarray:
        return self.points[:, 1]

    def bounding_box(self, pad_frac: float = 0.05):
        """Axis-aligned box around the atoms, padded but kept in (0, inf)^2."""
        z_lo, z_hi = float(self.z.min()), float(self.z.max())
        t_lo, t_hi = float(self.theta.min()), float(self.theta.max())
        pad_z = pad_frac * max(z_hi - z_lo, 0.05 * z_hi)
        pad_t = pad_frac * max(t_hi - t_lo, 0.05 * t_hi)
        return (
            (max(z_lo - pad_z, 0.5 * z_lo), z_hi + pad_z),
            (max(t_lo - pad_t, 0.5 * t_lo), t_hi + pad_t),
        )


def _finish(points: list, masses: list) -> DiscreteMeasure:
    masses_arr = np.asarray(masses, dtype=float)
    if np.any(masses_arr <= 0.0):
        raise InputError("nonpositive mass")
    total = float(masses_arr.sum())
    if abs(total - 1.0) > MASS_SUM_TOL:
        raise InputError(f"mass sum {total!r} differs from 1 by more than {MASS_SUM_TOL}")
    return DiscreteMeasure(np.asarray(points, dtype=float), masses_arr / total)


def load_measure(source, fmt: str | None = None) -> DiscreteMeasure:
    """Load a measure from CSV (header ``z,theta,mass``) or JSON.

    ``source`` may be a path, a string of content, or a readable file
    object.  Masses are renormalised to sum exactly to 1 when the raw sum is
    within 1e-6 of 1; a larger discrepancy is rejected.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
        name = getattr(source, "name", "")
    else:
        path = Path(source)
        if not path.exists():
            raise InputError(f"measure file not found: {path}")
        text = path.read_text(encoding="utf-8")
        name = str(path)
    if fmt is None:
        fmt = "json" if name.endswith(".json") or text.lstrip().startswith("{") else "csv"

    if fmt == "json":
        try:
            payload = json.loads(text)
            points = payload["points"]
            masses = payload["masses"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise InputError(f"cannot parse JSON measure: {exc}") from exc
        return _finish(points, masses)

    if fmt != "csv":
        raise InputError(f"unknown measure format {fmt!r}")
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise InputError("empty CSV measure")
    header = [name.strip() for name in reader.fieldnames]
    missing = {"z", "theta", "mass"} - set(header)
    if missing:
        raise InputError(f"CSV measure missing columns: {sorted(missing)}")
    points, masses = [], []
    for lineno, row in enumerate(reader, start=2):
        try:
            points.append((float(row["z"]), float(row["theta"])))
            masses.append(float(row["mass"]))
        except (TypeError, ValueError) as exc:
            raise InputError(f"cannot parse CSV measure at line {lineno}: {exc}") from exc
    if not points:
        raise InputError("CSV measure has no data rows")
    return _finish(points, masses)


def dump_measure(nu: DiscreteMeasure, path, fmt: str | None = None) -> None:
    """Write a measure back out; inverse of :func:`load_measure`."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix == ".json" else "csv"
    if fmt == "json":
        # json emits shortest-roundtrip floats, so load(dump(nu)) == nu exactly
        payload = {"points": nu.points.tolist(), "masses": nu.masses.tolist()}
        path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        return
    lines = ["z,theta,mass"]
    for (z, t), m in zip(nu.points.tolist(), nu.masses.tolist()):
        lines.append(f"{z!r},{t!r},{m!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def compute_p_cap(
    cost: SeparableCost,
    nu: DiscreteMeasure,
    n_grid: int = P_CAP_GRID,
    margin: float = P_CAP_MARGIN,
) -> float:
    """Certified cap height bounding every candidate surface.

    On a uniform s-grid crossed with the atoms, let ``M`` be the largest
    column cost at height ``r = 1/|B|``.  Every admissible surface stays
    below the level set of ``M``, so the cap is the largest height at which
    any column reaches ``M``, inflated by ``margin`` to cover grid error.
    """
    if not cost.contains_y(nu.z, nu.theta):
        raise InputError("measure atoms fall outside the cost's target box")
    s = np.linspace(cost.b_lo, cost.b_hi, n_grid)
    r = 1.0 / cost.b_length
    z = nu.z[:, None]
    theta = nu.theta[:, None]
    level = float(np.max(cost.cost(s[None, :], r, z, theta)))
    p0 = float(np.max(cost.q_inverse(s[None, :], z, theta, level)))
    return (1.0 + margin) * p0


@dataclass(frozen=True)
class ExtendedProblem:
    """Capped strip B x [0, P] transported to the atoms plus a reservoir.

    The reservoir is a symbolic zero-cost target absorbing the vacuum above
    the free surface; its index is ``n`` (one past the atoms).  Mass balance
    fixes its weight to ``P*|B| - 1``.
    """

    cost: SeparableCost
    nu: DiscreteMeasure
    p_cap: float
    reservoir_mass: float = field(init=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.p_cap) or self.p_cap <= 0.0:
            raise InputError(f"cap height must be finite and > 0, got {self.p_cap!r}")
        reservoir = self.p_cap * self.cost.b_length - 1.0
        if reservoir <= 0.0:
            raise InternalError(
                f"cap too small: P*|B| - 1 = {reservoir!r} <= 0 leaves no reservoir mass"
            )
        object.__setattr__(self, "reservoir_mass", reservoir)

    @property
    def n(self) -> int:
        return self.nu.n

    @property
    def reservoir_index(self) -> int:
        return self.nu.n

    @property
    def extended_masses(self) -> np.ndarray:
        """Target masses of the n atoms followed by the reservoir."""
        return np.concatenate([self.nu.masses, [self.reservoir_mass]])

    @property
    def total_mass(self) -> float:
        """Area of the capped strip, which the extended targets must match."""
        return self.p_cap * self.cost.b_length


def extend(cost: SeparableCost, nu: DiscreteMeasure, p_cap: float) -> ExtendedProblem:
    """Assemble the extended problem for a cap from :func:`compute_p_cap`."""
    if not cost.contains_y(nu.z, nu.theta):
        raise InputError("measure atoms fall outside the cost's target box")
    return ExtendedProblem(cost=cost, nu=nu, p_cap=float(p_cap))
