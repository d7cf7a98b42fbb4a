"""Vertically separable transport costs on the hemisphere strip.

Every cost in this family has the form

    c((s, p), y) = g(s, y) + w(y) * h(p),

where ``s`` is sine-of-latitude, ``p`` is pressure deviation (>= 0), and
``y = (z, theta)`` lives in a compact box strictly inside the positive
quadrant.  The vertical profile ``h`` is strictly increasing and unbounded
with a closed-form inverse and antiderivative, which gives exact per-column
geometry downstream: level sets in a column are intervals in ``h(p)``.

Two concrete costs are provided: the zonal-flow energy density (``mlm``)
and a planar shallow-water-like quadratic cost (``sg2d``) used as an
analytically tractable test case.  ``CustomCost`` admits any user-supplied
separable triple.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError

__all__ = [
    "CostConstants",
    "SeparableCost",
    "MlmCost",
    "Sg2dCost",
    "CustomCost",
    "twist_margin",
    "mlm_twist_bound",
    "mlm_lipschitz_bound",
]


@dataclass(frozen=True)
class CostConstants:
    """Physical constants of the zonal-flow energy cost.

    Defaults are standard Earth values; only the exponent ``kappa`` is
    intrinsic to the formulation (2/7 for a diatomic ideal gas).
    """

    a: float = 6.371e6        # planetary radius [m]
    omega: float = 7.2921e-5  # rotation rate [1/s]
    cp: float = 1004.6        # specific heat at constant pressure [J/(kg K)]
    p_min: float = 100.0      # minimum-pressure offset [Pa], must stay > 0
    p_r: float = 1.0e5        # reference pressure [Pa]
    kappa: float = 2.0 / 7.0  # dimensionless exponent

    def __post_init__(self) -> None:
        for name in ("a", "omega", "cp", "p_min", "p_r", "kappa"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0.0:
                raise InputError(f"cost constant {name!r} must be finite and > 0, got {value!r}")
        if not 0.0 < self.kappa < 1.0:
            raise InputError(f"kappa must lie in (0, 1), got {self.kappa!r}")


def _validate_box(box) -> tuple[float, float, float, float]:
    try:
        (z_lo, z_hi), (th_lo, th_hi) = box
    except (TypeError, ValueError) as exc:
        raise InputError(f"target box must be ((z_lo, z_hi), (th_lo, th_hi)), got {box!r}") from exc
    z_lo, z_hi, th_lo, th_hi = map(float, (z_lo, z_hi, th_lo, th_hi))
    if not (0.0 < z_lo <= z_hi and 0.0 < th_lo <= th_hi):
        raise InputError(
            "target box must be a rectangle strictly inside the positive quadrant, "
            f"got z in [{z_lo}, {z_hi}], theta in [{th_lo}, {th_hi}]"
        )
    return z_lo, z_hi, th_lo, th_hi


class SeparableCost:
    """Base class; subclasses supply the separable pieces g, w, h.

    The defining invariants (w > 0 on the target box, h strictly increasing
    and unbounded on [0, inf), c >= 0) are guaranteed by construction in the
    built-in subclasses and checked cheaply for custom ones.
    """

    kind = "custom"

    def __init__(self, domain_b, target_box) -> None:
        lo, hi = map(float, domain_b)
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InputError(f"domain interval must satisfy lo < hi, got [{lo}, {hi}]")
        self.b_lo = lo
        self.b_hi = hi
        self.z_lo, self.z_hi, self.theta_lo, self.theta_hi = _validate_box(target_box)

    # -- separable pieces (vectorised, no domain checks) ---------------------

    def g(self, s, z, theta):
        raise NotImplementedError

    def dg_ds(self, s, z, theta):
        raise NotImplementedError

    def w(self, z, theta):
        raise NotImplementedError

    def h(self, p):
        raise NotImplementedError

    def h_inv(self, t):
        raise NotImplementedError

    def h_antiderivative(self, p):
        """Antiderivative of h with value 0 at p = 0; used via differences."""
        raise NotImplementedError

    def dh_dp(self, p):
        raise NotImplementedError

    # -- domain helpers -------------------------------------------------------

    @property
    def b_length(self) -> float:
        return self.b_hi - self.b_lo

    def contains_s(self, s) -> bool:
        s = np.asarray(s, dtype=float)
        return bool(np.all((s >= self.b_lo) & (s <= self.b_hi)))

    def contains_y(self, z, theta) -> bool:
        z = np.asarray(z, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return bool(
            np.all((z >= self.z_lo) & (z <= self.z_hi))
            and np.all((theta >= self.theta_lo) & (theta <= self.theta_hi))
        )

    def _check_point(self, s, p, z, theta) -> None:
        if not self.contains_s(s):
            raise DomainError(f"s outside domain [{self.b_lo}, {self.b_hi}]")
        if not np.all(np.asarray(p, dtype=float) >= 0.0):
            raise DomainError("pressure deviation p must be >= 0")
        if not self.contains_y(z, theta):
            raise DomainError("target point outside the target box")

    # -- public operations ----------------------------------------------------

    def cost(self, s, p, z, theta):
        """Evaluate c((s,p),y) = g(s,y) + w(y) h(p); inputs must be admissible."""
        self._check_point(s, p, z, theta)
        s, p = np.asarray(s, dtype=float), np.asarray(p, dtype=float)
        z, theta = np.asarray(z, dtype=float), np.asarray(theta, dtype=float)
        return self.g(s, z, theta) + self.w(z, theta) * self.h(p)

    def grad_x(self, s, p, z, theta):
        """Gradient of the cost in (s, p); the p-component is strictly positive."""
        if not np.all(np.asarray(p, dtype=float) >= 0.0):
            raise DomainError("pressure deviation p must be >= 0")
        if not self.contains_y(z, theta):
            raise DomainError("target point outside the target box")
        s, p = np.asarray(s, dtype=float), np.asarray(p, dtype=float)
        z, theta = np.asarray(z, dtype=float), np.asarray(theta, dtype=float)
        return self.dg_ds(s, z, theta), self.w(z, theta) * self.dh_dp(p)

    def q_inverse(self, s, z, theta, sigma):
        """Height at which the column cost reaches level ``sigma``, floored at 0.

        Returns ``c((s, .), y)^{-1}(sigma)`` where the level is attainable
        (sigma >= c((s,0),y)) and 0 otherwise, via the closed-form h-inverse.
        The level difference ``sigma - g`` is formed before dividing by ``w``
        to limit cancellation.
        """
        if not self.contains_s(s):
            raise DomainError(f"s outside domain [{self.b_lo}, {self.b_hi}]")
        if not self.contains_y(z, theta):
            raise DomainError("target point outside the target box")
        s = np.asarray(s, dtype=float)
        z, theta = np.asarray(z, dtype=float), np.asarray(theta, dtype=float)
        sigma = np.asarray(sigma, dtype=float)
        t = (sigma - self.g(s, z, theta)) / self.w(z, theta)
        h0 = self.h(np.asarray(0.0))
        p = self.h_inv(np.maximum(t, h0))
        return np.maximum(p, 0.0)


class MlmCost(SeparableCost):
    """Zonal-flow energy density in (sine-latitude, pressure-deviation) coordinates."""

    kind = "mlm"

    def __init__(self, domain_b, target_box, constants: CostConstants | None = None) -> None:
        super().__init__(domain_b, target_box)
        if not (0.0 < self.b_lo < self.b_hi < 1.0):
            raise InputError(
                f"zonal-flow cost needs 0 < lo < hi < 1 in sine-of-latitude, got [{self.b_lo}, {self.b_hi}]"
            )
        self.constants = constants if constants is not None else CostConstants()

    def g(self, s, z, theta):
        k = self.constants
        root = k.a * np.sqrt(1.0 - s * s)
        return 0.5 * (z / root - k.omega * root) ** 2

    def dg_ds(self, s, z, theta):
        k = self.constants
        one_m = 1.0 - s * s
        return z * z * s / (k.a * k.a * one_m * one_m) - k.omega**2 * k.a**2 * s

    def w(self, z, theta):
        return self.constants.cp * theta

    def h(self, p):
        k = self.constants
        return ((p + k.p_min) / k.p_r) ** k.kappa

    def h_inv(self, t):
        k = self.constants
        return k.p_r * t ** (1.0 / k.kappa) - k.p_min

    def h_antiderivative(self, p):
        k = self.constants
        e = k.kappa + 1.0
        scale = k.p_r / e
        return scale * (((p + k.p_min) / k.p_r) ** e - (k.p_min / k.p_r) ** e)

    def dh_dp(self, p):
        k = self.constants
        return (k.kappa / k.p_r) * ((p + k.p_min) / k.p_r) ** (k.kappa - 1.0)

    def grad_x(self, s, p, z, theta):
        s_arr = np.asarray(s, dtype=float)
        if not np.all(np.abs(s_arr) < 1.0):
            raise DomainError("gradient undefined at the removed singularity s = +/-1")
        return super().grad_x(s, p, z, theta)


class Sg2dCost(SeparableCost):
    """Planar quadratic-plus-linear test cost: c = (s - z)^2 / 2 + theta * p."""

    kind = "sg2d"

    def g(self, s, z, theta):
        d = s - z
        return 0.5 * d * d

    def dg_ds(self, s, z, theta):
        return s - z

    def w(self, z, theta):
        return theta * np.ones_like(np.asarray(z, dtype=float))

    def h(self, p):
        return np.asarray(p, dtype=float)

    def h_inv(self, t):
        return np.asarray(t, dtype=float)

    def h_antiderivative(self, p):
        return 0.5 * p * p

    def dh_dp(self, p):
        return np.ones_like(np.asarray(p, dtype=float))


class CustomCost(SeparableCost):
    """Separable cost assembled from user-supplied callables.

    All callables must accept/return numpy arrays under broadcasting, ``h``
    must be strictly increasing and unbounded with exact inverse ``h_inv``
    and antiderivative ``h_prim`` (zero at 0), and ``w`` must be positive on
    the target box.
    """

    kind = "custom"

    def __init__(self, domain_b, target_box, *, g, dg_ds, w, h, h_inv, h_prim, dh_dp) -> None:
        super().__init__(domain_b, target_box)
        self._g, self._dg_ds, self._w = g, dg_ds, w
        self._h, self._h_inv, self._h_prim, self._dh_dp = h, h_inv, h_prim, dh_dp
        corners = [(self.z_lo, self.theta_lo), (self.z_hi, self.theta_hi)]
        if any(np.any(np.asarray(w(np.float64(z), np.float64(t))) <= 0.0) for z, t in corners):
            raise InputError("custom cost rejected: w(y) must be > 0 on the target box")

    def g(self, s, z, theta):
        return self._g(s, z, theta)

    def dg_ds(self, s, z, theta):
        return self._dg_ds(s, z, theta)

    def w(self, z, theta):
        return self._w(z, theta)

    def h(self, p):
        return self._h(p)

    def h_inv(self, t):
        return self._h_inv(t)

    def h_antiderivative(self, p):
        return self._h_prim(p)

    def dh_dp(self, p):
        return self._dh_dp(p)


def twist_margin(cost: SeparableCost, p_cap: float, shape=(64, 64, 16)) -> float:
    """Sampled minimum of ||grad_x c|| over the strip times the target box.

    ``shape = (n_s, n_p, n_y)`` controls the grid; the target box is sampled
    on a near-square lattice of about ``n_y`` points.  A nonpositive margin
    means the cost is not usably twisted on this domain and is rejected.
    """
    n_s, n_p, n_y = shape
    if min(n_s, n_p, n_y) < 2 or p_cap <= 0.0:
        raise InputError("twist margin needs at least a 2x2x2 grid and p_cap > 0")
    s = np.linspace(cost.b_lo, cost.b_hi, n_s)
    p = np.linspace(0.0, p_cap, n_p)
    rows = max(2, int(np.floor(np.sqrt(n_y))))
    cols = max(2, int(np.ceil(n_y / rows)))
    z = np.linspace(cost.z_lo, cost.z_hi, rows)
    theta = np.linspace(cost.theta_lo, cost.theta_hi, cols)

    ss = s[:, None, None, None]
    pp = p[None, :, None, None]
    zz = z[None, None, :, None]
    tt = theta[None, None, None, :]
    ds, dp = cost.grad_x(ss, pp, zz, tt)
    ds, dp = np.broadcast_arrays(ds, dp)
    margin = float(np.sqrt(ds * ds + dp * dp).min())
    if margin <= 0.0:
        raise DomainError("cost rejected as non-twisted: sampled gradient margin is nonpositive")
    return margin


def mlm_twist_bound(constants: CostConstants, theta_min: float) -> float:
    """Analytic lower bound on the twist margin of the zonal-flow cost.

    Equals kappa*Cp*theta_min/p_r * (p_min/(2 p_r))^(kappa-1) for targets
    with theta >= theta_min.
    """
    k = constants
    return k.kappa * k.cp * theta_min / k.p_r * (k.p_min / (2.0 * k.p_r)) ** (k.kappa - 1.0)


def mlm_lipschitz_bound(cost: MlmCost) -> float:
    """Uniform bound on |dc/ds| over the strip: z_max^2/(a eps1)^2 + (Omega a)^2."""
    k = cost.constants
    eps1 = 1.0 - cost.b_hi
    return cost.z_hi**2 / (k.a * eps1) ** 2 + (k.omega * k.a) ** 2
