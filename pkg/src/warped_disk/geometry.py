"""Rotationally symmetric metric profiles.

A metric ``dr^2 + phi(r)^2 dtheta^2`` on the plane is determined by its
warp function ``phi``. This module constructs profiles either from
closed-form warp functions (flat plane, hyperbolic plane) or by
integrating the curvature relation ``phi'' = -K phi`` from the origin
conditions ``phi(0) = 0, phi'(0) = 1``. Profiles with steep negative
curvature grow beyond double-precision range, so the integration is
carried in log space: the state is ``(log phi, phi'/phi)``.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from ._util import write_csv
from .errors import ConjugatePointError, DomainError, IntegrationError

__all__ = [
    "RadialGrid",
    "MetricProfile",
    "CurvatureProfile",
    "TailDescriptor",
    "Surface",
    "OriginReport",
    "curvature_of",
    "log_derivative",
    "profile_from_curvature",
    "builtin_profile",
    "builtin_names",
    "check_origin_smoothness",
    "export_profile_csv",
    "read_profile_file",
    "write_profile_file",
]

# Default controls for the curvature IVP.
DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
ORIGIN_STEP = 1e-6          # integration starts here, seeded by a series
ANALYTIC_R_MAX = 1.0e6
_BLOWDOWN = 1e6             # |phi'/phi| threshold marking collapse of phi


# ----------------------------------------------------------------------
# grids
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radii r_0 < r_1 < ... < r_N with N >= 2."""

    nodes: np.ndarray
    spacing: str = "uniform"

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise DomainError("a radial grid needs at least three nodes")
        if not np.all(np.diff(nodes) > 0.0):
            raise DomainError("grid nodes must be strictly increasing")
        if nodes[0] < 0.0:
            raise DomainError("grid nodes must be nonnegative")
        if self.spacing not in ("uniform", "geometric"):
            raise DomainError(f"unknown grid spacing {self.spacing!r}")
        if self.spacing == "geometric" and nodes[0] <= 0.0:
            raise DomainError("geometric grids must start at a positive radius")
        nodes = nodes.copy()
        nodes.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "RadialGrid":
        return cls(np.linspace(a, b, n), "uniform")

    @classmethod
    def geometric(cls, a: float, b: float, n: int) -> "RadialGrid":
        if a <= 0.0:
            raise DomainError("geometric grids must start at a positive radius")
        return cls(np.geomspace(a, b, n), "geometric")

    def __len__(self) -> int:
        return self.nodes.size

    @property
    def r_min(self) -> float:
        return float(self.nodes[0])

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])


# ----------------------------------------------------------------------
# curvature descriptions
# ----------------------------------------------------------------------

TAIL_KINDS = ("ge_milnor", "le_log_threshold", "between", "le_power", "custom")

# Relative slack for tail inequalities: built-in tails sit exactly on
# their bound, so strict comparison would fail on rounding.
_TAIL_SLACK = 1e-9


def _milnor_bound(r: np.ndarray) -> np.ndarray:
    """-1/(r^2 log r); only meaningful for r > 1."""
    return -1.0 / (r * r * np.log(r))


@dataclass(frozen=True)
class TailDescriptor:
    """Declared asymptotic class of a curvature function beyond radius r0.

    kind:
      ge_milnor        K >= -1/(r^2 log r)
      le_log_threshold K <= -(1+eps)/(r^2 log r)
      between          -eta r^2 <= K <= -(1+eps)/(r^2 log r)
      le_power         K <= -r^(2+eps)
      custom           no machine-checkable inequality
    """

    kind: str
    r0: float
    eps: float | None = None
    eta: float | None = None

    def __post_init__(self):
        if self.kind not in TAIL_KINDS:
            raise DomainError(f"unknown tail kind {self.kind!r}")
        if self.kind in ("le_log_threshold", "between", "le_power") and (
            self.eps is None or self.eps <= 0.0
        ):
            raise DomainError(f"tail kind {self.kind!r} needs eps > 0")
        if self.kind == "between" and (self.eta is None or self.eta <= 0.0):
            raise DomainError("tail kind 'between' needs eta > 0")
        if self.kind != "custom" and self.r0 <= 1.0:
            raise DomainError("tail declarations only make sense for r0 > 1")

    def holds_at(self, r: np.ndarray, k: np.ndarray) -> np.ndarray:
        """Pointwise check of the declared inequality at radii r > r0."""
        r = np.asarray(r, dtype=float)
        k = np.asarray(k, dtype=float)
        slack = _TAIL_SLACK * np.maximum(1.0, np.abs(k))
        if self.kind == "ge_milnor":
            return k >= _milnor_bound(r) - slack
        if self.kind == "le_log_threshold":
            return k <= (1.0 + self.eps) * _milnor_bound(r) + slack
        if self.kind == "between":
            lower = -self.eta * r * r
            upper = (1.0 + self.eps) * _milnor_bound(r)
            return (k >= lower - slack) & (k <= upper + slack)
        if self.kind == "le_power":
            return k <= -(r ** (2.0 + self.eps)) + slack
        return np.ones_like(k, dtype=bool)  # custom: nothing to check


@dataclass(frozen=True)
class TailCheck:
    ok: bool
    n_checked: int
    first_violation: float | None = None


@dataclass(frozen=True)
class CurvatureProfile:
    """A Gaussian curvature function K(r) with an optional declared tail."""

    k: Callable
    tail: TailDescriptor | None = None
    name: str = ""

    def __call__(self, r):
        return self.k(r)

    def verify_tail(self, r_upper: float, n: int = 200) -> TailCheck:
        """Sample the declared inequality on (r0, r_upper]; never assume it."""
        if self.tail is None or self.tail.kind == "custom":
            return TailCheck(ok=False, n_checked=0)
        lo = self.tail.r0 * (1.0 + 1e-9)
        if r_upper <= lo:
            return TailCheck(ok=False, n_checked=0)
        radii = np.geomspace(lo, r_upper, n)
        vals = np.asarray(self.k(radii), dtype=float)
        if not np.all(np.isfinite(vals)):
            return TailCheck(ok=False, n_checked=n, first_violation=float(radii[~np.isfinite(vals)][0]))
        good = self.tail.holds_at(radii, vals)
        if np.all(good):
            return TailCheck(ok=True, n_checked=n)
        return TailCheck(ok=False, n_checked=n, first_violation=float(radii[~good][0]))


# ----------------------------------------------------------------------
# metric profiles
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class MetricProfile:
    """The warp function of a rotationally symmetric metric.

    ``phi``, ``phi_prime`` and ``phi_second`` evaluate the warp function
    and its derivatives on (0, r_max]; ``log_phi`` and ``dlog_phi``
    (= phi'/phi) stay finite where phi itself overflows. All evaluators
    accept scalars or arrays and are pure, so profiles are safe to share
    across threads.
    """

    phi: Callable
    phi_prime: Callable
    phi_second: Callable
    log_phi: Callable
    dlog_phi: Callable
    r_max: float
    source: str = "analytic"           # "analytic" | "curvature-integrated"
    name: str = ""
    origin_seed: tuple[float, float] = (0.0, 1.0)
    k_origin: float = 0.0

    def require_radius(self, r: float) -> float:
        r = float(r)
        if not (0.0 < r <= self.r_max * (1.0 + 1e-12)):
            raise DomainError(
                f"radius {r!r} outside the profile domain (0, {self.r_max:g}]"
            )
        return min(r, self.r_max)


@dataclass(frozen=True)
class Surface:
    """A named pairing of a metric profile with its curvature function."""

    name: str
    metric: MetricProfile
    curvature: CurvatureProfile


def curvature_of(profile: MetricProfile, r: float) -> float:
    """Gaussian curvature -phi''/phi at radius r."""
    r = profile.require_radius(r)
    return float(-profile.phi_second(r) / profile.phi(r))


def log_derivative(profile: MetricProfile, r: float) -> float:
    """phi'/phi at radius r, the quantity the comparison arguments control."""
    r = profile.require_radius(r)
    return float(profile.dlog_phi(r))


# ----------------------------------------------------------------------
# curvature -> profile integration (log space)
# ----------------------------------------------------------------------

def _as_curvature_callable(curvature) -> Callable:
    if isinstance(curvature, CurvatureProfile):
        return curvature.k
    if callable(curvature):
        return curvature
    raise DomainError("curvature must be a CurvatureProfile or a callable K(r)")


def profile_from_curvature(
    curvature,
    r_max: float,
    step_control: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL),
    h0: float = ORIGIN_STEP,
    name: str = "",
) -> MetricProfile:
    """Integrate phi'' = -K phi with phi(0) = 0, phi'(0) = 1.

    The ODE is carried as (u, v) = (log phi, phi'/phi), which keeps the
    state representable when phi grows like exp(r^p). Integration starts
    at ``h0`` from the two-term series phi ~ h0 - K(0) h0^3/6.

    Raises ConjugatePointError when phi collapses to zero at some
    positive radius, and IntegrationError when the solver gives up.
    """
    k_fn = _as_curvature_callable(curvature)
    rtol, atol = float(step_control[0]), float(step_control[1])
    if rtol <= 0.0 or atol <= 0.0:
        raise DomainError("step_control tolerances must be positive")
    if not (0.0 < h0 < r_max):
        raise DomainError("origin step h0 must lie in (0, r_max)")

    probe = np.geomspace(h0, r_max, 64)
    kp = np.asarray([k_fn(r) for r in probe], dtype=float)
    if not np.all(np.isfinite(kp)):
        raise DomainError("curvature is not finite on (0, r_max]")

    k0 = float(k_fn(0.0))
    phi0 = h0 - k0 * h0**3 / 6.0
    dphi0 = 1.0 - k0 * h0**2 / 2.0
    y0 = [math.log(phi0), dphi0 / phi0]

    def rhs(r, y):
        return (y[1], -float(k_fn(r)) - y[1] * y[1])

    def jac(r, y):
        return np.array([[0.0, 1.0], [0.0, -2.0 * y[1]]])

    def collapse(r, y):
        return y[1] + _BLOWDOWN

    collapse.terminal = True
    collapse.direction = -1.0

    sol = solve_ivp(
        rhs,
        (h0, float(r_max)),
        y0,
        method="LSODA",
        rtol=rtol,
        atol=atol,
        dense_output=True,
        events=collapse,
        jac=jac,
    )
    if sol.status == 1:
        r_ev = float(sol.t_events[0][0])
        v_ev = float(sol.y_events[0][0][1])
        raise ConjugatePointError(r_ev - 1.0 / v_ev)
    if sol.status != 0:
        raise IntegrationError(
            f"curvature IVP failed near r = {sol.t[-1]:.6g}: {sol.message}"
        )

    dense = sol.sol
    r_hi = float(r_max)

    def _uv(r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        rr = np.atleast_1d(np.clip(r, None, r_hi))
        u = np.empty_like(rr)
        v = np.empty_like(rr)
        small = rr < h0
        if np.any(small):
            t = rr[small]
            p = t - k0 * t**3 / 6.0
            dp = 1.0 - k0 * t**2 / 2.0
            u[small] = np.log(p)
            v[small] = dp / p
        if np.any(~small):
            out = dense(rr[~small])
            u[~small] = out[0]
            v[~small] = out[1]
        if scalar:
            return u[0], v[0]
        return u, v

    def phi(r):
        u, _ = _uv(r)
        return np.exp(u)

    def log_phi(r):
        u, _ = _uv(r)
        return u

    def dlog_phi(r):
        _, v = _uv(r)
        return v

    def phi_prime(r):
        u, v = _uv(r)
        return v * np.exp(u)

    def phi_second(r):
        u, _ = _uv(r)
        r = np.asarray(r, dtype=float)
        k = np.asarray(k_fn(r if r.ndim else float(r)), dtype=float)
        return -k * np.exp(u)

    return MetricProfile(
        phi=phi,
        phi_prime=phi_prime,
        phi_second=phi_second,
        log_phi=log_phi,
        dlog_phi=dlog_phi,
        r_max=r_hi,
        source="curvature-integrated",
        name=name or getattr(curvature, "name", "") or "curvature-integrated",
        k_origin=k0,
    )


# ----------------------------------------------------------------------
# built-in surfaces
# ----------------------------------------------------------------------

def _euclidean_profile() -> MetricProfile:
    return MetricProfile(
        phi=lambda r: np.asarray(r, dtype=float) + 0.0,
        phi_prime=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        phi_second=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        log_phi=lambda r: np.log(r),
        dlog_phi=lambda r: 1.0 / np.asarray(r, dtype=float),
        r_max=ANALYTIC_R_MAX,
        source="analytic",
        name="euclidean",
        k_origin=0.0,
    )


def _log_sinh(r):
    # log sinh r without overflow: r + log((1 - e^{-2r})/2)
    r = np.asarray(r, dtype=float)
    return r + np.log1p(-np.exp(-2.0 * r)) - math.log(2.0)


def _coth(r):
    r = np.asarray(r, dtype=float)
    if r.ndim == 0:
        rf = float(r)
        return 1.0 / math.tanh(rf) if rf < 20.0 else 1.0
    out = np.ones_like(r)
    mod = r < 20.0
    out[mod] = 1.0 / np.tanh(r[mod])
    return out


def _sinh_safe(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore"):
        return np.sinh(r)


def _cosh_safe(r):
    r = np.asarray(r, dtype=float)
    with np.errstate(over="ignore"):
        return np.cosh(r)


def _hyperbolic_profile() -> MetricProfile:
    return MetricProfile(
        phi=_sinh_safe,
        phi_prime=_cosh_safe,
        phi_second=_sinh_safe,
        log_phi=_log_sinh,
        dlog_phi=_coth,
        r_max=ANALYTIC_R_MAX,
        source="analytic",
        name="hyperbolic",
        k_origin=-1.0,
    )


def _smoothstep5(x):
    """C^2 quintic ramp: 0 at x<=0, 1 at x>=1, zero 1st/2nd derivatives at both ends."""
    x = np.clip(x, 0.0, 1.0)
    return x**3 * (10.0 - 15.0 * x + 6.0 * x**2)


def _blended_curvature(tail_fn: Callable, r0: float) -> Callable:
    """Constant cap on [0, r0], quintic blend on [r0, r0+1], tail beyond.

    The cap equals the tail value at r0+1, so the curvature is constant
    on the inner region and exactly the declared formula outside.
    """
    cap = float(tail_fn(r0 + 1.0))

    def k(r):
        r = np.asarray(r, dtype=float)
        s = _smoothstep5(r - r0)
        tail = tail_fn(np.maximum(r, r0 + 1e-12))
        return (1.0 - s) * cap + s * tail

    return k


def builtin_names() -> tuple[str, ...]:
    return ("euclidean", "hyperbolic", "log-threshold", "power-curvature", "quadratic-curvature")


def builtin_profile(
    name: str,
    eps: float | None = None,
    eta: float | None = None,
    r0: float | None = None,
    r_max: float = 1200.0,
    step_control: tuple[float, float] = (DEFAULT_RTOL, DEFAULT_ATOL),
) -> Surface:
    """Construct one of the named surfaces.

    euclidean / hyperbolic come with closed-form warp functions. The
    three curvature families are built from a capped-and-blended tail
    and integrated:

      log-threshold(eps, r0)       K -> -(1+eps)/(r^2 log r),  r0 >= 2
      power-curvature(eps, r0)     K -> -r^(2+eps)
      quadratic-curvature(eta, r0) K -> -eta r^2
    """
    key = name.strip().lower().replace("_", "-")
    if key == "euclidean":
        metric = _euclidean_profile()
        curv = CurvatureProfile(
            k=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            tail=TailDescriptor("ge_milnor", r0=2.0),
            name="euclidean",
        )
        return Surface("euclidean", metric, curv)

    if key == "hyperbolic":
        metric = _hyperbolic_profile()
        curv = CurvatureProfile(
            k=lambda r: np.full_like(np.asarray(r, dtype=float), -1.0),
            tail=TailDescriptor("between", r0=2.0, eps=1.0, eta=1.0),
            name="hyperbolic",
        )
        return Surface("hyperbolic", metric, curv)

    if key == "log-threshold":
        if eps is None or eps <= 0.0:
            raise DomainError("log-threshold needs eps > 0")
        r0 = 2.0 if r0 is None else float(r0)
        if r0 < 2.0:
            raise DomainError("log-threshold needs r0 >= 2 (the tail is singular at log r = 0)")
        e = float(eps)

        def tail(r):
            r = np.asarray(r, dtype=float)
            return -(1.0 + e) / (r * r * np.log(r))

        curv = CurvatureProfile(
            k=_blended_curvature(tail, r0),
            # the tail also sits above every -eta r^2 bound, so the
            # two-sided declaration is the informative one
            tail=TailDescriptor("between", r0=r0 + 1.0, eps=e, eta=1.0),
            name=f"log-threshold(eps={e:g}, r0={r0:g})",
        )
    elif key == "power-curvature":
        if eps is None or eps <= 0.0:
            raise DomainError("power-curvature needs eps > 0")
        r0 = 1.0 if r0 is None else float(r0)
        if r0 <= 0.0:
            raise DomainError("power-curvature needs r0 > 0")
        e = float(eps)

        def tail(r):
            r = np.asarray(r, dtype=float)
            return -(r ** (2.0 + e))

        curv = CurvatureProfile(
            k=_blended_curvature(tail, r0),
            tail=TailDescriptor("le_power", r0=max(r0, 1.0 + 1e-6), eps=e),
            name=f"power-curvature(eps={e:g}, r0={r0:g})",
        )
    elif key == "quadratic-curvature":
        if eta is None or eta <= 0.0:
            raise DomainError("quadratic-curvature needs eta > 0")
        r0 = 1.0 if r0 is None else float(r0)
        if r0 <= 0.0:
            raise DomainError("quadratic-curvature needs r0 > 0")
        et = float(eta)

        def tail(r):
            r = np.asarray(r, dtype=float)
            return -et * r * r

        # -eta r^2 falls below the log-threshold bound only once
        # eta r^4 log r > 1 + eps; declare the band from there on
        r_decl = max(r0 + 1.0, 2.0)
        while et * r_decl**4 * math.log(r_decl) < 2.02 and r_decl < 1e3:
            r_decl *= 1.05
        curv = CurvatureProfile(
            k=_blended_curvature(tail, r0),
            tail=TailDescriptor("between", r0=r_decl, eps=1.0, eta=et),
            name=f"quadratic-curvature(eta={et:g}, r0={r0:g})",
        )
    else:
        raise DomainError(f"unknown built-in profile {name!r}")

    metric = profile_from_curvature(curv, r_max=r_max, step_control=step_control, name=curv.name)
    return Surface(curv.name, metric, curv)


# ----------------------------------------------------------------------
# origin diagnostics
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class OriginReport:
    """Finite-difference estimates of phi and its derivatives at 0+."""

    h: float
    value: float
    slope: float
    second: float
    value_ok: bool
    slope_ok: bool
    second_ok: bool
    tolerances: tuple[float, float, float]

    @property
    def smooth(self) -> bool:
        return self.value_ok and self.slope_ok and self.second_ok


def check_origin_smoothness(profile: MetricProfile, h: float = 1e-3) -> OriginReport:
    """Check phi(0+) = 0, phi'(0+) = 1, phi''(0+) = 0 by extrapolation.

    A cubic through phi(h), ..., phi(4h) is evaluated at 0. The report
    carries the estimates and pass flags; it never raises on failure.
    """
    h = float(h)
    if h <= 0.0 or h > profile.r_max / 10.0:
        raise DomainError("need 0 < h <= r_max/10")
    xs = h * np.arange(1.0, 5.0)
    ys = np.asarray(profile.phi(xs), dtype=float)
    coeffs = np.polyfit(xs, ys, 3)
    value = float(np.polyval(coeffs, 0.0))
    slope = float(np.polyval(np.polyder(coeffs), 0.0))
    second = float(np.polyval(np.polyder(coeffs, 2), 0.0))
    tols = (
        max(50.0 * h**3, 1e-12),
        max(50.0 * h**2, 1e-10),
        max(50.0 * h, 1e-8),
    )
    return OriginReport(
        h=h,
        value=value,
        slope=slope,
        second=second,
        value_ok=abs(value) <= tols[0],
        slope_ok=abs(slope - 1.0) <= tols[1],
        second_ok=abs(second) <= tols[2],
        tolerances=tols,
    )


# ----------------------------------------------------------------------
# file formats
# ----------------------------------------------------------------------

def export_profile_csv(path, profile: MetricProfile, grid: RadialGrid,
                       curvature: CurvatureProfile | None = None) -> None:
    """Sampled-profile export: columns r, phi, phi_prime, K."""
    r = grid.nodes
    phi = np.asarray(profile.phi(r), dtype=float)
    dphi = np.asarray(profile.phi_prime(r), dtype=float)
    if curvature is not None:
        k = np.asarray(curvature.k(r), dtype=float)
    else:
        k = -np.asarray(profile.phi_second(r), dtype=float) / phi
    rows = zip(map(float, r), map(float, phi), map(float, dphi), map(float, k))
    write_csv(path, ["r", "phi", "phi_prime", "K"], rows)


_PROFILE_KEYS = ("name", "eps", "eta", "r0", "r_max", "rtol", "atol")


def write_profile_file(path, name: str, eps=None, eta=None, r0=None,
                       r_max=1200.0, rtol=DEFAULT_RTOL, atol=DEFAULT_ATOL) -> None:
    cfg = configparser.ConfigParser()
    cfg["profile"] = {}
    sect = cfg["profile"]
    sect["name"] = name
    for key, val in (("eps", eps), ("eta", eta), ("r0", r0)):
        if val is not None:
            sect[key] = repr(float(val))
    sect["r_max"] = repr(float(r_max))
    sect["rtol"] = repr(float(rtol))
    sect["atol"] = repr(float(atol))
    with open(path, "w") as fh:
        cfg.write(fh)


def read_profile_file(path) -> Surface:
    """Build a surface from a key-value profile definition file."""
    cfg = configparser.ConfigParser()
    read = cfg.read(path)
    if not read or "profile" not in cfg:
        raise DomainError(f"{path}: not a profile definition file (missing [profile])")
    sect = cfg["profile"]
    unknown = set(sect) - set(_PROFILE_KEYS)
    if unknown:
        raise DomainError(f"{path}: unknown profile keys {sorted(unknown)}")
    if "name" not in sect:
        raise DomainError(f"{path}: profile file needs a name")
    get = lambda key: float(sect[key]) if key in sect else None
    return builtin_profile(
        sect["name"],
        eps=get("eps"),
        eta=get("eta"),
        r0=get("r0"),
        r_max=get("r_max") or 1200.0,
        step_control=(get("rtol") or DEFAULT_RTOL, get("atol") or DEFAULT_ATOL),
    )
