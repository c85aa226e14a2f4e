"""Biharmonic Dirichlet problem on a geodesic disk.

Boundary traces of u and of its Laplacian on the circle r = R determine
a biharmonic function on the disk through the per-mode expansion

    u = sum_m (c_m phi_m(r) + d_m psi_m(r)) e^{i m theta},

whose coefficients solve the triangular system

    c_m phi_m(R) + d_m psi_m(R) = alpha_m,
    d_m phi_m(R)                = beta_m,

with (alpha_m, beta_m) the Fourier coefficients of the traces. Since
psi_m = z phi_m, the solve reduces to d_m = beta_m e^{-Lambda_m(R)} and
c_m = (alpha_m - beta_m z(R)) e^{-Lambda_m(R)}, which stays well scaled
even when phi_m(R) itself overflows.
"""

from __future__ import annotations

import cmath
import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from ._util import fmt17, write_csv
from .errors import AliasingWarning, DomainError
from .geometry import MetricProfile, RadialGrid
from .modes import mode_pass
from .operators import sample_derivatives

__all__ = [
    "BoundaryTrace",
    "FourierSpectrum",
    "ModeCoefficients",
    "DiskResidualReport",
    "analyze_trace",
    "synthesize_trace",
    "solve_disk_biharmonic",
    "evaluate_solution",
    "verify_disk_solution",
    "read_trace_csv",
    "write_trace_csv",
    "write_coefficients_csv",
]

ALIASING_ENERGY_FRACTION = 1e-8
_LOG_FORM_THRESHOLD = 500.0   # switch coefficients to log-magnitude form
_MODE_GRID_POINTS = 3200
# Mode interpolants start at this fraction of R; below it the modes are
# within O(r_inner^2) of their origin power laws, which the table
# extends analytically.
_MODE_GRID_INNER = 1e-2


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class BoundaryTrace:
    """Samples of u and Delta u on the boundary circle of radius R.

    Angles are the N equispaced nodes theta_j = 2 pi j / N with N a
    power of two.
    """

    radius: float
    u_values: np.ndarray
    lap_u_values: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_values)
        lap = np.asarray(self.lap_u_values)
        if u.ndim != 1 or u.shape != lap.shape:
            raise DomainError("trace arrays must be 1-d and of equal length")
        if not _is_power_of_two(u.size):
            raise DomainError("trace length must be a power of two")
        if self.radius <= 0.0:
            raise DomainError("disk radius must be positive")
        u = u.astype(complex) if np.iscomplexobj(u) else u.astype(float)
        lap = lap.astype(complex) if np.iscomplexobj(lap) else lap.astype(float)
        for arr in (u, lap):
            arr.flags.writeable = False
        object.__setattr__(self, "u_values", u)
        object.__setattr__(self, "lap_u_values", lap)

    @property
    def n_samples(self) -> int:
        return self.u_values.size

    @property
    def theta_nodes(self) -> np.ndarray:
        n = self.n_samples
        return 2.0 * math.pi * np.arange(n) / n


@dataclass(frozen=True)
class FourierSpectrum:
    """Boundary Fourier coefficients (alpha_m, beta_m) for |m| <= m_max.

    Arrays are ordered m = -m_max ... m_max. ``truncation_energy`` is
    the fraction of trace energy beyond m_max (u trace, Delta u trace).
    """

    m_max: int
    alpha: np.ndarray
    beta: np.ndarray
    truncation_energy: tuple[float, float]
    real_valued: bool

    def __post_init__(self):
        size = 2 * self.m_max + 1
        alpha = np.asarray(self.alpha, dtype=complex)
        beta = np.asarray(self.beta, dtype=complex)
        if alpha.shape != (size,) or beta.shape != (size,):
            raise DomainError("spectrum arrays must cover m = -m_max .. m_max")
        for arr in (alpha, beta):
            arr.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    def index(self, m: int) -> int:
        if abs(m) > self.m_max:
            raise DomainError(f"|m| <= {self.m_max} required")
        return m + self.m_max

    def pair(self, m: int) -> tuple[complex, complex]:
        i = self.index(m)
        return complex(self.alpha[i]), complex(self.beta[i])

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)


def analyze_trace(trace: BoundaryTrace, m_max: int) -> FourierSpectrum:
    """Discrete Fourier analysis of both boundary sample arrays.

    Requires N >= 2 m_max + 2 so the kept coefficients are alias-free.
    Issues an AliasingWarning when more than 1e-8 of either trace's
    energy lies beyond m_max.
    """
    n = trace.n_samples
    m_max = int(m_max)
    if m_max < 0:
        raise DomainError("m_max must be nonnegative")
    if n < 2 * m_max + 2:
        raise DomainError(f"need at least {2 * m_max + 2} samples for m_max = {m_max}")

    def coefficients(values):
        spec = np.fft.fft(values) / n
        total = float(np.sum(np.abs(spec) ** 2))
        kept = np.empty(2 * m_max + 1, dtype=complex)
        for m in range(-m_max, m_max + 1):
            kept[m + m_max] = spec[m % n]
        kept_energy = float(np.sum(np.abs(kept) ** 2))
        excess = max(total - kept_energy, 0.0) / total if total > 0.0 else 0.0
        return kept, excess

    alpha, eu = coefficients(trace.u_values)
    beta, el = coefficients(trace.lap_u_values)
    if max(eu, el) > ALIASING_ENERGY_FRACTION:
        warnings.warn(
            f"trace energy beyond m_max={m_max}: u {eu:.3g}, lap {el:.3g}",
            AliasingWarning,
            stacklevel=2,
        )
    real_valued = not (np.iscomplexobj(trace.u_values) or np.iscomplexobj(trace.lap_u_values))
    return FourierSpectrum(
        m_max=m_max,
        alpha=alpha,
        beta=beta,
        truncation_energy=(eu, el),
        real_valued=real_valued,
    )


def synthesize_trace(spectrum: FourierSpectrum, radius: float, n: int) -> BoundaryTrace:
    """Evaluate the spectrum back onto n equispaced boundary angles."""
    if not _is_power_of_two(n) or n < 2 * spectrum.m_max + 2:
        raise DomainError("n must be a power of two with n >= 2 m_max + 2")
    full_a = np.zeros(n, dtype=complex)
    full_b = np.zeros(n, dtype=complex)
    for m in range(-spectrum.m_max, spectrum.m_max + 1):
        a, b = spectrum.pair(m)
        full_a[m % n] = a
        full_b[m % n] = b
    u = np.fft.ifft(full_a) * n
    lap = np.fft.ifft(full_b) * n
    if spectrum.real_valued:
        u = u.real
        lap = lap.real
    return BoundaryTrace(radius=radius, u_values=u, lap_u_values=lap)


# ----------------------------------------------------------------------
# per-mode tables and the solve
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class _ModeTable:
    """Monotone cubic interpolants of Lambda_m and z in log r, per |m|.

    ``passes`` keeps the dense quadrature solutions for verification,
    which must not inherit interpolation error.
    """

    radius: float
    r_inner: float
    lam_interp: tuple
    z_interp: tuple
    lam_at_radius: np.ndarray
    z_at_radius: np.ndarray
    grid: RadialGrid
    passes: tuple

    def lam(self, m: int, r):
        r = np.asarray(r, dtype=float)
        am = abs(m)
        lam_r = self.lam_interp[am](np.log(np.maximum(r, self.r_inner)))
        small = r < self.r_inner
        if np.any(small):
            # below the table: phi_m ~ (r/r_inner)^|m| phi_m(r_inner)
            lam_r = np.where(
                small,
                self.lam_interp[am](math.log(self.r_inner))
                + am * (np.log(np.maximum(r, 1e-300)) - math.log(self.r_inner)),
                lam_r,
            )
        return lam_r

    def z(self, m: int, r):
        r = np.asarray(r, dtype=float)
        am = abs(m)
        z_r = self.z_interp[am](np.log(np.maximum(r, self.r_inner)))
        small = r < self.r_inner
        if np.any(small):
            z_r = np.where(
                small,
                self.z_interp[am](math.log(self.r_inner))
                * (np.maximum(r, 0.0) / self.r_inner) ** 2,
                z_r,
            )
        return z_r


def _build_mode_table(profile: MetricProfile, radius: float, m_max: int,
                      rtol: float, atol: float) -> _ModeTable:
    r_inner = max(_MODE_GRID_INNER * radius, 4e-5)
    grid = RadialGrid.geometric(r_inner, radius, _MODE_GRID_POINTS)
    log_nodes = np.log(grid.nodes)
    lam_interp = []
    z_interp = []
    passes = []
    lam_r = np.empty(m_max + 1)
    z_r = np.empty(m_max + 1)
    for am in range(m_max + 1):
        mp = mode_pass(profile, am, radius, rtol=rtol, atol=atol)
        lam, _, z = mp.all_values(grid.nodes)
        lam_interp.append(PchipInterpolator(log_nodes, lam, extrapolate=True))
        z_interp.append(PchipInterpolator(log_nodes, z, extrapolate=True))
        passes.append(mp)
        lam_r[am] = lam[-1]
        z_r[am] = z[-1]
    return _ModeTable(
        radius=float(radius),
        r_inner=float(r_inner),
        lam_interp=tuple(lam_interp),
        z_interp=tuple(z_interp),
        lam_at_radius=lam_r,
        z_at_radius=z_r,
        grid=grid,
        passes=tuple(passes),
    )


@dataclass(frozen=True)
class ModeCoefficients:
    """Expansion coefficients (c_m, d_m) for |m| <= m_max.

    When Lambda_m(R) exceeds the log-form threshold, exp(-Lambda) is not
    representable and the plain coefficient underflows to zero; such
    entries are flagged in ``underflow`` and their magnitudes kept in
    ``log_c_mag``/``log_d_mag`` (natural log, with phases in the complex
    entries). ``conditioning`` holds psi_m(R)/phi_m(R) = z(R) per |m|.
    """

    m_max: int
    radius: float
    c: np.ndarray
    d: np.ndarray
    underflow: np.ndarray
    log_c_mag: np.ndarray
    log_d_mag: np.ndarray
    conditioning: np.ndarray
    spectrum: FourierSpectrum
    real_valued: bool
    _table: _ModeTable = field(repr=False)

    def index(self, m: int) -> int:
        if abs(m) > self.m_max:
            raise DomainError(f"|m| <= {self.m_max} required")
        return m + self.m_max

    def pair(self, m: int) -> tuple[complex, complex]:
        i = self.index(m)
        return complex(self.c[i]), complex(self.d[i])

    @property
    def m_values(self) -> np.ndarray:
        return np.arange(-self.m_max, self.m_max + 1)

    @property
    def truncation_energy(self) -> tuple[float, float]:
        return self.spectrum.truncation_energy


def solve_disk_biharmonic(
    profile: MetricProfile,
    radius: float,
    spectrum: FourierSpectrum,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> ModeCoefficients:
    """Solve the boundary coefficient system on the disk of given radius.

    d_m = beta_m e^{-Lambda_m(R)} and c_m = (alpha_m - beta_m z(R))
    e^{-Lambda_m(R)}; both are formed from Lambda rather than phi_m, so
    huge phi_m(R) only shows up as a large subtracted exponent.
    Coefficient underflow is flagged, never silent.
    """
    radius = profile.require_radius(radius)
    m_max = spectrum.m_max
    table = _build_mode_table(profile, radius, m_max, rtol, atol)
    size = 2 * m_max + 1
    c = np.zeros(size, dtype=complex)
    d = np.zeros(size, dtype=complex)
    underflow = np.zeros(size, dtype=bool)
    log_c_mag = np.full(size, -math.inf)
    log_d_mag = np.full(size, -math.inf)
    conditioning = np.empty(size)

    for m in range(-m_max, m_max + 1):
        i = m + m_max
        am = abs(m)
        lam_r = float(table.lam_at_radius[am])
        z_r = float(table.z_at_radius[am])
        alpha_m, beta_m = spectrum.pair(m)
        conditioning[i] = z_r
        c_resid = alpha_m - beta_m * z_r
        if abs(beta_m) > 0.0:
            log_d_mag[i] = math.log(abs(beta_m)) - lam_r
        if abs(c_resid) > 0.0:
            log_c_mag[i] = math.log(abs(c_resid)) - lam_r
        if lam_r <= _LOG_FORM_THRESHOLD:
            scale = math.exp(-lam_r)
            d[i] = beta_m * scale
            c[i] = c_resid * scale
        else:
            # exp(-lam_r) underflows; keep the representable parts
            d[i] = beta_m * 0.0
            c[i] = c_resid * 0.0
        if beta_m != 0 and d[i] == 0:
            underflow[i] = True
        if c_resid != 0 and c[i] == 0:
            underflow[i] = True

    return ModeCoefficients(
        m_max=m_max,
        radius=radius,
        c=c,
        d=d,
        underflow=underflow,
        log_c_mag=log_c_mag,
        log_d_mag=log_d_mag,
        conditioning=conditioning,
        spectrum=spectrum,
        real_valued=spectrum.real_valued,
        _table=table,
    )


def evaluate_solution(
    profile: MetricProfile, coeffs: ModeCoefficients, r: float, theta: float
):
    """Partial-sum value of the disk solution at (r, theta), r <= R.

    Radial factors are interpolated between mode-grid nodes by monotone
    cubics of Lambda_m and z. Requests beyond the disk are refused.
    """
    r = float(r)
    if r > coeffs.radius * (1.0 + 1e-12):
        raise DomainError("evaluation outside the disk is extrapolation; refused")
    r = min(r, coeffs.radius)
    if r < 0.0:
        raise DomainError("radius must be nonnegative")
    table = coeffs._table
    total = 0.0 + 0.0j
    for m in range(-coeffs.m_max, coeffs.m_max + 1):
        cm, dm = coeffs.pair(m)
        if cm == 0 and dm == 0:
            continue
        if r == 0.0:
            if m != 0:
                continue
            lam = table.lam(0, table.r_inner)  # Lambda_0 = 0
            radial = cm + dm * 0.0
        else:
            lam = float(table.lam(m, r))
            z = float(table.z(m, r))
            radial = (cm + dm * z) * math.exp(min(lam, 700.0))
        total += radial * cmath.exp(1j * m * theta)
    if coeffs.real_valued:
        return float(total.real)
    return total


# ----------------------------------------------------------------------
# verification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiskResidualReport:
    """Interior residuals per mode and boundary reproduction errors.

    ``interior_max``/``interior_rms`` cover the scaled per-mode residual
    |L_m F_m - d_m phi_m| / max over the grid of (1, |F_m|), where
    F_m = c_m phi_m + d_m psi_m. Boundary errors are sup-norm bounds
    from the coefficient mismatch at r = R.
    """

    interior_max: float
    interior_rms: float
    per_mode_max: dict
    boundary_u_error: float
    boundary_lap_error: float


def verify_disk_solution(
    profile: MetricProfile, coeffs: ModeCoefficients, grid: RadialGrid
) -> DiskResidualReport:
    """Apply the radial stencils per mode and re-check the boundary."""
    x = grid.nodes
    if x[0] <= 0.0:
        raise DomainError("verification grid must stay inside (0, R]")
    if x[-1] > coeffs.radius * (1.0 + 1e-12):
        raise DomainError("verification grid extends beyond the disk")
    table = coeffs._table
    v = np.asarray(profile.dlog_phi(x), dtype=float)
    phi = np.asarray(profile.phi(x), dtype=float)

    per_mode = {}
    worst = 0.0
    sq_sum = 0.0
    n_res = 0
    for m in range(-coeffs.m_max, coeffs.m_max + 1):
        cm, dm = coeffs.pair(m)
        am = abs(m)
        lam, _, z = table.passes[am].all_values(x)
        phim = np.exp(np.minimum(lam, 700.0))
        fm = (cm + dm * z) * phim
        d1r, d2r = sample_derivatives(x, fm.real)
        res = (d2r + v * d1r - (am * am) / (phi * phi) * fm.real) - dm.real * phim
        if np.iscomplexobj(fm) and (abs(cm.imag) > 0 or abs(dm.imag) > 0):
            d1i, d2i = sample_derivatives(x, fm.imag)
            res_im = (d2i + v * d1i - (am * am) / (phi * phi) * fm.imag) - dm.imag * phim
            res = res + 1j * res_im
        scale = max(1.0, float(np.max(np.abs(fm))))
        scaled = np.abs(res[1:-1]) / scale
        per_mode[m] = float(np.max(scaled))
        worst = max(worst, per_mode[m])
        sq_sum += float(np.sum(scaled**2))
        n_res += scaled.size

    bu = 0.0
    bl = 0.0
    for m in range(-coeffs.m_max, coeffs.m_max + 1):
        cm, dm = coeffs.pair(m)
        am = abs(m)
        lam_r = float(coeffs._table.lam_at_radius[am])
        z_r = float(coeffs._table.z_at_radius[am])
        alpha_m, beta_m = coeffs.spectrum.pair(m)
        phim = math.exp(min(lam_r, 700.0))
        bu += abs((cm + dm * z_r) * phim - alpha_m)
        bl += abs(dm * phim - beta_m)
    return DiskResidualReport(
        interior_max=worst,
        interior_rms=math.sqrt(sq_sum / max(n_res, 1)),
        per_mode_max=per_mode,
        boundary_u_error=bu,
        boundary_lap_error=bl,
    )


# ----------------------------------------------------------------------
# CSV interfaces
# ----------------------------------------------------------------------

def read_trace_csv(path, radius: float) -> BoundaryTrace:
    """Read a trace file with columns theta, u, lap_u.

    Angles must be the equispaced grid 2 pi j / N in order.
    """
    thetas = []
    u = []
    lap = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["theta", "u", "lap_u"]:
            raise DomainError(f"{path}: expected header theta,u,lap_u")
        for row in reader:
            if not row:
                continue
            thetas.append(float(row[0]))
            u.append(float(row[1]))
            lap.append(float(row[2]))
    n = len(thetas)
    if not _is_power_of_two(n):
        raise DomainError(f"{path}: trace length {n} is not a power of two")
    expected = 2.0 * math.pi * np.arange(n) / n
    if not np.allclose(np.asarray(thetas), expected, atol=1e-9 * 2 * math.pi):
        raise DomainError(f"{path}: angles are not the equispaced grid 2*pi*j/N")
    return BoundaryTrace(radius=radius, u_values=np.asarray(u), lap_u_values=np.asarray(lap))


def write_trace_csv(path, trace: BoundaryTrace) -> None:
    rows = zip(
        map(float, trace.theta_nodes),
        map(float, np.real(trace.u_values)),
        map(float, np.real(trace.lap_u_values)),
    )
    write_csv(path, ["theta", "u", "lap_u"], rows)


def write_coefficients_csv(path, coeffs: ModeCoefficients) -> None:
    """Coefficient output: m, re_c, im_c, re_d, im_d."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["m", "re_c", "im_c", "re_d", "im_d"])
        for m in range(-coeffs.m_max, coeffs.m_max + 1):
            cm, dm = coeffs.pair(m)
            writer.writerow(
                [m, fmt17(cm.real), fmt17(cm.imag), fmt17(dm.real), fmt17(dm.imag)]
            )
