"""Curvature regimes for harmonic and biharmonic Liouville behavior.

Two routes feed a classification:

* declared route -- the curvature carries a tail declaration (an
  inequality beyond some radius), and the inequality is verified on
  samples up to the horizon, never assumed;
* numeric route -- boundedness verdicts for phi_m and the reduction
  factor z at a finite horizon, plus the fitted decay exponent of the
  mean-integral ratio.

The regime labels:

  harmonic:   parabolic | hyperbolic | undetermined
  biharmonic: rigid | liouville_to_harmonic | admits_nonharmonic_bounded
              | undetermined

A label is only emitted when its triggering inequality was sample-
verified (declared route) or the numeric verdicts agree across tested
angular frequencies. Regions the theory does not cover come out
undetermined on purpose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._util import parallel_map, write_csv, fmt17
from .errors import DomainError
from .geometry import (
    CurvatureProfile,
    MetricProfile,
    Surface,
    TailDescriptor,
    profile_from_curvature,
)
from .modes import mode_pass

__all__ = [
    "PARABOLIC",
    "HYPERBOLIC",
    "RIGID",
    "LIOUVILLE_TO_HARMONIC",
    "ADMITS_NONHARMONIC_BOUNDED",
    "UNDETERMINED",
    "LimitEstimate",
    "TailFit",
    "ModeEvidence",
    "EvidenceBundle",
    "ClassificationReport",
    "estimate_log_derivative_limit",
    "fit_tail_exponent",
    "numeric_evidence",
    "classify_harmonic",
    "classify_biharmonic",
    "classify_surface",
    "export_report",
]

PARABOLIC = "parabolic"
HYPERBOLIC = "hyperbolic"
RIGID = "rigid"
LIOUVILLE_TO_HARMONIC = "liouville_to_harmonic"
ADMITS_NONHARMONIC_BOUNDED = "admits_nonharmonic_bounded"
UNDETERMINED = "undetermined"

BOUNDED = "bounded"
UNBOUNDED = "unbounded"

DEFAULT_HORIZON = 1000.0
DEFAULT_M_SET = (1, 2, 3, 4, 5, 6, 7, 8)

# Verdict rule constants. An increasing quantity sampled at doubling
# radii is declared bounded when its increments either plateau (fall
# below PLATEAU_FRAC of the value) or shrink geometrically (median
# increment ratio below RATIO_BOUNDED); it is unbounded when increments
# grow or their ratio stays near or above one.
PLATEAU_FRAC = 1e-6
RATIO_BOUNDED = 0.92
RATIO_UNBOUNDED = 0.97
FIT_RESIDUAL_MAX = 0.05


# ----------------------------------------------------------------------
# log-derivative limit
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class LimitEstimate:
    """Finite-horizon estimate of lim phi'/phi."""

    last: float
    extrapolated: float
    trend: str                  # "decreasing" | "increasing" | "flat" | "mixed"
    radii: np.ndarray
    values: np.ndarray


def estimate_log_derivative_limit(
    profile: MetricProfile, horizon: float, n: int = 12
) -> LimitEstimate:
    """Sample phi'/phi at geometrically spaced radii up to the horizon.

    Returns the last sample, an Aitken-extrapolated limit, and a
    monotonicity flag over the sampled window.
    """
    horizon = profile.require_radius(horizon)
    radii = horizon / 2.0 ** np.arange(n - 1, -1.0, -1.0)
    values = np.asarray(profile.dlog_phi(radii), dtype=float)
    diffs = np.diff(values[-6:])
    if np.all(diffs <= 1e-14):
        trend = "flat" if np.allclose(diffs, 0.0, atol=1e-14) else "decreasing"
    elif np.all(diffs >= -1e-14):
        trend = "increasing"
    else:
        trend = "mixed"
    d1 = values[-1] - values[-2]
    d2 = d1 - (values[-2] - values[-3])
    if abs(d2) > 1e-14 * max(1.0, abs(values[-1])):
        extrapolated = values[-1] - d1 * d1 / d2
    else:
        extrapolated = values[-1]
    return LimitEstimate(
        last=float(values[-1]),
        extrapolated=float(extrapolated),
        trend=trend,
        radii=radii,
        values=values,
    )


# ----------------------------------------------------------------------
# tail fitting
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class TailFit:
    """Best-matching curvature tail template over a sampling window.

    kind is "power" (-K ~ C r^p), "log_threshold" (-K ~ kappa/(r^2 log r)),
    "nonnegative" (K >= 0 somewhere, not classifiable by tail), or
    "undetermined" (no template fits within the residual threshold).
    """

    kind: str
    exponent: float | None      # p for power fits
    kappa: float | None         # 1 + eps for log-threshold fits
    residual: float
    window: tuple[float, float]


def fit_tail_exponent(
    curvature, window: tuple[float, float], n: int = 32
) -> TailFit:
    """Least-squares fit of log(-K) against the regime templates."""
    k_fn = curvature.k if isinstance(curvature, CurvatureProfile) else curvature
    lo, hi = float(window[0]), float(window[1])
    if not (1.0 < lo < hi):
        raise DomainError("fit window must satisfy 1 < lo < hi")
    if n < 16:
        raise DomainError("need at least 16 samples for a tail fit")
    radii = np.geomspace(lo, hi, n)
    k = np.asarray(k_fn(radii), dtype=float)
    if np.any(k >= 0.0):
        return TailFit("nonnegative", None, None, math.inf, (lo, hi))

    log_r = np.log(radii)
    log_mk = np.log(-k)
    # power template: log(-K) = p log r + c
    p, c = np.polyfit(log_r, log_mk, 1)
    res_power = float(np.sqrt(np.mean((log_mk - (p * log_r + c)) ** 2)))
    # log-threshold template: log(-K) = log kappa - 2 log r - log log r
    shifted = log_mk + 2.0 * log_r + np.log(log_r)
    log_kappa = float(np.mean(shifted))
    res_log = float(np.sqrt(np.mean((shifted - log_kappa) ** 2)))

    if res_log <= res_power and res_log <= FIT_RESIDUAL_MAX:
        return TailFit("log_threshold", None, math.exp(log_kappa), res_log, (lo, hi))
    if res_power <= FIT_RESIDUAL_MAX:
        return TailFit("power", float(p), None, res_power, (lo, hi))
    return TailFit("undetermined", None, None, min(res_power, res_log), (lo, hi))


# ----------------------------------------------------------------------
# boundedness verdicts at a finite horizon
# ----------------------------------------------------------------------

def _ladder(horizon: float, r_base: float = 2.0) -> np.ndarray:
    k = int(math.floor(math.log2(horizon / r_base)))
    k = max(k, 3)
    return horizon / 2.0 ** np.arange(k, -1.0, -1.0)


def _increment_verdict(values: np.ndarray) -> tuple[str, float, float]:
    """Verdict for a nondecreasing quantity sampled at doubling radii.

    Returns (verdict, median increment ratio, last increment relative to
    the final value).
    """
    values = np.asarray(values, dtype=float)
    scale = max(abs(values[-1]), 1e-30)
    inc = np.diff(values)
    rel_last = float(inc[-1] / scale)
    if np.all(np.abs(inc) <= 1e-12 * scale):
        return BOUNDED, 0.0, rel_last
    if inc[-1] <= PLATEAU_FRAC * scale and inc[-2] <= PLATEAU_FRAC * scale:
        return BOUNDED, 0.0, rel_last
    tail = inc[-4:]
    if np.any(tail <= 0.0):
        return BOUNDED, 0.0, rel_last  # increments already at rounding level
    ratios = tail[1:] / tail[:-1]
    rho = float(np.median(ratios))
    if np.all(ratios >= 1.0 - 1e-9) or rho >= RATIO_UNBOUNDED:
        return UNBOUNDED, rho, rel_last
    if rho <= RATIO_BOUNDED:
        return BOUNDED, rho, rel_last
    return UNDETERMINED, rho, rel_last


@dataclass(frozen=True)
class ModeEvidence:
    """Finite-horizon growth evidence for one angular frequency."""

    m: int
    phi_verdict: str
    z_verdict: str
    phi_ratio: float
    z_ratio: float
    lam_at_horizon: float
    z_at_horizon: float
    inner_ratio_max: float      # max of w(s) up to the horizon


@dataclass(frozen=True)
class EvidenceBundle:
    """Everything the numeric route knows about a profile at its horizon."""

    horizon: float
    modes: tuple[ModeEvidence, ...]
    ratio_slope: float
    ratio_window: tuple[float, float]
    phi_grows: bool
    phi_nondecreasing: bool
    log_derivative: LimitEstimate

    def mode(self, m: int) -> ModeEvidence:
        for ev in self.modes:
            if ev.m == m:
                return ev
        raise KeyError(m)


def numeric_evidence(
    profile: MetricProfile,
    m_set=DEFAULT_M_SET,
    horizon: float = DEFAULT_HORIZON,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> EvidenceBundle:
    """Boundedness verdicts for phi_m and z, and the ratio decay slope.

    Verdicts follow the doubling-ladder rule; the mean-integral-ratio
    slope is fitted over the last decade of radii. Angular frequencies
    may be evaluated in parallel (WARPED_DISK_THREADS).
    """
    if not m_set:
        raise DomainError("m_set must be nonempty")
    horizon = profile.require_radius(horizon)
    ladder = _ladder(horizon)

    def one(m: int) -> ModeEvidence:
        mp = mode_pass(profile, m, horizon, rtol=rtol, atol=atol)
        lam = mp.lam(ladder)
        z = mp.z(ladder)
        phi_verdict, phi_rho, _ = _increment_verdict(lam)
        if m == 0:
            phi_verdict, phi_rho = BOUNDED, 0.0
        z_verdict, z_rho, _ = _increment_verdict(z)
        w = mp.inner_ratio(np.geomspace(ladder[0], horizon, 64))
        return ModeEvidence(
            m=int(m),
            phi_verdict=phi_verdict,
            z_verdict=z_verdict,
            phi_ratio=phi_rho,
            z_ratio=z_rho,
            lam_at_horizon=float(lam[-1]),
            z_at_horizon=float(z[-1]),
            inner_ratio_max=float(np.max(w)),
        )

    evidence = tuple(parallel_map(one, sorted(set(int(m) for m in m_set))))

    ratio_window = (horizon / 10.0, horizon)
    mp0 = mode_pass(profile, 0, horizon, rtol=rtol, atol=atol)
    radii = np.geomspace(ratio_window[0], ratio_window[1], 24)
    psi = mp0.inner_ratio(radii)
    slope = float(np.polyfit(np.log(radii), np.log(psi), 1)[0])

    limit = estimate_log_derivative_limit(profile, horizon)
    tail_r = np.geomspace(max(horizon / 100.0, 1.0), horizon, 48)
    v_tail = np.asarray(profile.dlog_phi(tail_r), dtype=float)
    lam_probe = np.asarray(profile.log_phi([horizon / 4.0, horizon]), dtype=float)
    phi_grows = bool(lam_probe[1] > lam_probe[0] + 1e-9) and bool(
        lam_probe[1] > math.log(10.0)
    )
    return EvidenceBundle(
        horizon=horizon,
        modes=evidence,
        ratio_slope=slope,
        ratio_window=ratio_window,
        phi_grows=phi_grows,
        phi_nondecreasing=bool(np.all(v_tail >= -1e-12)),
        log_derivative=limit,
    )


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationReport:
    harmonic_regime: str
    biharmonic_regime: str
    route: str                  # "declared_tail" | "numeric" | "both" | "none"
    horizon: float
    evidence: EvidenceBundle
    tail_fit: TailFit | None
    declared: TailDescriptor | None
    declared_verified: bool
    notes: tuple[str, ...] = field(default_factory=tuple)


def _normalize_subject(obj, horizon, step_control=(1e-10, 1e-12)):
    """Accept Surface, MetricProfile, or CurvatureProfile."""
    if isinstance(obj, Surface):
        return obj.metric, obj.curvature
    if isinstance(obj, MetricProfile):
        return obj, None
    if isinstance(obj, CurvatureProfile):
        metric = profile_from_curvature(obj, r_max=horizon * 1.05, step_control=step_control)
        return metric, obj
    raise DomainError(f"cannot classify a {type(obj).__name__}")


def _declared_labels(curv: CurvatureProfile, horizon, evidence) -> tuple[str, str, bool, list[str]]:
    """(harmonic, biharmonic, verified, notes) from a declared tail."""
    notes: list[str] = []
    tail = curv.tail
    if tail is None or tail.kind == "custom":
        return UNDETERMINED, UNDETERMINED, False, ["no machine-checkable tail declaration"]
    check = curv.verify_tail(horizon)
    if not check.ok:
        where = "" if check.first_violation is None else f" near r = {check.first_violation:.4g}"
        notes.append(f"declared tail failed sample verification{where}")
        return UNDETERMINED, UNDETERMINED, False, notes

    if tail.kind == "ge_milnor":
        if evidence.phi_grows:
            return PARABOLIC, RIGID, True, notes
        notes.append("K >= -1/(r^2 log r) verified but phi growth not observed")
        return UNDETERMINED, UNDETERMINED, True, notes
    if tail.kind == "le_log_threshold":
        # one-sided: harmonic regime settled, biharmonic branch needs the
        # lower quadratic bound too
        notes.append("upper tail bound only; biharmonic branch needs -eta r^2 <= K as well")
        return HYPERBOLIC, UNDETERMINED, True, notes
    if tail.kind == "between":
        if evidence.phi_nondecreasing:
            return HYPERBOLIC, LIOUVILLE_TO_HARMONIC, True, notes
        notes.append("two-sided bound verified but phi is not eventually nondecreasing")
        return HYPERBOLIC, UNDETERMINED, True, notes
    if tail.kind == "le_power":
        if evidence.phi_nondecreasing:
            return HYPERBOLIC, ADMITS_NONHARMONIC_BOUNDED, True, notes
        notes.append("power tail verified but phi is not eventually nondecreasing")
        return HYPERBOLIC, UNDETERMINED, True, notes
    return UNDETERMINED, UNDETERMINED, False, notes


def _numeric_labels(evidence: EvidenceBundle) -> tuple[str, str, list[str]]:
    """(harmonic, biharmonic, notes) from finite-horizon verdicts alone."""
    notes: list[str] = []
    nonzero = [ev for ev in evidence.modes if ev.m != 0]
    if not nonzero:
        return UNDETERMINED, UNDETERMINED, ["numeric route needs some m != 0"]
    phi_verdicts = {ev.phi_verdict for ev in nonzero}
    z_verdicts = {ev.z_verdict for ev in evidence.modes}
    if len(phi_verdicts) != 1 or UNDETERMINED in phi_verdicts:
        notes.append(f"phi_m verdicts disagree or are undetermined: {sorted(phi_verdicts)}")
        harmonic = UNDETERMINED
    else:
        harmonic = HYPERBOLIC if phi_verdicts == {BOUNDED} else PARABOLIC
    if len(z_verdicts) != 1 or UNDETERMINED in z_verdicts:
        notes.append(f"z verdicts disagree or are undetermined: {sorted(z_verdicts)}")
        return harmonic, UNDETERMINED, notes
    z_bounded = z_verdicts == {BOUNDED}
    if harmonic == UNDETERMINED:
        return harmonic, UNDETERMINED, notes
    if harmonic == HYPERBOLIC and z_bounded:
        return HYPERBOLIC, ADMITS_NONHARMONIC_BOUNDED, notes
    if harmonic == HYPERBOLIC and not z_bounded:
        return HYPERBOLIC, LIOUVILLE_TO_HARMONIC, notes
    if harmonic == PARABOLIC and not z_bounded:
        return PARABOLIC, RIGID, notes
    notes.append("phi_m unbounded with z bounded matches no covered regime")
    return PARABOLIC, UNDETERMINED, notes


def _fit_descriptor(fit: TailFit, curv_fn, horizon) -> TailDescriptor | None:
    """Turn a clean template fit into an inequality to verify on samples."""
    lo = fit.window[0]
    if fit.kind == "log_threshold":
        if fit.kappa >= 1.05:
            return TailDescriptor("le_log_threshold", r0=lo, eps=fit.kappa - 1.0)
        if fit.kappa <= 0.95:
            return TailDescriptor("ge_milnor", r0=lo)
        return None  # the gap at kappa ~ 1 stays undetermined
    if fit.kind == "power":
        if fit.exponent >= 2.05:
            return TailDescriptor("le_power", r0=lo, eps=fit.exponent - 2.0)
        # flat-to-quadratic growth: try the two-sided band with eta from samples
        radii = np.geomspace(lo, fit.window[1], 32)
        k = np.asarray(curv_fn(radii), dtype=float)
        eta = float(np.max(-k / radii**2)) * 1.05
        if eta <= 0.0:
            return None
        return TailDescriptor("between", r0=lo, eps=1.0, eta=eta)
    return None


def classify_surface(
    obj,
    horizon: float = DEFAULT_HORIZON,
    m_set=DEFAULT_M_SET,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> ClassificationReport:
    """Full two-route classification of a surface.

    Labels are only combined when the routes agree; a disagreement
    downgrades to undetermined and is recorded in the notes.
    """
    metric, curv = _normalize_subject(obj, horizon)
    horizon = metric.require_radius(horizon)
    evidence = numeric_evidence(metric, m_set=m_set, horizon=horizon, rtol=rtol, atol=atol)
    notes: list[str] = []

    declared = curv.tail if curv is not None else None
    declared_verified = False
    if curv is not None and declared is not None and declared.kind != "custom":
        h_dec, b_dec, declared_verified, dn = _declared_labels(curv, horizon, evidence)
        notes.extend(dn)
    else:
        h_dec = b_dec = UNDETERMINED

    tail_fit = None
    if not declared_verified:
        # no declaration to lean on: fit a template and verify the implied
        # inequality on samples before using it
        k_fn = curv.k if curv is not None else (
            lambda r: -np.asarray(metric.phi_second(r)) / np.asarray(metric.phi(r))
        )
        window = (max(horizon / 30.0, 2.0), horizon)
        try:
            tail_fit = fit_tail_exponent(k_fn, window)
        except DomainError:
            tail_fit = None
        if tail_fit is not None and tail_fit.kind in ("power", "log_threshold"):
            inferred = _fit_descriptor(tail_fit, k_fn, horizon)
            if inferred is not None:
                probe = CurvatureProfile(k=k_fn, tail=inferred, name="fit")
                h_fit, b_fit, ok, fn = _declared_labels(probe, horizon, evidence)
                if ok:
                    h_dec, b_dec = h_fit, b_fit
                    notes.append(
                        f"tail inferred by fit ({tail_fit.kind}, residual {tail_fit.residual:.3g}) "
                        "and verified on samples"
                    )
                notes.extend(fn)

    h_num, b_num, nn = _numeric_labels(evidence)
    notes.extend(nn)

    def combine(dec: str, num: str, what: str) -> tuple[str, str]:
        if dec != UNDETERMINED and num != UNDETERMINED:
            if dec == num:
                return dec, "both"
            notes.append(f"{what}: declared route says {dec}, numeric route says {num}")
            return UNDETERMINED, "conflict"
        if dec != UNDETERMINED:
            return dec, "declared_tail"
        if num != UNDETERMINED:
            return num, "numeric"
        return UNDETERMINED, "none"

    harmonic, route_h = combine(h_dec, h_num, "harmonic")
    biharmonic, route_b = combine(b_dec, b_num, "biharmonic")
    if "conflict" in (route_h, route_b):
        route = "conflict"
    else:
        declared_used = any(r in ("both", "declared_tail") for r in (route_h, route_b))
        numeric_used = any(r in ("both", "numeric") for r in (route_h, route_b))
        if declared_used and numeric_used:
            route = "both"
        elif declared_used:
            route = "declared_tail"
        elif numeric_used:
            route = "numeric"
        else:
            route = "none"

    return ClassificationReport(
        harmonic_regime=harmonic,
        biharmonic_regime=biharmonic,
        route=route,
        horizon=horizon,
        evidence=evidence,
        tail_fit=tail_fit,
        declared=declared,
        declared_verified=declared_verified,
        notes=tuple(notes),
    )


def classify_harmonic(obj, horizon: float = DEFAULT_HORIZON, m_set=(1, 2, 3)) -> str:
    """Harmonic regime label: parabolic, hyperbolic, or undetermined."""
    return classify_surface(obj, horizon=horizon, m_set=m_set).harmonic_regime


def classify_biharmonic(obj, horizon: float = DEFAULT_HORIZON, m_set=(1, 2, 3)) -> str:
    """Biharmonic regime label per the covered curvature bands."""
    return classify_surface(obj, horizon=horizon, m_set=m_set).biharmonic_regime


# ----------------------------------------------------------------------
# report export
# ----------------------------------------------------------------------

def export_report(report: ClassificationReport, txt_path, csv_path) -> None:
    """Write the key-value report and the per-m evidence CSV."""
    lines = [
        f"harmonic_regime = {report.harmonic_regime}",
        f"biharmonic_regime = {report.biharmonic_regime}",
        f"route = {report.route}",
        f"horizon = {fmt17(report.horizon)}",
        f"log_derivative_last = {fmt17(report.evidence.log_derivative.last)}",
        f"log_derivative_extrapolated = {fmt17(report.evidence.log_derivative.extrapolated)}",
        f"log_derivative_trend = {report.evidence.log_derivative.trend}",
        f"ratio_slope = {fmt17(report.evidence.ratio_slope)}",
        f"phi_grows = {report.evidence.phi_grows}",
        f"phi_nondecreasing = {report.evidence.phi_nondecreasing}",
        f"declared_tail = {report.declared.kind if report.declared else 'none'}",
        f"declared_verified = {report.declared_verified}",
    ]
    if report.tail_fit is not None:
        lines.append(f"tail_fit_kind = {report.tail_fit.kind}")
        if report.tail_fit.exponent is not None:
            lines.append(f"tail_fit_exponent = {fmt17(report.tail_fit.exponent)}")
        if report.tail_fit.kappa is not None:
            lines.append(f"tail_fit_kappa = {fmt17(report.tail_fit.kappa)}")
        lines.append(f"tail_fit_residual = {fmt17(report.tail_fit.residual)}")
    for note in report.notes:
        lines.append(f"note = {note}")
    with open(txt_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    rows = [
        (ev.m, ev.phi_verdict, ev.z_verdict, float(report.evidence.ratio_slope))
        for ev in report.evidence.modes
    ]
    write_csv(csv_path, ["m", "phi_m_verdict", "z_verdict", "ratio_slope"], rows)
