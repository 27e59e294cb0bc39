"""Wave-packet probes of the long-time behavior along rays x = v t.

The solution is paired against a localized oscillating packet

    Psi_v(t,x) = |v|^{-3/4} chi((x - v t) / (sqrt(t) |v|^{3/4})) e^{i phi(t,x)},
    phi(t,x)   = -2 sqrt(t |x|),

whose carrier matches the ray's stationary frequency xi_v = |v|^{-1/2}.
The resulting amplitude gamma(t,v) = integral u conj(Psi_v) dx obeys, to
leading order, the modulation law

    d/dt gamma = 3 i t^{-1} |v|^{-1/2} |gamma|^2 gamma,

so the phase-corrected extraction

    W(t,v) = gamma exp(-3 i |v|^{-1/2} |gamma|^2 log t)

stabilizes for large t.  Everything here is a pure function of stored
snapshots; fits over probe tables live with the callers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad

from .bands import bump, project_plus_range
from .errors import InsufficientData, OutOfBox, UnderResolved
from .spectral import SQRT2PI, Field, forward_transform, l2_norm

DEFAULT_VELOCITIES = tuple(-(2.0 ** (k / 4.0)) for k in range(-8, 9))


def _alpha_ceiling(s):
    """Largest admissible window exponent for regularity s."""
    return min(2.0 / 45.0, 2.0 / (2.0 * s + 1.0),
               2.0 * (s - 4.0) / (3.0 * (s + 1.0)))


@dataclass(frozen=True)
class PacketParams:
    """Probe configuration: packet shape, velocity set, cadence, window."""

    delta_p: float = 1.0
    alpha: float = 0.04
    velocities: tuple = DEFAULT_VELOCITIES
    cadence_ratio: float = 2.0 ** 0.125
    band_delta: float = 1.0   # cutoff sharpness for spectrum diagnostics

    def __post_init__(self):
        if not self.delta_p > 0.0:
            raise ValueError(f"delta_p must be positive, got {self.delta_p}")
        if not self.alpha > 0.0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.cadence_ratio > 1.0:
            raise ValueError(
                f"cadence_ratio must exceed 1, got {self.cadence_ratio}")
        if any(v >= 0.0 for v in self.velocities):
            raise ValueError("all probe velocities must be negative")

    @property
    def half_width(self):
        """Support half-width a = 1 - 2^{-delta_p} of the bump chi."""
        return 1.0 - 2.0 ** (-self.delta_p)

    def validate_alpha(self, s):
        """Check alpha against the admissible ceiling for regularity s."""
        ceiling = _alpha_ceiling(s)
        if not self.alpha < ceiling:
            raise ValueError(
                f"alpha = {self.alpha} must be below "
                f"min(2/45, 2/(2s+1), 2(s-4)/(3(s+1))) = {ceiling:.6g} "
                f"for s = {s}")
        return ceiling

    def in_window(self, t, v):
        """Velocity window: t^-alpha <= -v <= t^alpha."""
        return bool(t ** -self.alpha <= -v <= t ** self.alpha)

    def chi(self, y):
        """The unit-integral bump: supp chi = [-a, a], integral chi = 1."""
        return bump(y, self.half_width) / _bump_integral(self.half_width)


@lru_cache(maxsize=8)
def _bump_integral(half_width):
    val, err = quad(lambda y: bump(y, half_width), -half_width, half_width,
                    epsabs=1e-14, epsrel=1e-14)
    if not val > 0.0:
        raise ValueError(f"degenerate bump normalization: {val}")
    return val


@dataclass
class ProbeRecord:
    """One (t, v) probe: amplitude, corrected state, residual, ray errors."""

    t: float
    v: float
    xi_v: float = field(init=False)
    n_v: float = 0.0
    gamma: complex = 0.0
    w: complex = 0.0
    ode_residual: complex = None
    approx_err_u: float = 0.0
    approx_err_ux: float = 0.0
    in_window: bool = False

    def __post_init__(self):
        self.xi_v = abs(self.v) ** -0.5


def phase(t, x):
    """The ray phase phi(t,x) = -2 sqrt(t |x|)."""
    if not t > 0.0:
        raise ValueError(f"phase needs t > 0, got {t}")
    return -2.0 * np.sqrt(t * np.abs(x))


def nearest_scale(xi, delta=1.0):
    """Nearest scaled dyadic 2^{delta m} to xi (in log distance)."""
    if not xi > 0.0:
        raise ValueError(f"need xi > 0, got {xi}")
    return 2.0 ** (delta * round(np.log2(xi) / delta))


def packet(t, v, params, grid):
    """Sample Psi_v(t, .) on the grid.

    Raises UnderResolved when dx is too coarse for the carrier
    (dx <= pi sqrt|v| / 4 required: >= 8 points per wavelength) and
    OutOfBox when the chi support leaves the box interior.
    """
    if not t >= 1.0:
        raise ValueError(f"packet needs t >= 1, got {t}")
    if not v < 0.0:
        raise ValueError(f"packet needs v < 0, got {v}")
    width = np.sqrt(t) * np.abs(v) ** 0.75
    if grid.dx > np.pi * np.sqrt(np.abs(v)) / 4.0:
        raise UnderResolved(
            f"dx = {grid.dx:.4g} exceeds pi sqrt|v|/4 = "
            f"{np.pi * np.sqrt(np.abs(v)) / 4.0:.4g} at v = {v}")
    a = params.half_width
    left, right = v * t - a * width, v * t + a * width
    half = grid.length / 2.0
    if left <= -half or right >= half:
        raise OutOfBox(
            f"packet support [{left:.4g}, {right:.4g}] leaves the box "
            f"[{-half:.4g}, {half:.4g}] at t = {t}, v = {v}")
    vals = np.abs(v) ** -0.75 * params.chi((grid.x - v * t) / width) \
        * np.exp(1j * phase(t, grid.x))
    return Field(grid, vals, real=False)


def gamma(snap, v, params):
    """The probe amplitude gamma(t,v) by rectangle-rule quadrature."""
    psi = packet(snap.t, v, params, snap.u.grid)
    return complex(snap.u.grid.dx * np.sum(
        np.asarray(snap.u.values) * np.conj(psi.values)))


def extract_w(t, v, gam):
    """Phase-corrected final state W = gamma e^{-3i |v|^{-1/2} |gamma|^2 log t}."""
    return gam * np.exp(-3j * np.abs(v) ** -0.5 * abs(gam) ** 2 * np.log(t))


def ode_residual_series(ts, gammas, v):
    """Residuals r(t) = gamma_dot - 3i t^{-1} |v|^{-1/2} |gamma|^2 gamma.

    gamma_dot is a centered difference in log t (exact second order on
    geometric cadences; the non-uniform three-point weights keep it
    consistent on irregular spacings).  Returns (interior ts, residuals).
    """
    ts = np.asarray(ts, dtype=np.float64)
    gam = np.asarray(gammas, dtype=np.complex128)
    if ts.size < 3:
        raise InsufficientData(
            f"need >= 3 probe times for gamma_dot, got {ts.size}")
    if np.any(np.diff(ts) <= 0.0):
        raise ValueError("probe times must be strictly increasing")
    tau = np.log(ts)
    hp = tau[2:] - tau[1:-1]
    hm = tau[1:-1] - tau[:-2]
    dgam_dtau = (hm / (hp * (hp + hm))) * gam[2:] \
        + ((hp - hm) / (hp * hm)) * gam[1:-1] \
        - (hp / (hm * (hp + hm))) * gam[:-2]
    t_mid = ts[1:-1]
    g_mid = gam[1:-1]
    gdot = dgam_dtau / t_mid
    model = 3j * np.abs(v) ** -0.5 * np.abs(g_mid) ** 2 * g_mid / t_mid
    return t_mid, gdot - model


def field_at(u, points):
    """Band-limited (trigonometric) interpolation of u at arbitrary points."""
    fh = forward_transform(u)
    points = np.atleast_1d(np.asarray(points, dtype=np.float64))
    waves = np.exp(1j * np.outer(points, u.grid.xi))
    vals = waves @ fh.coeffs * (u.grid.dxi / SQRT2PI)
    return vals.real if u.real else vals


def prop42_errors(snap, v, gam):
    """Ray errors of the packet approximation at x = v t.

    Returns |u(t,vt) - 2 t^{-1/2} Re(e^{i phi} gamma)| and the u_x
    analogue |u_x(t,vt) - 2 t^{-1/2} |v|^{-1/2} Re(i e^{i phi} gamma)|.
    """
    t = snap.t
    x_ray = v * t
    carrier = np.exp(1j * phase(t, x_ray))
    u_ray = float(field_at(snap.u, x_ray)[0])
    ux_ray = float(field_at(snap.u_x, x_ray)[0])
    err_u = abs(u_ray - 2.0 * t ** -0.5 * (carrier * gam).real)
    err_ux = abs(ux_ray - 2.0 * t ** -0.5 * np.abs(v) ** -0.5
                 * (1j * carrier * gam).real)
    return err_u, err_ux


def probe_snapshot(snap, params):
    """Probe one snapshot at every configured velocity.

    Velocities whose packet does not fit the box or the resolution are
    skipped (the probe set is ray-dependent by design).  Residuals are
    filled in later by :func:`attach_residuals` once neighbors exist.
    """
    records = []
    for v in params.velocities:
        try:
            gam = gamma(snap, v, params)
        except (OutOfBox, UnderResolved):
            continue
        err_u, err_ux = prop42_errors(snap, v, gam)
        records.append(ProbeRecord(
            t=float(snap.t), v=float(v),
            n_v=nearest_scale(abs(v) ** -0.5, params.band_delta),
            gamma=gam, w=extract_w(snap.t, v, gam),
            approx_err_u=err_u, approx_err_ux=err_ux,
            in_window=params.in_window(snap.t, v)))
    return records


def attach_residuals(records, v):
    """Fill ode_residual on the interior records of one velocity's series."""
    series = sorted((r for r in records if r.v == v), key=lambda r: r.t)
    if len(series) < 3:
        raise InsufficientData(
            f"need >= 3 probe times at v = {v}, got {len(series)}")
    ts = [r.t for r in series]
    gams = [r.gamma for r in series]
    t_mid, res = ode_residual_series(ts, gams, v)
    for rec, r in zip(series[1:-1], res):
        rec.ode_residual = complex(r)
    return series


def spectrum_concentration(t, v, params, grid, spec):
    """Fraction of Psi_v's L2 mass outside the band around N_v.

    Measures ||(1 - P^+_{N/2^d <= . <= 2^d N}) Psi_v|| / ||Psi_v|| with
    N the nearest scaled dyadic to xi_v.
    """
    psi = packet(t, v, params, grid)
    n_v = nearest_scale(abs(v) ** -0.5, spec.delta)
    kept = project_plus_range(psi, n_v * 2.0 ** -spec.delta,
                              n_v * 2.0 ** spec.delta, spec)
    leak = Field(grid, psi.values - kept.values, real=False)
    total = l2_norm(psi)
    if total == 0.0:
        return 0.0
    return l2_norm(leak) / total


def asymptotic_profile(t, x, v_probed, w_values):
    """The displayed main term of the long-time profile.

    Evaluates (2/sqrt t) 1_{x<0} Re{ W(x/t) exp(i phi(t,x)
    + 3i sqrt(t/|x|) |W(x/t)|^2 log t) } with W(x/t) linearly
    interpolated over the probed velocities.  Returns (values,
    extrapolated mask); the profile is not extended outside the probed
    range (values there are computed from the clamped endpoint but
    flagged).
    """
    if not t >= 1.0:
        raise ValueError(f"profile needs t >= 1, got {t}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    v_probed = np.asarray(v_probed, dtype=np.float64)
    w_values = np.asarray(w_values, dtype=np.complex128)
    if v_probed.size != w_values.size or v_probed.size == 0:
        raise ValueError("need matching, nonempty v and W tables")
    order = np.argsort(v_probed)
    v_sorted, w_sorted = v_probed[order], w_values[order]
    v_ray = x / t
    w_ray = np.interp(v_ray, v_sorted, w_sorted.real) \
        + 1j * np.interp(v_ray, v_sorted, w_sorted.imag)
    extrapolated = (v_ray < v_sorted[0]) | (v_ray > v_sorted[-1])
    vals = np.zeros_like(x)
    neg = x < 0.0
    if np.any(neg):
        xn = x[neg]
        wn = w_ray[neg]
        arg = phase(t, xn) + 3.0 * np.sqrt(t / np.abs(xn)) \
            * np.abs(wn) ** 2 * np.log(t)
        vals[neg] = 2.0 / np.sqrt(t) * (wn * np.exp(1j * arg)).real
    extrapolated = extrapolated & neg
    return vals, extrapolated


def phase_drift_fit(ts, gammas, v, window=None):
    """Fitted d(arg gamma)/d(log t) against the model 3 |v|^{-1/2} |gamma|^2.

    Returns (slope, target, relative error).  The target uses the median
    |gamma|^2 over the fit window since the modulus is near-constant.
    """
    ts = np.asarray(ts, dtype=np.float64)
    gam = np.asarray(gammas, dtype=np.complex128)
    if window is not None:
        keep = (ts >= window[0]) & (ts <= window[1])
        ts, gam = ts[keep], gam[keep]
    if ts.size < 8:
        raise InsufficientData(
            f"need >= 8 samples for the phase fit, got {ts.size}")
    tau = np.log(ts)
    theta = np.unwrap(np.angle(gam))
    slope = np.polyfit(tau, theta, 1)[0]
    target = 3.0 * np.abs(v) ** -0.5 * float(np.median(np.abs(gam) ** 2))
    if target == 0.0:
        return float(slope), 0.0, np.inf
    return float(slope), target, abs(slope - target) / target


def w_stability_series(records, doubling_ratio=2.0, tol=1e-9):
    """Sup over in-window velocities of |W(t,v) - W(2t,v)|, per t.

    Only velocities in-window at both t and 2t contribute; times whose
    double is not probed are skipped.  Returns (ts, sups).
    """
    by_time = {}
    for rec in records:
        by_time.setdefault(rec.t, {})[rec.v] = rec
    times = sorted(by_time)
    out_t, out_s = [], []
    for t in times:
        t2 = next((s for s in times
                   if abs(s - doubling_ratio * t) <= tol * s), None)
        if t2 is None:
            continue
        diffs = [abs(by_time[t][v].w - by_time[t2][v].w)
                 for v in by_time[t]
                 if v in by_time[t2]
                 and by_time[t][v].in_window and by_time[t2][v].in_window]
        if diffs:
            out_t.append(t)
            out_s.append(max(diffs))
    return np.asarray(out_t), np.asarray(out_s)


def profile_remainder_series(records):
    """Sup over in-window rays of |u(t,vt) - profile(t,vt)| sqrt(t), per t.

    At probed rays the displayed profile collapses to
    2 t^{-1/2} Re(e^{i phi} gamma) (the W phase correction cancels by
    construction), so the remainder is the stored ray error.
    """
    by_time = {}
    for rec in records:
        if rec.in_window:
            by_time.setdefault(rec.t, []).append(rec.approx_err_u)
    ts = sorted(by_time)
    return (np.asarray(ts),
            np.asarray([max(by_time[t]) for t in ts]) * np.sqrt(ts))
