"""Packet probes, the limit ODE, and the long-time profile."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shortpulse.errors import InsufficientData, OutOfBox, UnderResolved
from shortpulse.packets import (
    DEFAULT_VELOCITIES,
    PacketParams,
    ProbeRecord,
    asymptotic_profile,
    attach_residuals,
    extract_w,
    field_at,
    gamma,
    nearest_scale,
    ode_residual_series,
    packet,
    phase,
    phase_drift_fit,
    probe_snapshot,
    profile_remainder_series,
    prop42_errors,
    spectrum_concentration,
    w_stability_series,
)
from shortpulse.spectral import Field, Grid, free_propagate, linf_norm
from conftest import PlainSnap, gaussian_pulse

gamma_phase_tol = 1e-12        # measured 3.6e-13 on the n=2^15 box
gamma_linearity_tol = 1e-12    # measured 2.1e-16
ode_residual_tol = 1e-6        # measured 7.0e-8 (pure finite-difference error)
phase_fit_tol = 1e-12          # measured 4.4e-15
w_stability_tol = 1e-15        # measured 1.5e-17
freeflow_drift_ceiling = 0.05  # measured 0.012 per decade

# packet spectral-mass leak outside the matched band, frozen at t=25/100/200
concentration_frozen = (0.4048, 0.1418, 0.0729)

# masked-carrier ray errors at t=16/36/64, frozen
synthetic_ray_errors_u = (0.028020029334892918, 0.0071479489249517414,
                          0.0015155732784390141)


def limit_ode_gamma(ts, g0, v):
    """Exact solution of gamma' = 3i |v|^{-1/2} |gamma|^2 gamma / t."""
    ts = np.asarray(ts, dtype=np.float64)
    rate = 3.0 * np.abs(v) ** -0.5 * abs(g0) ** 2
    return g0 * np.exp(1j * rate * np.log(ts))


def test_ray_phase_closed_values():
    assert phase(1.0, -1.0) == pytest.approx(-2.0, abs=1e-15)
    assert phase(4.0, -4.0) == pytest.approx(-8.0, abs=1e-15)
    assert phase(7.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        phase(0.0, -1.0)


@pytest.mark.parametrize("xi,delta,expected", [
    (1.0, 1.0, 1.0),
    (1.4, 1.0, 1.0),
    (0.6, 0.5, 2.0 ** -0.5),
])
def test_nearest_scale_rounds_on_the_log_lattice(xi, delta, expected):
    assert nearest_scale(xi, delta) == pytest.approx(expected, rel=1e-12)


def test_packet_center_value_and_support():
    g = Grid(1 << 13, 800.0)
    params = PacketParams()
    t, v = 25.0, -1.0
    psi = packet(t, v, params, g)
    center = int(np.argmin(np.abs(g.x - v * t)))
    expected = np.abs(v) ** -0.75 * params.chi(np.array([0.0]))[0]
    assert abs(psi.values[center]) == pytest.approx(expected, rel=1e-6)
    width = np.sqrt(t) * np.abs(v) ** 0.75
    outside = np.abs(g.x - v * t) > params.half_width * width
    assert np.max(np.abs(psi.values[outside])) == 0.0


def test_packet_rejects_bad_arguments():
    g = Grid(1 << 13, 800.0)
    params = PacketParams()
    with pytest.raises(ValueError):
        packet(0.5, -1.0, params, g)
    with pytest.raises(ValueError):
        packet(4.0, 1.0, params, g)
    coarse = Grid(1 << 7, 800.0)
    with pytest.raises(UnderResolved):
        packet(4.0, -1.0, params, coarse)
    with pytest.raises(OutOfBox):
        packet(500.0, -1.0, params, g)


def test_probe_amplitude_of_the_pure_carrier_is_sqrt_t():
    g = Grid(1 << 15, 800.0)
    t = 25.0
    snap = PlainSnap(t, Field(g, np.exp(1j * phase(t, g.x)), real=False))
    gm = gamma(snap, -1.0, PacketParams())
    assert abs(gm - np.sqrt(t)) / np.sqrt(t) < gamma_phase_tol


def test_probe_amplitude_is_linear():
    g = Grid(1 << 15, 800.0)
    t, v = 25.0, -1.0
    params = PacketParams()
    u1 = Field(g, np.exp(1j * phase(t, g.x))
               * np.exp(-((g.x + 25.0) / 10.0) ** 2), real=False)
    u2 = Field(g, np.cos(g.x) * np.exp(-((g.x + 30.0) / 15.0) ** 2))
    g1 = gamma(PlainSnap(t, u1), v, params)
    g2 = gamma(PlainSnap(t, u2), v, params)
    combo = Field(g, 2.0 * u1.values + 3.0 * u2.values, real=False)
    g12 = gamma(PlainSnap(t, combo), v, params)
    assert abs(g12 - (2.0 * g1 + 3.0 * g2)) / abs(g12) < gamma_linearity_tol


def test_probe_amplitude_of_zero_is_zero():
    g = Grid(1 << 13, 800.0)
    snap = PlainSnap(4.0, Field(g, np.zeros(g.n)))
    assert gamma(snap, -1.0, PacketParams()) == 0.0


def test_probe_amplitude_obeys_the_sup_bound():
    # |gamma| <= sqrt(t) ||u||_inf since the packet modulus integrates to
    # sqrt(t) by the unit-integral normalization of chi
    g = Grid(1 << 15, 800.0)
    t = 25.0
    u = Field(g, 0.1 * np.exp(1j * phase(t, g.x)).real
              * np.exp(-((g.x + 25.0) / 30.0) ** 2))
    gm = gamma(PlainSnap(t, u), -1.0, PacketParams())
    assert abs(gm) <= np.sqrt(t) * linf_norm(u) * (1.0 + 1e-9)


def test_manufactured_amplitude_solves_the_limit_ode():
    v = -1.0
    ts = 20.0 * 2.0 ** (np.arange(28) / 8.0)
    gams = limit_ode_gamma(ts, 0.05 * np.exp(0.3j), v)
    t_mid, res = ode_residual_series(ts, gams, v)
    # the model term is exact here, so the residual is pure FD error
    rate_scale = np.abs(gams[1:-1]) * 3.0 * abs(0.05) ** 2 / t_mid
    assert np.max(np.abs(res) / rate_scale) < ode_residual_tol


def test_residual_series_needs_three_increasing_times():
    with pytest.raises(InsufficientData):
        ode_residual_series([1.0, 2.0], [1.0, 1.0], -1.0)
    with pytest.raises(ValueError):
        ode_residual_series([1.0, 2.0, 2.0], [1.0, 1.0, 1.0], -1.0)


def test_phase_drift_fit_recovers_the_model_rate():
    v = -1.0
    ts = 20.0 * 2.0 ** (np.arange(28) / 8.0)
    gams = limit_ode_gamma(ts, 0.05 * np.exp(0.3j), v)
    slope, target, relerr = phase_drift_fit(ts, gams, v)
    assert relerr < phase_fit_tol
    assert slope == pytest.approx(3.0 * 0.05 ** 2, rel=1e-9)


def test_phase_drift_fit_needs_eight_samples():
    ts = 20.0 * 2.0 ** (np.arange(6) / 8.0)
    gams = limit_ode_gamma(ts, 0.05, -1.0)
    with pytest.raises(InsufficientData):
        phase_drift_fit(ts, gams, -1.0)


def test_corrected_state_is_steady_when_the_ode_holds():
    v = -1.0
    ts = 20.0 * 2.0 ** (np.arange(17) / 8.0)
    gams = limit_ode_gamma(ts, 0.05 * np.exp(0.3j), v)
    records = [ProbeRecord(t=float(t), v=v, gamma=gm,
                           w=extract_w(float(t), v, gm), in_window=True)
               for t, gm in zip(ts, gams)]
    out_t, sups = w_stability_series(records)
    assert len(out_t) > 0
    assert np.max(sups) < w_stability_tol


def test_corrected_state_at_unit_time_is_the_amplitude():
    gm = 0.3 + 0.4j
    assert extract_w(1.0, -1.0, gm) == gm


@settings(max_examples=40, deadline=None)
@given(re=st.floats(-2.0, 2.0), im=st.floats(-2.0, 2.0),
       t=st.floats(1.0, 1e6), v=st.floats(-4.0, -0.25))
def test_phase_correction_preserves_the_modulus(re, im, t, v):
    gm = complex(re, im)
    assert abs(abs(extract_w(t, v, gm)) - abs(gm)) <= 1e-12 * max(abs(gm), 1.0)


def test_velocity_window_boundaries():
    params = PacketParams()
    assert params.in_window(100.0, -1.0)
    assert not params.in_window(100.0, -3.0)
    root2 = 2.0 ** 0.5
    assert not params.in_window(5792.0, -root2)
    assert params.in_window(5793.0, -root2)


def test_window_exponent_respects_the_regularity_ceiling():
    assert PacketParams().validate_alpha(4.5) > 0.04
    with pytest.raises(ValueError):
        PacketParams(alpha=0.05).validate_alpha(4.5)


def test_default_velocity_ladder():
    assert len(DEFAULT_VELOCITIES) == 17
    assert DEFAULT_VELOCITIES[0] == pytest.approx(-0.25)
    assert DEFAULT_VELOCITIES[-1] == pytest.approx(-4.0)
    assert -1.0 in DEFAULT_VELOCITIES
    rec = ProbeRecord(t=4.0, v=-4.0)
    assert rec.xi_v == pytest.approx(0.5)


def test_probing_skips_rays_that_leave_the_box(mini_probe_records):
    first = {r.v for r in mini_probe_records if abs(r.t - 1.0) < 1e-9}
    last = {r.v for r in mini_probe_records if abs(r.t - 64.0) < 1e-9}
    assert len(first) == len(DEFAULT_VELOCITIES)
    assert len(last) == 12       # fast rays reach the L=256 box edge
    assert -1.0 in last and -4.0 not in last


def test_probe_records_carry_consistent_corrected_states(mini_probe_records):
    worst = max(abs(abs(r.w) - abs(r.gamma)) for r in mini_probe_records)
    assert worst < 1e-15


def test_residual_attachment_fills_only_the_interior(mini_probe_records):
    series = attach_residuals(list(mini_probe_records), -1.0)
    assert series[0].ode_residual is None
    assert series[-1].ode_residual is None
    assert all(r.ode_residual is not None for r in series[1:-1])
    with pytest.raises(InsufficientData):
        attach_residuals(series[:2], -1.0)


def test_packet_spectrum_concentrates_as_time_grows(cutoff):
    g = Grid(1 << 13, 800.0)
    params = PacketParams()
    leaks = [spectrum_concentration(t, -1.0, params, g, cutoff)
             for t in (25.0, 100.0, 200.0)]
    for got, frozen in zip(leaks, concentration_frozen):
        assert got == pytest.approx(frozen, abs=2e-2)
    assert leaks[0] > leaks[1] > leaks[2]
    assert leaks[2] < 0.1


def test_profile_vanishes_right_of_the_origin_and_for_zero_state():
    x = np.linspace(-100.0, 100.0, 201)
    vals, flagged = asymptotic_profile(25.0, x, [-2.0, -1.0, -0.5],
                                       [0.1 + 0.1j, 0.2j, 0.1])
    assert np.all(vals[x >= 0.0] == 0.0)
    assert not np.any(flagged[x >= 0.0])
    zeros, _ = asymptotic_profile(25.0, x, [-1.0], [0.0])
    assert np.all(zeros == 0.0)


def test_profile_flags_rays_outside_the_probed_fan():
    t = 10.0
    x = np.array([-40.0, -10.0, -1.0])
    vals, flagged = asymptotic_profile(t, x, [-2.0, -0.5], [0.1, 0.1])
    assert flagged.tolist() == [True, False, True]
    assert np.all(np.isfinite(vals))


def test_profile_rejects_bad_tables():
    with pytest.raises(ValueError):
        asymptotic_profile(0.5, [-1.0], [-1.0], [0.1])
    with pytest.raises(ValueError):
        asymptotic_profile(4.0, [-1.0], [-1.0, -0.5], [0.1])
    with pytest.raises(ValueError):
        asymptotic_profile(4.0, [-1.0], [], [])


def test_remainder_series_reads_the_stored_ray_errors():
    recs = [
        ProbeRecord(t=4.0, v=-1.0, approx_err_u=0.03, in_window=True),
        ProbeRecord(t=4.0, v=-2.0, approx_err_u=0.05, in_window=True),
        ProbeRecord(t=4.0, v=-4.0, approx_err_u=9.0, in_window=False),
        ProbeRecord(t=9.0, v=-1.0, approx_err_u=0.02, in_window=True),
    ]
    ts, sups = profile_remainder_series(recs)
    assert ts.tolist() == [4.0, 9.0]
    assert sups[0] == pytest.approx(0.05 * 2.0)  # out-of-window ray ignored
    assert sups[1] == pytest.approx(0.02 * 3.0)


def test_band_limited_interpolation_is_exact_on_modes():
    g = Grid(1 << 10, 64.0)
    k = 6.0 * (2.0 * np.pi / g.length)
    u = Field(g, np.cos(k * g.x + 0.7))
    pts = np.array([-20.3, -5.17, 0.0, 3.33])
    got = field_at(u, pts)
    assert np.max(np.abs(got - np.cos(k * pts + 0.7))) < 1e-12
    assert field_at(u, g.x[37])[0] == pytest.approx(u.values[37], rel=1e-12)


def test_masked_carrier_ray_errors_shrink_with_time(cutoff):
    g = Grid(1 << 13, 800.0)
    params = PacketParams()
    c0 = 0.3 + 0.1j
    errs_u, errs_ux = [], []
    for t in (16.0, 36.0, 64.0):
        mask = cutoff.sigma_range(np.abs(g.x), t / 3.0, 200.0) * (g.x < 0.0)
        vals = 2.0 * t ** -0.5 * (np.exp(1j * phase(t, g.x)) * c0).real * mask
        snap = PlainSnap(t, Field(g, vals))
        gm = gamma(snap, -1.0, params)
        eu, eux = prop42_errors(snap, -1.0, gm)
        errs_u.append(eu)
        errs_ux.append(eux)
    for got, frozen in zip(errs_u, synthetic_ray_errors_u):
        assert got == pytest.approx(frozen, rel=1e-4)
    assert errs_u[0] > errs_u[1] > errs_u[2]
    assert errs_ux[0] > errs_ux[1] > errs_ux[2]


def test_free_flow_amplitude_modulus_is_steady():
    g = Grid(1 << 16, 4800.0)
    u0 = Field(g, 0.05 * np.cos(g.x) * np.exp(-(g.x / 12.0) ** 2))
    params = PacketParams()
    ts = 100.0 * 2.0 ** (np.arange(28) / 8.0)
    mods = [abs(gamma(PlainSnap(t, free_propagate(u0, t)), -1.0, params))
            for t in ts]
    drift = abs(np.log(mods[-1] / mods[0])) / np.log10(ts[-1] / ts[0])
    assert drift < freeflow_drift_ceiling
