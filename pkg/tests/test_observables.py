import math

import numpy as np
import pytest

from decolab import (DecoherenceCoefficient, DegenerateStateError,
                     DensityGrid, DomainError, EvolutionConfig,
                     PhysicalParams, Probe, RunTooShortError, SpatialGrid,
                     Trajectory, cat_state, coherence_peak, evolve,
                     fit_exponential_rate, gaussian_packet,
                     incoherent_mixture, measure_timescales,
                     momentum_expectation, position_distribution,
                     position_moments, pure_decoherence_exact, pure_density,
                     purity, thermal_de_broglie)

NATURAL = dict(hbar=1.0, boltzmann=1.0)


@pytest.fixture
def grid():
    return SpatialGrid(n_points=256, extent=64.0)


def params_with(gamma):
    return PhysicalParams(mass=1.0, gamma=gamma, temperature=0.25, **NATURAL)


# -- Trajectory -----------------------------------------------------------------

def test_trajectory_validation():
    with pytest.raises(Exception):
        Trajectory(times=np.array([0.0, 0.0, 1.0]),
                   series={"a": np.zeros(3)})
    with pytest.raises(Exception):
        Trajectory(times=np.array([0.0, 1.0]), series={"a": np.zeros(3)})
    traj = Trajectory(times=np.array([0.0, 1.0]),
                      series={"a": np.array([1.0, 2.0])})
    with pytest.raises(DomainError):
        traj.column("missing")


def test_trajectory_csv(tmp_path):
    traj = Trajectory(times=np.array([0.0, 0.5]),
                      series={"b": np.array([1.0, 2.0]),
                              "a": np.array([3.0, 4.0])})
    path = tmp_path / "traj.csv"
    traj.to_csv(path, header_comment="hello")
    lines = path.read_text().splitlines()
    assert lines[0] == "# hello"
    assert lines[1] == "time_s,a,b"
    assert lines[2].split(",")[1] == f"{3.0:.16e}"


# -- coherence_peak --------------------------------------------------------------

def test_coherence_fresh_cat_is_one(grid):
    rho = pure_density(cat_state(grid, delta_x=8.0, halfwidth=1.0))
    assert coherence_peak(rho, 8.0) == pytest.approx(1.0, abs=1e-6)


def test_coherence_oracle_half_life(grid):
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    dx = 8.0
    rho = pure_density(cat_state(grid, delta_x=dx, halfwidth=1.0))
    t_half = math.log(2.0) / (coeff.d_value * dx ** 2)
    rho_t = pure_decoherence_exact(rho, coeff, t_half)
    assert coherence_peak(rho_t, dx) == pytest.approx(0.5, abs=1e-3)


def test_coherence_zero_for_branch_mixture(grid):
    mixture = 0.5 * pure_density(
        gaussian_packet(grid, center=4.0, halfwidth=1.0)).values \
        + 0.5 * pure_density(
            gaussian_packet(grid, center=-4.0, halfwidth=1.0)).values
    rho = DensityGrid(grid, mixture)
    assert coherence_peak(rho, 8.0) <= 1e-6


def test_coherence_global_phase_invariant(grid):
    psi = cat_state(grid, delta_x=8.0, halfwidth=1.0)
    rho1 = pure_density(psi)
    psi.amplitudes = psi.amplitudes * np.exp(1.3j)
    rho2 = pure_density(psi)
    assert coherence_peak(rho1, 8.0) == coherence_peak(rho2, 8.0)


def test_coherence_grid_refinement(grid):
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    dx = 8.0
    t = 1.0 / (coeff.d_value * dx ** 2)
    fine = SpatialGrid(n_points=512, extent=64.0)
    values = []
    for g in (grid, fine):
        rho = pure_decoherence_exact(
            pure_density(cat_state(g, delta_x=dx, halfwidth=1.0)), coeff, t)
        values.append(coherence_peak(rho, dx))
    assert values[0] == pytest.approx(values[1], abs=1e-3)


def test_coherence_degenerate_error(grid):
    # narrow branches leave true float64 zeros in the far diagonal tails
    rho = pure_density(cat_state(grid, delta_x=8.0, halfwidth=0.6))
    with pytest.raises(DegenerateStateError):
        coherence_peak(rho, 56.0)
    with pytest.raises(DomainError):
        coherence_peak(rho, 0.0)


# -- momentum_expectation ----------------------------------------------------------

def test_momentum_symmetric_state(grid):
    rho = pure_density(cat_state(grid, delta_x=8.0, halfwidth=1.0))
    assert abs(momentum_expectation(rho, params_with(0.0))) < 1e-10


def test_momentum_kicked_packet(grid):
    p = params_with(0.0)
    p0 = 1.0
    psi = gaussian_packet(grid, center=0.0, halfwidth=1.0, momentum=p0,
                          hbar=p.hbar)
    rho = pure_density(psi)
    assert momentum_expectation(rho, p) == pytest.approx(p0, rel=1e-3)
    # independent oracle: central-difference quadrature of psi* psi';
    # second-order differences carry a (p h)^2 / 6 bias, ~2.3% here
    x = grid.positions()
    dpsi = np.gradient(psi.amplitudes, x)
    quad = np.sum(psi.amplitudes.conj() * (-1j * p.hbar) * dpsi).real \
        * grid.spacing
    assert momentum_expectation(rho, p) == pytest.approx(quad, rel=0.03)


def test_momentum_conserved_free_evolution(grid):
    from decolab import kinetic_step
    p = params_with(0.0)
    psi = gaussian_packet(grid, center=-5.0, halfwidth=1.0, momentum=2.0,
                          hbar=p.hbar)
    rho = pure_density(psi)
    before = momentum_expectation(rho, p)
    after = momentum_expectation(kinetic_step(rho, p, 2.0), p)
    assert after == pytest.approx(before, abs=1e-8)


def test_momentum_imaginary_part_small(grid):
    # the discarded imaginary component is a Hermiticity diagnostic
    import scipy.fft as sfft
    p = params_with(0.0)
    rho = pure_density(cat_state(grid, delta_x=6.0, halfwidth=1.0))
    k = grid.wavenumbers()
    drho = sfft.ifft(1j * k[:, None] * sfft.fft(rho.values, axis=0), axis=0)
    total = -1j * p.hbar * np.sum(np.diagonal(drho)) * grid.spacing
    assert abs(total.imag) < 1e-10


# -- position_distribution / purity ---------------------------------------------

def test_position_distribution(grid):
    delta = 1.5
    rho = pure_density(gaussian_packet(grid, center=0.0, halfwidth=delta))
    d = position_distribution(rho)
    assert np.min(d) > -1e-10
    assert np.sum(d) * grid.spacing == pytest.approx(rho.trace(), abs=1e-12)
    _, var = position_moments(rho)
    assert var == pytest.approx(delta ** 2, rel=1e-2)


def test_position_distribution_bimodal_and_invariant(grid):
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    rho = pure_density(cat_state(grid, delta_x=8.0, halfwidth=1.0))
    d0 = position_distribution(rho)
    x = grid.positions()
    peaks = sorted(x[i] for i in range(1, len(d0) - 1)
                   if d0[i] > d0[i - 1] and d0[i] >= d0[i + 1]
                   and d0[i] > 0.01 * d0.max())
    assert peaks == pytest.approx([-4.0, 4.0], abs=grid.spacing)
    late = pure_decoherence_exact(rho, coeff, 100.0)
    assert np.max(np.abs(position_distribution(late) - d0)) < 1e-12


def test_purity_values(grid):
    delta, dx = 1.0, 8.0
    rho = pure_density(cat_state(grid, delta_x=dx, halfwidth=delta))
    assert purity(rho) == pytest.approx(1.0, abs=1e-6)
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    # branch-resolved decoherence: cross-branch gone, intra-branch partly;
    # Gaussian-integral oracle gives purity = (1/2) / sqrt(1 + 8 d^2 D t)
    t_star = 6.0 / (coeff.d_value * dx ** 2)
    dead = pure_decoherence_exact(rho, coeff, t_star)
    assert coherence_peak(dead, dx) < 5e-3
    expected = 0.5 / math.sqrt(1.0 + 8.0 * delta ** 2
                               * coeff.d_value * t_star)
    assert purity(dead) == pytest.approx(expected, rel=0.01)
    # idealized two-equal-branch value: order 1/2
    assert 0.3 < purity(dead) <= 0.5
    mix = incoherent_mixture(grid, sigma=12.0, halfwidth=1.0)
    assert purity(mix) < 3.6 / 12


# -- fit_exponential_rate -----------------------------------------------------------

def synth_traj(rate, n=20, t_max=2.0, noise=0.0, seed=0):
    t = np.linspace(0.0, t_max, n)
    s = np.exp(-rate * t)
    if noise:
        rng = np.random.default_rng(seed)
        s = s * (1.0 + noise * rng.standard_normal(n))
    return Trajectory(times=t, series={"s": s})


def test_fit_exact_exponential():
    fit = fit_exponential_rate(synth_traj(5.0), "s", (0.0, 2.0))
    assert fit.rate == pytest.approx(5.0, rel=1e-6)
    assert fit.r_squared > 0.999999
    assert not fit.low_confidence
    assert fit.intercept == pytest.approx(1.0, rel=1e-9)


def test_fit_constant_series():
    fit = fit_exponential_rate(synth_traj(0.0), "s", (0.0, 2.0))
    assert abs(fit.rate) < 1e-12


def test_fit_with_noise():
    fit = fit_exponential_rate(synth_traj(5.0, n=40, noise=0.01, seed=3),
                               "s", (0.0, 2.0))
    assert fit.rate == pytest.approx(5.0, rel=0.02)


def test_fit_flags_low_confidence():
    t = np.linspace(0.0, 2.0, 20)
    s = np.exp(-t) + 0.3 * np.sin(8.0 * t) + 0.5
    fit = fit_exponential_rate(Trajectory(times=t, series={"s": s}), "s",
                               (0.0, 2.0))
    assert fit.low_confidence


def test_fit_domain_errors():
    with pytest.raises(DomainError):
        fit_exponential_rate(synth_traj(1.0, n=20), "s", (0.0, 0.2))
    t = np.linspace(0.0, 2.0, 20)
    s = np.linspace(1.0, -0.5, 20)
    with pytest.raises(DomainError):
        fit_exponential_rate(Trajectory(times=t, series={"s": s}), "s",
                             (0.0, 2.0))


def test_fit_oracle_cat_decay(grid):
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    dx = 8.0
    rho0 = pure_density(cat_state(grid, delta_x=dx, halfwidth=1.0))
    cfg = EvolutionConfig(dt=0.01, n_steps=640, sample_every=32,
                          enable_kinetic=False, enable_dissipation=False)
    traj = evolve(rho0, p, cfg,
                  probes=[Probe("c", lambda r: coherence_peak(r, dx))])
    fit = fit_exponential_rate(traj, "c", (0.0, float(traj.times[-1])))
    assert fit.rate == pytest.approx(coeff.d_value * dx ** 2, rel=1e-3)


# -- measure_timescales ---------------------------------------------------------------

def deconly_config(dt, n_steps, sample_every):
    return EvolutionConfig(dt=dt, n_steps=n_steps, sample_every=sample_every,
                           enable_kinetic=False, enable_dissipation=False)


def deconly_for(rate, dt_max=0.024):
    """Localization-only plan resolving the c in [0.2, 0.9] window of a
    decay at the given rate with ~24 samples."""
    window_t = 1.6 / rate
    t_total = 2.5 / rate
    sample_dt = window_t / 24.0
    sample_every = max(1, round(sample_dt / dt_max))
    dt = sample_dt / sample_every
    spans = math.ceil(t_total / sample_dt)
    return deconly_config(dt, spans * sample_every, sample_every)


def test_measure_timescales_prefactor_constant(grid):
    # localization-only dynamics: ratio = p * N^2 with p pinned at N = 4
    # and constant across N to well within 5%
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    lam = thermal_de_broglie(p)
    prefactors = {}
    for n in (2, 4, 8):
        dx = n * lam
        rho0 = pure_density(cat_state(grid, delta_x=dx, halfwidth=1.0))
        m = measure_timescales(rho0, p,
                               deconly_for(coeff.d_value * dx ** 2))
        prefactors[n] = m.ratio / n ** 2
    pinned = prefactors[4]
    assert pinned == pytest.approx(0.25, rel=1e-3)
    for n in (2, 8):
        assert prefactors[n] == pytest.approx(pinned, rel=0.05)


def test_measure_timescales_scaling_linear(grid):
    # fitted rate vs dx^2 is linear with r^2 >= 0.99 (localization only)
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    lam = thermal_de_broglie(p)
    rates, dx_sq = [], []
    for n in (2, 4, 8):
        dx = n * lam
        rho0 = pure_density(cat_state(grid, delta_x=dx, halfwidth=1.0))
        m = measure_timescales(rho0, p,
                               deconly_for(coeff.d_value * dx ** 2))
        rates.append(m.theta_fit.rate)
        dx_sq.append(dx ** 2)
    slope, intercept = np.polyfit(dx_sq, rates, 1)
    fitted = np.polyval([slope, intercept], dx_sq)
    ss_res = np.sum((np.array(rates) - fitted) ** 2)
    ss_tot = np.sum((np.array(rates) - np.mean(rates)) ** 2)
    assert 1.0 - ss_res / ss_tot > 0.99
    assert slope == pytest.approx(coeff.d_value, rel=1e-3)


def test_measure_timescales_unit_separation(grid):
    # dx = lambda = halfwidth: tau/theta within a factor 4 of 1
    p = params_with(0.05)
    coeff = DecoherenceCoefficient.from_params(p)
    lam = thermal_de_broglie(p)
    rho0 = pure_density(cat_state(grid, delta_x=lam, halfwidth=lam))
    m = measure_timescales(rho0, p, deconly_for(coeff.d_value * lam ** 2))
    assert 0.249 <= m.ratio <= 4.01


def test_measure_timescales_run_too_short(grid):
    p = params_with(0.05)
    rho0 = pure_density(cat_state(grid, delta_x=8.0, halfwidth=1.0))
    cfg = deconly_config(1e-4, 64, 8)
    with pytest.raises(RunTooShortError) as info:
        measure_timescales(rho0, p, cfg)
    assert info.value.suggested_n_steps > 64


def test_measure_timescales_requires_cat(grid):
    p = params_with(0.05)
    rho0 = pure_density(gaussian_packet(grid, center=0.0, halfwidth=1.0))
    with pytest.raises(DomainError):
        measure_timescales(rho0, p, deconly_config(0.01, 64, 8))


def test_measure_timescales_requires_gamma(grid):
    p = params_with(0.0)
    rho0 = pure_density(cat_state(grid, delta_x=8.0, halfwidth=1.0))
    with pytest.raises(DomainError):
        measure_timescales(rho0, p, deconly_config(0.01, 64, 8))
