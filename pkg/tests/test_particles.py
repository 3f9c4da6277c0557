# tests/test_particles.py
import math

import numpy as np
import pytest

from src.services import mckv_pde, particles
from src.services.mckv_pde import PdeConfig
from src.services.mckv_spde import NoiseStream
from src.services.particles import ParticleEnsemble
from src.services.torus_fourier import SpectralField
from src.utils.error_handler import ConfigurationError

TWO_PI = 2 * math.pi


def test_wrap_lands_in_half_open_interval():
    wrapped = particles.wrap(np.array([-1e-20, -0.1, 7.0, TWO_PI, 3.0]))
    assert np.all(wrapped >= 0)
    assert np.all(wrapped < TWO_PI)
    assert wrapped[0] == 0.0
    assert wrapped[3] == 0.0
    assert wrapped[2] == pytest.approx(7.0 - TWO_PI)


def test_ensemble_needs_particles():
    with pytest.raises(ConfigurationError):
        ParticleEnsemble(np.array([]))
    assert ParticleEnsemble(np.array([[1.0, 2.0]])).N == 2


def test_single_particle_feels_only_the_confinement():
    V, F = mckv_pde.default_potentials(2)
    for x in (0.3, 1.0, 4.0):
        ens = ParticleEnsemble(np.array([x]))
        assert particles.drift(ens, V, F)[0] == pytest.approx(2 * math.sin(2 * x), abs=1e-14)


def test_fast_interaction_matches_pairwise_sum():
    rng = np.random.default_rng(0)
    ens = ParticleEnsemble(rng.uniform(0, TWO_PI, 60))
    V, F = mckv_pde.default_potentials(2)
    np.testing.assert_allclose(particles.drift(ens, V, F),
                               particles.drift(ens, V, F, pairwise=True), atol=1e-12)
    richer = SpectralField(rng.standard_normal(9))
    np.testing.assert_allclose(particles.drift(ens, V, richer),
                               particles.drift(ens, V, richer, pairwise=True), atol=1e-12)


def test_two_particle_attraction():
    V = SpectralField.zeros(2)
    _, F = mckv_pde.default_potentials(2)
    ens = ParticleEnsemble(np.array([1.0, 1.5]))
    d = particles.drift(ens, V, F)
    # F' = sin pulls the particles together
    assert d[0] == pytest.approx(0.5 * math.sin(0.5))
    assert d[1] == pytest.approx(-0.5 * math.sin(0.5))


@pytest.mark.parametrize("init,m1,m2", [
    ("uniform", 0.0, 0.0),
    ("perturbed", 0.05, 0.0),
    ("bump:1.5707963267948966:5", 0.0, 0.8934),
])
def test_sampled_initial_moments(init, m1, m2):
    rng = np.random.default_rng(1)
    ens = ParticleEnsemble(particles.sample_initial(200_000, init, rng))
    assert ens.N == 200_000
    assert particles.empirical_moments(ens) == pytest.approx((m1, m2), abs=0.01)


@pytest.mark.parametrize("n,init", [(0, "uniform"), (10, "gauss"), (10, "bump:x"), (10, "perturbed:y")])
def test_sample_initial_rejects_bad_input(n, init):
    with pytest.raises(ConfigurationError):
        particles.sample_initial(n, init, np.random.default_rng(0))


def test_histogram_is_a_density():
    ens = ParticleEnsemble(particles.sample_initial(5000, "bump", np.random.default_rng(2)))
    centres, values = particles.histogram_density(ens, bins=32)
    assert centres.size == values.size == 32
    assert values.sum() * TWO_PI / 32 == pytest.approx(1.0)
    assert centres[int(np.argmax(values))] == pytest.approx(math.pi / 2, abs=0.3)


def test_em_step_without_noise_is_explicit_euler():
    V, F = mckv_pde.default_potentials(2)
    ens = ParticleEnsemble(np.array([0.2, 1.0, 3.0]), t=0.5)
    stepped = particles.em_step(ens, V, F, 0.0, 0.01, NoiseStream(0))
    np.testing.assert_allclose(stepped.positions, particles.wrap(ens.positions + 0.01 * particles.drift(ens, V, F)))
    assert stepped.t == pytest.approx(0.51)
    with pytest.raises(ConfigurationError):
        particles.em_step(ens, V, F, 0.5, 0.0, NoiseStream(0))
    with pytest.raises(ConfigurationError):
        particles.em_step(ens, V, F, -0.5, 0.01, NoiseStream(0))


def test_simulate_records_rows(tmp_path):
    V, F = mckv_pde.default_potentials(2)
    ens = ParticleEnsemble(particles.sample_initial(100, "uniform", np.random.default_rng(3)))
    trajectory = particles.simulate(ens, V, F, 0.8, 0.5, NoiseStream(3), dt=0.01, output_interval=0.1)
    assert [row[0] for row in trajectory.rows] == pytest.approx([0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    assert trajectory.final.N == 100
    path = trajectory.write_csv(str(tmp_path / "particles.csv"))
    assert open(path, encoding="utf-8").readline().strip() == "t,m1_emp,m2_emp"


def test_same_noise_seed_same_ensemble():
    V, F = mckv_pde.default_potentials(2)
    start = ParticleEnsemble(np.linspace(0.0, 6.0, 20))
    a = particles.simulate(start, V, F, 0.5, 0.1, NoiseStream(9), dt=0.01).final
    b = particles.simulate(start, V, F, 0.5, 0.1, NoiseStream(9), dt=0.01).final
    np.testing.assert_array_equal(a.positions, b.positions)


def test_chaos_compare_small_run():
    report = particles.chaos_compare([50, 200], sigma=1.0, T=0.1, replicates=2, seed=4, dt=1e-2, K=8)
    assert report.moments.shape == (2, 2, 2)
    assert report.errors.shape == (2,)
    assert np.all(np.isfinite(report.errors))
    assert math.isfinite(report.exponent)
    summary = report.to_dict()
    assert [row["N"] for row in summary["rows"]] == [50, 200]
    with pytest.raises(ConfigurationError):
        particles.chaos_compare([50], sigma=1.0, T=0.1, replicates=0)


def test_chaos_exponent_needs_two_sizes():
    report = particles.ChaosReport([10], (0.0, 0.0), np.zeros((1, 1, 2)) + 0.1)
    assert math.isnan(report.exponent)


@pytest.mark.slow
def test_chaos_error_decays_like_inverse_square_root():
    # from the uniform start both moments vanish by symmetry, so the gap is pure sampling error
    report = particles.chaos_compare([1000, 10000, 100000], sigma=1.0, T=0.5, replicates=20,
                                     init="uniform", seed=0, dt=1e-2, K=16)
    assert -0.65 < report.exponent < -0.35


def test_independent_particles_match_linear_fokker_planck():
    sigma, T, dt, N = 0.5, 1.0, 1e-2, 200_000
    V, _ = mckv_pde.default_potentials(32)
    cfg = PdeConfig(sigma, V, SpectralField.zeros(32), K=32, M=mckv_pde.product_grid(32), T=T, dt=1e-3,
                    output_interval=T)
    reference = mckv_pde.evolve(mckv_pde.initial_density("bump:1.0:2", 32), cfg).snapshots[-1]

    noise = NoiseStream(17)
    ens = ParticleEnsemble(particles.sample_initial(N, "bump:1.0:2", noise.generator))
    V2, _ = mckv_pde.default_potentials(2)
    final = particles.simulate(ens, V2, SpectralField.zeros(2), sigma, T, noise, dt=dt, output_interval=T).final
    m1, m2 = particles.empirical_moments(final)
    # Monte Carlo error plus a first-order weak bias
    tolerance = 4.0 / math.sqrt(N) + 2.0 * dt
    assert m1 == pytest.approx(reference.m1, abs=tolerance)
    assert m2 == pytest.approx(reference.m2, abs=tolerance)
