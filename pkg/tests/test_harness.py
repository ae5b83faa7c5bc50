"""Initial data families, perturbations, configuration, and the
experiment drivers.

Frozen oracles:

* interpolation_constant(4, 1) = (4^{1/5} + 4^{-4/5}) 2^{4/5}
  = 2.871745887492587, and interpolation_constant(4, 2)
  = (2^{1/3} + 2^{-2/3}) pi^{2/3} = 4.053851535095235, evaluated
  directly from the optimized velocity-ball split.
* A velocity_shift perturbation is an exact translation, so the
  identity-coupling cost, W1, and W2 all equal eta to roundoff.
* The jitter perturbation moves every particle by exactly eta in the
  order-1 phase-space metric (half in x, half in v).
"""

import json

import numpy as np
import pytest

from vpme.errors import ConfigError, InvariantError, PerturbationFloorError
from vpme.harness import (ExperimentConfig, InitialDataSpec,
                          identity_coupling_distance, interpolation_constant,
                          load_config, make_initial_data, perturb,
                          random_smooth_density, run_quasineutral_cauchy,
                          run_stability_experiment, sampling_floor,
                          verify_initial_energy)
from vpme.ot import wasserstein


# ---------------------------------------------------------------------------
# initial data


def test_initial_data_is_bitwise_reproducible():
    spec = InitialDataSpec(family="single_bump", sigma=0.5, amplitude=0.1)
    f1, r1 = make_initial_data(spec, 500, 0.5, seed=11)
    f2, r2 = make_initial_data(spec, 500, 0.5, seed=11)
    assert np.array_equal(f1.positions, f2.positions)
    assert np.array_equal(f1.velocities, f2.velocities)
    assert r1 == r2


def test_equilibrium_family_is_near_uniform():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    f, report = make_initial_data(spec, 20_000, 0.5, seed=2)
    assert report.family == "equilibrium"
    assert report.rho_sup < 1.2
    assert abs(float(np.mean(f.velocities))) < 0.05
    assert np.sum(f.weights) == pytest.approx(1.0, abs=1e-12)


def test_double_bump_needs_beam_speed():
    with pytest.raises(ConfigError):
        InitialDataSpec(family="double_bump", sigma=0.3, v_b=0.0)
    spec = InitialDataSpec(family="double_bump", sigma=0.3, v_b=2.0)
    f, report = make_initial_data(spec, 4000, 0.5, seed=3)
    # two beams: velocity histogram has mass near both +-v_b
    assert np.mean(f.velocities > 1.0) == pytest.approx(0.5, abs=0.05)
    assert np.mean(f.velocities < -1.0) == pytest.approx(0.5, abs=0.05)


def test_spec_validation():
    with pytest.raises(ConfigError):
        InitialDataSpec(family="ring")
    with pytest.raises(ConfigError):
        InitialDataSpec(sigma=0.0)
    with pytest.raises(ConfigError):
        InitialDataSpec(amplitude=1.0)


def test_quiet_lattice_requires_square_count_and_1d():
    spec = InitialDataSpec(family="quiet_lattice", sigma=0.3, amplitude=0.1)
    with pytest.raises(ConfigError, match="square"):
        make_initial_data(spec, 1000, 0.5)
    with pytest.raises(ConfigError, match="1d"):
        make_initial_data(spec, 400, 0.5, d=2)


def test_quiet_lattice_has_exactly_zero_momentum():
    spec = InitialDataSpec(family="quiet_lattice", sigma=0.3, amplitude=0.2)
    f, report = make_initial_data(spec, 2500, 0.5)
    assert float(np.sum(f.weights[:, None] * f.velocities)) == 0.0
    # modulated spatial marginal: deposited sup tracks 1 + amplitude
    assert report.rho_sup == pytest.approx(1.2, abs=0.05)


def test_perturbed_family_modulates_density():
    spec = InitialDataSpec(family="analytic_perturbed", sigma=0.5,
                           amplitude=0.3, mode_number=2)
    f, report = make_initial_data(spec, 30_000, 0.5, seed=8,
                                  report_resolution=32)
    from vpme.measures import deposit_density
    rho = deposit_density(f, 32)
    x = -0.5 + np.arange(32) / 32
    target = 1.0 + 0.3 * np.cos(4 * np.pi * x)
    assert np.max(np.abs(rho.values - target)) < 0.12


# ---------------------------------------------------------------------------
# perturbations


def test_velocity_shift_is_exact_translation():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 900, 0.5, seed=5)
    eta = 0.02
    f0 = perturb(g0, eta, mode="velocity_shift")
    assert identity_coupling_distance(g0, f0, order=1) == pytest.approx(eta, abs=1e-14)
    w1, _ = wasserstein(*_subsample_two(g0, f0, 120), order=1)
    assert w1 == pytest.approx(eta, abs=1e-12)


def _subsample_two(f1, f2, n_sub):
    from vpme.ot import subsample_pair
    return subsample_pair(f1, f2, n_sub, seed=0)


def test_jitter_moves_each_particle_by_eta():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 2500, 0.5, seed=6)
    eta = 0.6  # must clear the sampling floor
    f0 = perturb(g0, eta, mode="jitter", seed=2)
    cost = identity_coupling_distance(g0, f0, order=1)
    assert cost == pytest.approx(eta, rel=1e-10)


def test_jitter_below_noise_floor_is_rejected():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 2500, 0.5, seed=6)
    with pytest.raises(PerturbationFloorError):
        perturb(g0, 1e-9, mode="jitter")


def test_rough_resample_lands_near_requested_size():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 4000, 0.5, seed=7)
    eta = 0.5
    f0 = perturb(g0, eta, mode="rough_resample", seed=3)
    cost = identity_coupling_distance(g0, f0, order=1)
    assert 0.4 * eta <= cost <= 1.8 * eta


def test_perturb_none_and_zero_are_identity():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 400, 0.5, seed=8)
    assert perturb(g0, 0.3, mode="none") is g0
    assert perturb(g0, 0.0, mode="jitter") is g0


def test_perturb_validation():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 400, 0.5, seed=8)
    with pytest.raises(ConfigError):
        perturb(g0, 0.1, mode="sprinkle")
    with pytest.raises(ConfigError):
        perturb(g0, -0.1, mode="velocity_shift")


def test_sampling_floor_is_positive_and_reproducible():
    spec = InitialDataSpec(family="equilibrium", sigma=0.4)
    g0, _ = make_initial_data(spec, 2500, 0.5, seed=9)
    a = sampling_floor(g0)
    b = sampling_floor(g0)
    assert a == b
    assert a > 0.0


# ---------------------------------------------------------------------------
# configuration


def base_config(**overrides):
    kwargs = dict(kind="stability", d=1, n_particles=400, grid_resolution=32,
                  t_end=0.2, checkpoint_interval=0.1,
                  epsilon_ladder=(0.5, 0.4),
                  initial_data=InitialDataSpec(family="equilibrium", sigma=0.4),
                  perturbation_mode="velocity_shift", eta_mode="fixed",
                  eta=0.05, distance_order=1, n_sub=150, seed=3)
    kwargs.update(overrides)
    return ExperimentConfig(**kwargs)


def test_config_eta_schedule():
    cfg = base_config(eta_mode="exponential", c_star=0.05, zeta=2.0)
    assert cfg.eta_for(0.4) == pytest.approx(np.exp(-0.05 * 0.4**-2), rel=1e-12)
    fixed = base_config(eta_mode="fixed", eta=0.01)
    assert fixed.eta_for(0.4) == 0.01
    off = base_config(perturbation_mode="none")
    assert off.eta_for(0.4) == 0.0


def test_config_sim_params_alignment():
    cfg = base_config()
    params = cfg.sim_params(0.3)
    assert params.dt <= 0.1 * 0.3 * (1 + 1e-12)
    assert round(cfg.checkpoint_interval / params.dt) * params.dt == pytest.approx(
        cfg.checkpoint_interval, rel=1e-12)


def test_config_hash_is_stable_and_sensitive():
    a = base_config()
    b = base_config()
    c = base_config(seed=4)
    assert a.config_hash == b.config_hash
    assert a.config_hash != c.config_hash
    assert len(a.config_hash) == 16


def test_config_validation():
    with pytest.raises(ConfigError):
        base_config(kind="scan")
    with pytest.raises(ConfigError):
        base_config(epsilon_ladder=(0.2, 0.4))
    with pytest.raises(ConfigError):
        base_config(epsilon_ladder=(1.5, 0.4))
    with pytest.raises(ConfigError):
        base_config(eta_mode="linear")
    with pytest.raises(ConfigError):
        base_config(distance_method="sliced")


def test_load_config_roundtrip(tmp_path):
    text = """\
[experiment]
kind = stability
d = 1
n_particles = 1600        ; smallish
grid_resolution = 32
t_end = 0.2
checkpoint_interval = 0.1
epsilon_ladder = 0.5, 0.4, 0.25
seed = 12

[initial_data]
family = single_bump
sigma = 0.45
amplitude = 0.1           # spatial modulation
mode_number = 1

[perturbation]
mode = velocity_shift
eta_mode = exponential
c_star = 0.05
zeta = 2.0

[distance]
method = exact
order = 1
n_sub = 300
"""
    path = tmp_path / "exp.ini"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.n_particles == 1600
    assert cfg.epsilon_ladder == (0.5, 0.4, 0.25)
    assert cfg.initial_data.family == "single_bump"
    assert cfg.initial_data.amplitude == 0.1
    assert cfg.perturbation_mode == "velocity_shift"
    assert cfg.eta_mode == "exponential"
    assert cfg.distance_order == 1
    assert cfg.n_sub == 300
    assert cfg.seed == 12


def test_load_config_rejects_unknown_key(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[experiment]\nkind = stability\nwalls = 3\n")
    with pytest.raises(ConfigError, match="walls"):
        load_config(path)


def test_load_config_rejects_unknown_section(tmp_path):
    path = tmp_path / "bad2.ini"
    path.write_text("[plotting]\nstyle = dark\n")
    with pytest.raises(ConfigError, match="plotting"):
        load_config(path)


def test_load_config_rejects_bad_value_and_missing_file(tmp_path):
    path = tmp_path / "bad3.ini"
    path.write_text("[experiment]\nn_particles = many\n")
    with pytest.raises(ConfigError, match="n_particles"):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


# ---------------------------------------------------------------------------
# interpolation constant and initial energy


def test_interpolation_constant_frozen_values():
    assert interpolation_constant(4.0, 1) == pytest.approx(2.871745887492587,
                                                           rel=1e-14)
    assert interpolation_constant(4.0, 2) == pytest.approx(4.053851535095235,
                                                           rel=1e-14)


def test_initial_energy_report_on_maxwellian():
    spec = InitialDataSpec(family="equilibrium", sigma=0.5)
    f0, report = make_initial_data(spec, 10_000, 0.5, seed=4)
    erep = verify_initial_energy(f0, report.f_sup, k=4.0)
    assert erep.interpolation_verdict
    assert erep.field_nonnegative
    assert erep.electron_floor_verdict
    assert erep.kinetic == pytest.approx(0.5 * 0.25, rel=0.05)


# ---------------------------------------------------------------------------
# experiment drivers


def test_stability_experiment_smoke(tmp_path):
    out = tmp_path / "exp"
    report = run_stability_experiment(base_config(), out_dir=out)
    assert len(report.rungs) == 2
    assert all(r.sup_distance > 0 for r in report.rungs)
    assert all(np.all(np.isfinite(r.distances)) for r in report.rungs)
    assert isinstance(report.trend_nonincreasing, bool)
    assert (out / "summary.csv").exists()
    assert (out / "run_eps0.5_base.ndjson").exists()
    assert (out / "run_eps0.4_perturbed.ndjson").exists()
    series = (out / "distances_eps0.5.ndjson").read_text().splitlines()
    first = json.loads(series[0])
    assert first["kind"] == "distance" and first["time"] == 0.0
    assert np.isfinite(first["measured"]) and np.isfinite(first["envelope"])


def test_stability_rung_distances_start_near_eta():
    report = run_stability_experiment(base_config())
    for rung in report.rungs:
        # t = 0 distance of a velocity shift is eta itself (identical
        # subsample indices), before dynamics mixes it
        assert rung.distances[0] == pytest.approx(rung.eta, rel=1e-6)


def test_cauchy_experiment_smoke():
    cfg = base_config(kind="cauchy", epsilon_ladder=(0.5, 0.25),
                      perturbation_mode="none")
    report = run_quasineutral_cauchy(cfg)
    assert len(report.pairs) == 2
    assert report.pairs[0].epsilon_fine == 0.25
    assert report.pairs[1].epsilon_fine == 0.125
    assert all(np.isfinite(p.sup_distance) for p in report.pairs)
    assert isinstance(report.strictly_decreasing, bool)


def test_kind_mismatch_is_rejected():
    with pytest.raises(ConfigError):
        run_quasineutral_cauchy(base_config())
    with pytest.raises(ConfigError):
        run_stability_experiment(base_config(kind="cauchy"))


# ---------------------------------------------------------------------------
# synthetic densities


def test_random_smooth_density_properties():
    rho = random_smooth_density(d=1, resolution=64, seed=10, amplitude=0.4)
    assert rho.mean == pytest.approx(1.0, abs=1e-12)
    assert np.min(rho.values) >= 1.0 - 0.4 - 1e-12
    again = random_smooth_density(d=1, resolution=64, seed=10, amplitude=0.4)
    assert np.array_equal(rho.values, again.values)
    rho2 = random_smooth_density(d=2, resolution=32, seed=11)
    assert rho2.values.shape == (32, 32)
    with pytest.raises(ConfigError):
        random_smooth_density(d=1, resolution=64, amplitude=1.2)
