import numpy as np
import pytest

from kickcool import (
    NonNormalizableError,
    ProtocolParams,
    build_generator,
    build_kick_map,
    damping_propagator,
    default_n_max,
    evolve,
    evolve_stroboscopic,
    kick_fluctuation,
    kick_matrix,
    mean_phonon,
    number_state,
    steady_state,
    steady_state_analytic,
    steady_state_longtime,
    steady_state_numeric,
    thermal_distribution,
)

G_REF = 2 * np.pi * 1e7
KAPPA_REF = np.pi * 1e3


def make_params(n_th, ra_over_kappa, theta, p_e=0.0, kappa=KAPPA_REF):
    return ProtocolParams(
        g=G_REF,
        tau=theta / G_REF,
        r_a=ra_over_kappa * kappa,
        kappa=kappa,
        n_th=n_th,
        p_e=p_e,
    )


def demo_setup(n_max=60):
    """Slow transient-demo point: n_th = 1.7, r_a/kappa = 133, theta = pi/8."""
    params = make_params(1.7, 133.0, np.pi / 8.0)
    kick = build_kick_map(params.g, params.tau, params.p_e, n_max)
    return params, kick, build_generator(params, kick, n_max)


class TestGenerator:
    def test_columns_sum_to_zero(self):
        _, _, gen = demo_setup()
        scale = np.abs(gen.matrix).max()
        assert np.abs(gen.matrix.sum(axis=0)).max() < 1e-12 * scale

    def test_offdiagonal_rates_nonnegative(self):
        _, _, gen = demo_setup()
        off = gen.matrix - np.diag(np.diag(gen.matrix))
        assert off.min() >= 0.0

    def test_matches_kick_plus_damping_assembly(self):
        params, kick, gen = demo_setup(40)
        size = 41
        levels = np.arange(1, size, dtype=float)
        up = params.kappa * params.n_th * levels
        down = params.kappa * (params.n_th + 1.0) * levels
        damping = np.zeros((size, size))
        idx = np.arange(size - 1)
        damping[idx + 1, idx] = up
        damping[idx, idx + 1] = down
        damping[np.arange(size), np.arange(size)] = -np.concatenate(
            (up, [0.0])
        ) - np.concatenate(([0.0], down))
        direct = params.r_a * (kick_matrix(kick) - np.eye(size)) + damping
        scale = np.abs(gen.matrix).max()
        np.testing.assert_allclose(gen.matrix, direct, atol=1e-12 * scale)

    def test_pure_decay_relaxes_to_vacuum(self):
        params = ProtocolParams(
            g=G_REF, tau=1e-8, r_a=0.0, kappa=KAPPA_REF, n_th=0.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 30)
        gen = build_generator(params, kick, 30)
        result = steady_state_numeric(gen)
        assert result.populations.populations[0] == pytest.approx(1.0, abs=1e-12)

    def test_undamped_full_swap_empties_into_vacuum(self):
        params = ProtocolParams(
            g=G_REF, tau=(np.pi / 2) / G_REF, r_a=1e6, kappa=0.0, n_th=0.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 30)
        gen = build_generator(params, kick, 30)
        with pytest.warns(UserWarning):  # chain disconnects at the swap nodes
            result = steady_state_numeric(gen)
        assert result.populations.populations[0] == pytest.approx(1.0, abs=1e-12)

    def test_size_mismatch(self):
        params, kick, _ = demo_setup(20)
        with pytest.raises(ValueError):
            build_generator(params, kick, 30)


class TestEvolve:
    def test_steady_state_is_fixed_point(self):
        params, kick, gen = demo_setup()
        steady = steady_state_analytic(params, kick, 60)
        t_end = 20.0 / params.r_a
        trace = evolve(steady.populations, gen, t_end)
        assert np.abs(trace.mean_n - steady.mean_n_s).max() < 1e-8

    def test_thermal_relaxation_closed_form(self):
        # pure damping lifts the vacuum as n_th (1 - exp(-kappa t))
        params = ProtocolParams(
            g=G_REF, tau=1e-8, r_a=0.0, kappa=KAPPA_REF, n_th=1.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 60)
        gen = build_generator(params, kick, 60)
        t_end = 5.0 / params.kappa
        times = np.linspace(0.0, t_end, 101)
        trace = evolve(number_state(0, 60), gen, t_end, sample_times=times)
        exact = params.n_th * (1.0 - np.exp(-params.kappa * times))
        rel = np.abs(trace.mean_n[1:] - exact[1:]) / exact[1:]
        assert rel.max() < 1e-6

    def test_transient_reaches_steady_by_sixty_periods(self):
        params, kick, gen = demo_setup()
        steady = steady_state_analytic(params, kick, 60)
        t_end = 90.0 / params.r_a
        times = np.linspace(0.0, t_end, 361)
        trace = evolve(thermal_distribution(1.7, 60), gen, t_end, sample_times=times)
        at_sixty = np.searchsorted(times * params.r_a, 60.0)
        assert abs(trace.mean_n[at_sixty] - steady.mean_n_s) < 0.01 * steady.mean_n_s

    def test_sample_validation(self):
        params, kick, gen = demo_setup()
        with pytest.raises(ValueError):
            evolve(thermal_distribution(1.7, 60), gen, -1.0)
        with pytest.raises(ValueError):
            evolve(
                thermal_distribution(1.7, 60),
                gen,
                1.0,
                sample_times=np.array([0.0, 2.0]),
            )

    def test_snapshots_kept_on_request(self):
        params, kick, gen = demo_setup()
        t_end = 5.0 / params.r_a
        trace = evolve(
            thermal_distribution(1.7, 60),
            gen,
            t_end,
            sample_times=np.linspace(0, t_end, 6),
            keep_snapshots=True,
        )
        assert len(trace.snapshots) == 6
        assert trace.snapshots[0].populations.sum() == pytest.approx(1.0)


class TestStroboscopic:
    def test_single_swap_then_inert(self):
        params = ProtocolParams(
            g=G_REF, tau=(np.pi / 2) / G_REF, r_a=1e6, kappa=0.0, n_th=0.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 10)
        trace = evolve_stroboscopic(number_state(1, 10), params, kick, 4)
        post = trace.mean_n[2::2]
        np.testing.assert_allclose(post, 0.0, atol=1e-12)

    def test_zero_kicks_returns_initial(self):
        params, kick, _ = demo_setup()
        initial = thermal_distribution(1.7, 60)
        trace = evolve_stroboscopic(initial, params, kick, 0)
        assert trace.times.size == 1
        assert trace.mean_n[0] == pytest.approx(mean_phonon(initial))

    def test_times_strictly_increasing(self):
        params, kick, _ = demo_setup()
        trace = evolve_stroboscopic(thermal_distribution(1.7, 60), params, kick, 20)
        assert np.all(np.diff(trace.times) > 0)

    def test_per_kick_drop_matches_steady_fluctuation(self):
        params, kick, _ = demo_setup()
        steady = steady_state_analytic(params, kick, 60)
        trace = evolve_stroboscopic(thermal_distribution(1.7, 60), params, kick, 300)
        pre, post = trace.mean_n[1::2], trace.mean_n[2::2]
        drop = (pre[-40:] - post[-40:]).mean()
        assert drop == pytest.approx(steady.delta_n, rel=0.05)

    def test_cycle_average_matches_coarse_grained_mean(self):
        params, kick, _ = demo_setup()
        steady = steady_state_analytic(params, kick, 60)
        trace = evolve_stroboscopic(thermal_distribution(1.7, 60), params, kick, 300)
        pre, post = trace.mean_n[1::2], trace.mean_n[2::2]
        averaged = 0.5 * (pre[-40:] + post[-40:]).mean()
        allowance = steady.delta_n / 2.0 + 0.02 * steady.mean_n_s
        assert abs(averaged - steady.mean_n_s) < allowance

    def test_damping_propagator_is_stochastic(self):
        params, _, _ = demo_setup()
        prop = damping_propagator(params, 40, 1.0 / params.r_a)
        np.testing.assert_allclose(prop.sum(axis=0), 1.0, atol=1e-12)
        assert prop.min() >= -1e-15


class TestSteadyStateAnalytic:
    def test_first_level_ratio_full_swap(self):
        params = make_params(1.0, 100.0, np.pi / 2.0)
        kick = build_kick_map(params.g, params.tau, 0.0, 60)
        result = steady_state_analytic(params, kick, 60)
        p = result.populations.populations
        assert p[1] / p[0] == pytest.approx(1.0 / 102.0, rel=1e-9)

    def test_no_kicks_gives_thermal(self):
        params = ProtocolParams(
            g=G_REF, tau=1e-8, r_a=0.0, kappa=KAPPA_REF, n_th=2.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 120)
        result = steady_state_analytic(params, kick, 120)
        expected = thermal_distribution(2.0, 120)
        np.testing.assert_allclose(
            result.populations.populations, expected.populations, atol=1e-14
        )

    def test_strong_cooling_limit(self):
        # n_th << r_a/kappa at full swap: mean approaches n_th*kappa/r_a
        params = make_params(0.5, 1000.0, np.pi / 2.0)
        kick = build_kick_map(params.g, params.tau, 0.0, 60)
        result = steady_state_analytic(params, kick, 60)
        assert result.mean_n_s == pytest.approx(0.5 / 1000.0, rel=0.10)

    def test_excitation_bound_enforced(self):
        params = make_params(1.0, 100.0, np.pi / 2.0, p_e=0.9)
        kick = build_kick_map(params.g, params.tau, 0.9, 60)
        with pytest.raises(NonNormalizableError):
            steady_state_analytic(params, kick, 60)

    def test_hot_limit_is_geometric(self):
        params = make_params(100.0, 1.0, np.pi / 2.0)
        n_max = default_n_max(100.0)
        kick = build_kick_map(params.g, params.tau, 0.0, n_max)
        result = steady_state_analytic(params, kick, n_max)
        p = result.populations.populations
        ratios = p[1:21] / p[0:20]
        np.testing.assert_allclose(ratios, 100.0 / 101.0, rtol=0.01)

    def test_needs_damping(self):
        params = ProtocolParams(g=G_REF, tau=1e-8, r_a=1e6, kappa=0.0, n_th=1.0)
        kick = build_kick_map(params.g, params.tau, 0.0, 30)
        with pytest.raises(ValueError):
            steady_state_analytic(params, kick, 30)


class TestSteadyStateNumeric:
    def test_no_kicks_gives_thermal(self):
        params = ProtocolParams(
            g=G_REF, tau=1e-8, r_a=0.0, kappa=KAPPA_REF, n_th=2.0
        )
        kick = build_kick_map(params.g, params.tau, 0.0, 120)
        gen = build_generator(params, kick, 120)
        result = steady_state_numeric(gen)
        expected = thermal_distribution(2.0, 120)
        np.testing.assert_allclose(
            result.populations.populations, expected.populations, atol=1e-12
        )

    def test_matches_analytic_at_demo_point(self):
        params, kick, gen = demo_setup()
        analytic = steady_state_analytic(params, kick, 60)
        numeric = steady_state_numeric(gen)
        np.testing.assert_allclose(
            numeric.populations.populations,
            analytic.populations.populations,
            atol=1e-9,
        )


class TestSolverAgreement:
    @pytest.mark.parametrize("n_th", [0.5, 5.0])
    @pytest.mark.parametrize("ra_over_kappa", [10.0, 200.0])
    @pytest.mark.parametrize("p_e", [0.0, 0.2])
    def test_three_routes_agree(self, n_th, ra_over_kappa, p_e):
        params = make_params(n_th, ra_over_kappa, 1.2, p_e=p_e)
        n_max = default_n_max(n_th)
        kick = build_kick_map(params.g, params.tau, p_e, n_max)
        gen = build_generator(params, kick, n_max)
        a = steady_state_analytic(params, kick, n_max).populations.populations
        n = steady_state_numeric(gen).populations.populations
        t = steady_state_longtime(gen).populations.populations
        assert np.abs(a - n).max() < 1e-8
        assert np.abs(a - t).max() < 1e-8
        assert np.abs(n - t).max() < 1e-8

    def test_dispatch_wrapper(self):
        params = make_params(1.0, 50.0, 1.0)
        means = {
            method: steady_state(params, n_max=80, method=method).mean_n_s
            for method in ("analytic-product", "null-space", "long-time")
        }
        values = list(means.values())
        assert max(values) - min(values) < 1e-10


class TestTrappingNodes:
    def test_full_swap_bottleneck_above_level_four(self):
        # at theta = pi/2 the (3,4) swap closes (sin^2(pi) = 0), so mass
        # above level 4 drains only through damping; convergence is then a
        # kappa-scale process even when r_a/kappa is large
        params = make_params(5.0, 1000.0, np.pi / 2.0)
        n_max = default_n_max(5.0)
        kick = build_kick_map(params.g, params.tau, 0.0, n_max)
        assert kick.ce2[3] < 1e-30
        gen = build_generator(params, kick, n_max)
        steady = steady_state_analytic(params, kick, n_max)
        early = evolve(
            thermal_distribution(5.0, n_max),
            gen,
            150.0 / params.r_a,
            sample_times=np.array([150.0 / params.r_a]),
            keep_snapshots=True,
        )
        stuck = early.snapshots[0].populations[4]
        assert stuck > 10.0 * steady.populations.populations[4]
        late = evolve(
            thermal_distribution(5.0, n_max),
            gen,
            8.0 / params.kappa,
            sample_times=np.array([8.0 / params.kappa]),
        )
        assert late.mean_n[-1] == pytest.approx(steady.mean_n_s, rel=1e-9)


class TestKickFluctuation:
    def test_vacuum_zero(self):
        kick = build_kick_map(1.0, 1.0, 0.0, 10)
        assert kick_fluctuation(number_state(0, 10), kick) == 0.0

    def test_full_swap_removes_one(self):
        kick = build_kick_map(1.0, np.pi / 2.0, 0.0, 10)
        assert kick_fluctuation(number_state(1, 10), kick) == pytest.approx(1.0)

    def test_steady_state_balance_identity(self):
        # stationarity of the mean: mean_n_s = n_th - (r_a/kappa) * delta_n
        params, kick, gen = demo_setup()
        numeric = steady_state_numeric(gen)
        reconstructed = params.n_th - params.ra_over_kappa * numeric.delta_n
        assert abs(reconstructed - numeric.mean_n_s) < 1e-6

    def test_always_cooling_in_steady_state(self):
        params, kick, gen = demo_setup()
        result = steady_state_numeric(gen)
        assert result.delta_n >= 0.0
        assert result.mean_n_s < params.n_th
