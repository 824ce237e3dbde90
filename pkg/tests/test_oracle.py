import math

import pytest

from fairlens.oracle import (
    INEQUALITY_IDS,
    OracleConfig,
    run_all_checks,
    verify_angle_bound,
    verify_approx_bound,
    verify_ball_bound,
    verify_decomposition,
)

SMALL = OracleConfig(seed=1, trials=2000, dim_range=(2, 64))


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            OracleConfig(trials=0)
        with pytest.raises(ValueError):
            OracleConfig(dim_range=(0, 4))
        with pytest.raises(ValueError):
            OracleConfig(rho_fraction_range=(0.9, 0.5))
        with pytest.raises(ValueError):
            OracleConfig(rho_fraction_range=(0.5, 1.0))
        with pytest.raises(ValueError):
            OracleConfig(tolerance=0.0)


@pytest.mark.parametrize(
    "verifier,name",
    [
        (verify_ball_bound, "ball_bound"),
        (verify_angle_bound, "angle_bound"),
        (verify_approx_bound, "approx_bound"),
        (verify_decomposition, "decomposition"),
    ],
)
class TestVerifiers:
    def test_zero_violations(self, verifier, name):
        result = verifier(SMALL)
        st = result.stats[name]
        assert st.checked == SMALL.trials
        assert st.violations == 0
        assert result.ok
        assert st.max_slack >= st.min_slack >= -SMALL.tolerance

    def test_deterministic(self, verifier, name):
        assert verifier(SMALL) == verifier(SMALL)

    def test_different_seeds_differ(self, verifier, name):
        a = verifier(OracleConfig(seed=1, trials=50, dim_range=(2, 16)))
        b = verifier(OracleConfig(seed=2, trials=50, dim_range=(2, 16)))
        assert a.stats[name].max_slack != b.stats[name].max_slack


class TestBallBound:
    def test_slack_shrinks_with_radius(self):
        # tightness sanity: tiny radii leave little slack, large radii a lot
        tight = verify_ball_bound(
            OracleConfig(seed=5, trials=500, dim_range=(2, 64),
                         rho_fraction_range=(0.005, 0.015))
        )
        loose = verify_ball_bound(
            OracleConfig(seed=5, trials=500, dim_range=(2, 64),
                         rho_fraction_range=(0.85, 0.95))
        )
        assert tight.stats["ball_bound"].max_slack < loose.stats["ball_bound"].max_slack


class TestApproxBound:
    def test_gap_ratio_within_curvature_margin(self):
        result = verify_approx_bound(OracleConfig(seed=3, trials=3000, dim_range=(2, 64)))
        ratio = result.stats["approx_bound"].extras["max_gap_ratio"]
        # half-angle worst case at relative distance 0.1 is ~1.00126
        assert 0.0 < ratio <= 1.0013


class TestRunAll:
    def test_merges_all_inequalities(self):
        cfg = OracleConfig(seed=9, trials=200, dim_range=(2, 16))
        result = run_all_checks(cfg)
        assert set(result.stats) == set(INEQUALITY_IDS)
        assert result.ok
        assert result.violation_count == 0

    def test_bit_reproducible(self):
        cfg = OracleConfig(seed=11, trials=300, dim_range=(2, 32))
        assert run_all_checks(cfg) == run_all_checks(cfg)


class TestViolationRecording:
    def test_tally_records_replay_inputs(self):
        from fairlens.oracle import _Tally

        tally = _Tally("demo", tolerance=1e-9)
        tally.check(7, lhs=1.0, rhs=0.5, inputs=lambda: {"x": [1.0, 2.0]})
        tally.check(8, lhs=0.1, rhs=0.5, inputs=lambda: {"x": [3.0]})
        result = tally.result(OracleConfig(trials=2))
        assert result.stats["demo"].violations == 1
        violation = result.violations[0]
        assert violation.trial == 7
        assert violation.inputs == {"x": [1.0, 2.0]}
        assert violation.lhs == 1.0 and violation.rhs == 0.5
        assert not result.ok

    def test_trivial_identical_caption_gap(self):
        # degenerate draw: identical captions give zero gap under any bound
        from fairlens.individual import angle_gap_bound, ball_gap_bound

        assert 0.0 <= ball_gap_bound(0.5, 1.0)
        assert 0.0 <= angle_gap_bound(1.0) + 1e-9
