import numpy as np
import pytest

from collapsekit.assoc import FiniteJoint
from collapsekit.errors import DistributionError
from collapsekit.regress import (
    RegressionStratum,
    StratifiedRegressionSummary,
    check_a_collapsibility,
    check_parallel_collapsibility,
    check_sufficient_conditions,
    marginal_beta,
    summary_from_records,
)

S = RegressionStratum


def mixture_points(summary):
    """Explicit four-point-per-stratum mixture realizing the summary moments."""
    pts = []
    for s in summary.strata:
        sd_x = np.sqrt(s.s_xx)
        resid = np.sqrt(max(s.s_yy - s.beta**2 * s.s_xx, 0.0))
        for sx in (-1.0, 1.0):
            for sy in (-1.0, 1.0):
                pts.append(
                    (
                        s.pi / 4.0,
                        s.mu_x + sx * sd_x,
                        s.mu_y + sx * s.beta * sd_x + sy * resid,
                    )
                )
    return pts


def brute_force_slope(summary):
    pts = mixture_points(summary)
    w = np.array([p for p, _, _ in pts])
    xs = np.array([x for _, x, _ in pts])
    ys = np.array([y for _, _, y in pts])
    ex, ey = (w * xs).sum(), (w * ys).sum()
    return ((w * xs * ys).sum() - ex * ey) / ((w * xs * xs).sum() - ex * ex)


def random_summary(rng, n_levels=None, parallel=False):
    n = n_levels or int(rng.integers(2, 5))
    pis = rng.uniform(0.2, 1.0, n)
    pis /= pis.sum()
    beta0 = rng.uniform(-2.0, 2.0)
    strata = []
    for i in range(n):
        beta = beta0 if parallel else rng.uniform(-2.0, 2.0)
        s_xx = rng.uniform(0.5, 2.0)
        strata.append(
            S(
                pi=float(pis[i]),
                alpha=rng.uniform(-2.0, 2.0),
                beta=float(beta),
                mu_x=rng.uniform(-2.0, 2.0),
                s_xx=float(s_xx),
                s_yy=float(beta * beta * s_xx + rng.uniform(0.1, 2.0)),
            )
        )
    return StratifiedRegressionSummary(tuple(strata))


class TestValidation:
    def test_weights_sum(self):
        with pytest.raises(DistributionError):
            StratifiedRegressionSummary(
                (S(0.5, 0, 1, 0, 1, 2), S(0.4, 0, 1, 0, 1, 2))
            )

    def test_positive_variances(self):
        with pytest.raises(DistributionError):
            StratifiedRegressionSummary((S(1.0, 0, 1, 0, 0.0, 2),))

    def test_realizability(self):
        # Var(Y|A) cannot be below beta^2 Var(X|A)
        with pytest.raises(DistributionError):
            StratifiedRegressionSummary((S(1.0, 0, 2, 0, 1.0, 1.0),))

    def test_derived_fields(self):
        s = S(1.0, 2.0, 3.0, 0.5, 1.0, 10.0)
        assert s.mu_y == 2.0 + 3.0 * 0.5
        assert s.s_yx == 3.0

    def test_json_roundtrip(self):
        rng = np.random.default_rng(0)
        summ = random_summary(rng)
        back = StratifiedRegressionSummary.from_json(summ.to_json())
        assert len(back.strata) == len(summ.strata)
        assert back.strata[0].alpha == summ.strata[0].alpha


class TestMarginalBeta:
    def test_single_level(self):
        summ = StratifiedRegressionSummary((S(1.0, 0.5, 1.7, 0.3, 1.2, 4.0),))
        assert marginal_beta(summ) == pytest.approx(1.7, abs=1e-15)

    def test_constant_mu_x_parallel(self):
        summ = StratifiedRegressionSummary(
            (S(0.4, 1.0, 2.0, 0.7, 1.0, 5.0), S(0.6, -1.0, 2.0, 0.7, 2.0, 9.0))
        )
        assert marginal_beta(summ) == pytest.approx(2.0, abs=1e-12)

    def test_matches_brute_force_mixture(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            summ = random_summary(rng)
            assert marginal_beta(summ) == pytest.approx(
                brute_force_slope(summ), abs=1e-9
            )


class TestParallelCollapsibility:
    def test_constant_alpha_collapsible(self):
        summ = StratifiedRegressionSummary(
            (S(0.3, 2.0, 1.5, -1.0, 1.0, 4.0), S(0.7, 2.0, 1.5, 2.0, 0.5, 3.0))
        )
        v = check_parallel_collapsibility(summ)
        assert v.collapsible and v.a_collapsible
        assert v.beta_gap <= 1e-12

    def test_proportional_means_collapsible(self):
        # beta = mu_y / mu_x for every level means alpha vanishes identically
        summ = StratifiedRegressionSummary(
            (S(0.5, 0.0, 1.5, 1.0, 1.0, 4.0), S(0.5, 0.0, 1.5, 2.0, 0.5, 3.0))
        )
        v = check_parallel_collapsibility(summ)
        assert v.collapsible
        for s in summ.strata:
            assert s.beta == pytest.approx(s.mu_y / s.mu_x)

    def test_intercept_mean_covariance_blocks_collapse(self):
        summ = StratifiedRegressionSummary(
            (S(0.5, 0.0, 1.0, 0.0, 1.0, 2.0), S(0.5, 1.0, 1.0, 1.0, 1.0, 2.0))
        )
        v = check_parallel_collapsibility(summ)
        assert not v.collapsible
        assert v.lhs == pytest.approx(0.25)
        assert v.beta_marginal != pytest.approx(1.0)

    def test_non_parallel_rejected(self):
        rng = np.random.default_rng(2)
        summ = random_summary(rng, parallel=False)
        with pytest.raises(DistributionError):
            check_parallel_collapsibility(summ)

    def test_route_agreement_random(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            summ = random_summary(rng, parallel=True)
            v = check_parallel_collapsibility(summ)
            assert v.collapsible == (v.identity_gap <= v.tol)
            assert v.collapsible == (v.beta_gap <= v.tol)


class TestACollapsibility:
    def test_parallel_collapsible_implies_a_collapsible(self):
        summ = StratifiedRegressionSummary(
            (S(0.3, 2.0, 1.5, -1.0, 1.0, 4.0), S(0.7, 2.0, 1.5, -1.0, 0.5, 3.0))
        )
        assert check_parallel_collapsibility(summ).collapsible
        assert check_a_collapsibility(summ).a_collapsible

    def test_constant_means_identity_zero(self):
        summ = StratifiedRegressionSummary(
            (S(0.5, 1.0, 1.0, 0.0, 1.0, 2.0), S(0.5, 1.0, 2.0, 0.0, 1.0, 5.0))
        )
        v = check_a_collapsibility(summ)
        assert v.lhs == 0.0 and v.rhs == 0.0
        assert v.a_collapsible
        assert v.beta_marginal == pytest.approx(1.5)

    def test_degradation_counterexample(self):
        summ = StratifiedRegressionSummary(
            (S(0.5, 0.0, 1.0, 0.0, 1.0, 2.0), S(0.5, 0.0, 3.0, 0.0, 2.0, 20.0))
        )
        v = check_a_collapsibility(summ)
        assert not v.a_collapsible
        assert v.lhs == pytest.approx(0.0)
        assert v.rhs == pytest.approx(0.5)

    def test_route_agreement_random(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            summ = random_summary(rng)
            v = check_a_collapsibility(summ)
            assert v.a_collapsible == (v.identity_gap <= v.tol)
            assert v.a_collapsible == (v.beta_gap <= v.tol)

    def test_relabeling_invariance(self):
        rng = np.random.default_rng(5)
        summ = random_summary(rng, n_levels=4)
        v = check_a_collapsibility(summ)
        perm = rng.permutation(4)
        shuffled = StratifiedRegressionSummary(
            tuple(summ.strata[i] for i in perm)
        )
        v2 = check_a_collapsibility(shuffled)
        assert v2.a_collapsible == v.a_collapsible
        assert v2.beta_marginal == pytest.approx(v.beta_marginal, abs=1e-12)


def joint_y_ci_a_given_x(rng, ny=3, nx=2, na=3):
    pxa = rng.uniform(0.1, 1.0, (nx, na))
    pxa /= pxa.sum()
    pygx = rng.uniform(0.1, 1.0, (ny, nx))
    pygx /= pygx.sum(axis=0, keepdims=True)
    p = pygx[:, :, None] * pxa[None, :, :]
    return FiniteJoint(
        tuple(float(v) for v in range(ny)),
        tuple(float(v) for v in range(nx)),
        tuple(float(v) for v in range(na)),
        p / p.sum(),
    )


class TestSufficientConditions:
    def test_y_ci_construction(self):
        rng = np.random.default_rng(6)
        flags = check_sufficient_conditions(joint_y_ci_a_given_x(rng))
        assert flags.y_indep_a_given_x
        assert flags.mean_independent
        assert flags.collapsible_implied
        assert flags.a_collapsible_implied
        assert flags.logistic_both_implied

    def test_background_independent_of_pair(self):
        rng = np.random.default_rng(7)
        pxy = rng.uniform(0.1, 1.0, (3, 2))
        pxy /= pxy.sum()
        qa = rng.uniform(0.1, 1.0, 3)
        qa /= qa.sum()
        j = FiniteJoint(
            (0.0, 1.0, 2.0), (0.0, 1.0), (0.0, 1.0, 2.0),
            pxy[:, :, None] * qa[None, None, :],
        )
        flags = check_sufficient_conditions(j)
        assert flags.y_indep_a_given_x and flags.x_indep_a_given_y
        assert flags.variance_identity
        assert flags.variance_identity_gap <= 1e-12

    def test_generic_joint_fails_flags(self):
        rng = np.random.default_rng(8)
        p = rng.uniform(0.05, 1.0, (3, 2, 3))
        j = FiniteJoint(
            (0.0, 1.0, 2.0), (0.0, 1.0), (0.0, 1.0, 2.0), p / p.sum()
        )
        flags = check_sufficient_conditions(j)
        assert not flags.y_indep_a_given_x
        assert not flags.x_indep_a_given_y
        assert not flags.mean_independent

    def test_flags_match_direct_factorization(self):
        rng = np.random.default_rng(9)
        j = joint_y_ci_a_given_x(rng)
        p = j.p
        # direct check: p(y, a | x) == p(y | x) p(a | x) cellwise
        worst = 0.0
        for xi in range(p.shape[1]):
            sl = p[:, xi, :] / p[:, xi, :].sum()
            worst = max(
                worst,
                float(
                    np.max(np.abs(sl - np.outer(sl.sum(axis=1), sl.sum(axis=0))))
                ),
            )
        assert (worst <= 1e-9) == check_sufficient_conditions(j).y_indep_a_given_x


class TestRecordsIngestion:
    def test_exact_moments(self):
        y = [1.0, 3.0, 2.0, 4.0]
        x = [0.0, 1.0, 0.0, 2.0]
        a = ["u", "u", "v", "v"]
        summ = summary_from_records(y, x, a)
        u, v = summ.strata
        assert u.label == "u" and v.label == "v"
        assert u.pi == 0.5
        assert u.mu_x == 0.5
        assert u.beta == pytest.approx(2.0)  # cov = 0.5, var = 0.25... cov/var
        assert u.alpha == pytest.approx(1.0)
        assert v.beta == pytest.approx(1.0)

    def test_population_divisor(self):
        summ = summary_from_records([0.0, 1.0], [0.0, 1.0], ["g", "g"])
        assert summ.strata[0].s_xx == pytest.approx(0.25)

    def test_degenerate_x_rejected(self):
        with pytest.raises(DistributionError):
            summary_from_records([1.0, 2.0], [1.0, 1.0], ["g", "g"])

    def test_misaligned_rejected(self):
        with pytest.raises(DistributionError):
            summary_from_records([1.0], [1.0, 2.0], ["g", "g"])

    def test_roundtrip_through_audit(self):
        rng = np.random.default_rng(10)
        n = 60
        a = rng.choice(["p", "q", "r"], n)
        x = rng.normal(size=n)
        y = 1.5 * x + rng.normal(size=n)
        summ = summary_from_records(y, x, a)
        assert sum(s.pi for s in summ.strata) == pytest.approx(1.0)
        v = check_a_collapsibility(summ)
        assert v.beta_gap == pytest.approx(v.identity_gap / (
            np.dot([s.pi for s in summ.strata], [s.s_xx for s in summ.strata])
            + np.cov(
                [s.mu_x for s in summ.strata],
                aweights=[s.pi for s in summ.strata],
                ddof=0,
            )
        ), rel=1e-6)
