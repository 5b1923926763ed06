#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "common.hpp"
#include "mapmom/crosscheck.hpp"
#include "mapmom/mc.hpp"
#include "mapmom/mmgou.hpp"

using namespace mapmom;

namespace {

double zscore(double est, double closed, double se) {
    return se > 0.0 ? (est - closed) / se : (std::fabs(est - closed) < 1e-12 ? 0.0 : 1e9);
}

SimConfig quick(long n, double horizon, int substeps = 1, uint64_t seed = 777) {
    SimConfig cfg;
    cfg.n_paths = n;
    cfg.horizon = horizon;
    cfg.substeps = substeps;
    cfg.master_seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("determinism: identical seed and cfg give identical stats, any thread count") {
    const MapModel b = testutil::model_b_drift();
    SimConfig cfg = quick(20000, 1.0, 32);
    cfg.threads = 1;
    const MmgouEstimates a1 = simulate_mmgou(b, 0.0, StartSpec::at(0), cfg);
    cfg.threads = 4;
    const MmgouEstimates a2 = simulate_mmgou(b, 0.0, StartSpec::at(0), cfg);
    cfg.threads = 3;
    const MmgouEstimates a3 = simulate_mmgou(b, 0.0, StartSpec::at(0), cfg);
    CHECK(a1.v.mean == a2.v.mean);
    CHECK(a1.v_sq.mean == a2.v_sq.mean);
    CHECK(a1.v.std_error == a2.v.std_error);
    CHECK(a2.v.mean == a3.v.mean);
    for (size_t i = 0; i < a1.v.hat.size(); ++i) CHECK(a1.v.hat[i] == a2.v.hat[i]);
}

TEST_CASE("hat components sum to the scalar estimate") {
    const MapModel a = testutil::model_a();
    const MapEstimates est = simulate_map(a, StartSpec::stationary(), quick(5000, 1.0));
    double s = 0.0;
    for (double h : est.xi.hat) s += h;
    CHECK(s == doctest::Approx(est.xi.mean).epsilon(1e-12));
}

TEST_CASE("zero-dynamics model stays at zero; pure drift is exact") {
    MapModel zero;
    zero.n_states = 2;
    zero.q = Matrix{{-1.0, 1.0}, {1.0, -1.0}};
    zero.dynamics.resize(2);
    zero.validate_and_finalize();
    const MapEstimates ez = simulate_map(zero, StartSpec::at(0), quick(200, 2.0));
    CHECK(ez.xi.mean == 0.0);
    CHECK(ez.eta.variance == 0.0);

    const MapModel drift = testutil::model_ou1(1.3, 0.0);
    const MapEstimates ed = simulate_map(drift, StartSpec::at(0), quick(200, 2.0));
    CHECK(ed.xi.mean == doctest::Approx(2.6).epsilon(1e-12));
    CHECK(ed.xi.variance == doctest::Approx(0.0));
}

TEST_CASE("chain marginal: occupation fractions over horizon 100 match pi within 4 SE") {
    // started under pi the occupation estimator is exactly unbiased; a fixed
    // start carries an O(1/T) burn-in bias comparable to 4 SE at T=100
    const MapModel m = testutil::random_model(17, 3, false, false);
    const MapEstimates est = simulate_map(m, StartSpec::stationary(), quick(2000, 100.0));
    for (int j = 0; j < m.n_states; ++j) {
        CHECK(std::fabs(est.occupation[j] - m.pi[j]) <= 4.0 * est.occupation_se[j]);
    }
}

TEST_CASE("MAP mean and variance vs closed forms within 4 SE (Model A)") {
    const MapModel a = testutil::model_a();
    const MapEstimates under_pi = simulate_map(a, StartSpec::stationary(), quick(200000, 1.0));
    CHECK(std::fabs(zscore(under_pi.xi.mean, mean_rate(a, Component::Xi), under_pi.xi.std_error)) <=
          4.0);

    const MapEstimates from1 = simulate_map(a, StartSpec::at(0), quick(200000, 1.0, 1, 778));
    CHECK(std::fabs(zscore(from1.xi.variance, variance(a, Component::Xi, 0, 1.0),
                           from1.xi.var_std_error)) <= 4.0);

    // mean-hat entries within 4 SE: hat SEs are bounded by the scalar SE
    const auto hat = mean_hat(a, Component::Xi, 0, 1.0);
    for (int j = 0; j < 2; ++j)
        CHECK(std::fabs(from1.xi.hat[j] - hat[j]) <= 4.0 * from1.xi.std_error);
}

TEST_CASE("characteristic function: E_i[e^{w xi_t} 1{J_t=j}] matches e_j^T e^{t Psi} e_i") {
    const MapModel a = testutil::model_a();
    const Matrix p = expm(matrix_exponent(a, Component::Xi, 0.3), 1.0);
    for (int target : {0, 1}) {
        const EnsembleStats est =
            simulate_char_function(a, Component::Xi, 0, target, 0.3, quick(200000, 1.0, 1, 779));
        CHECK(std::fabs(zscore(est.mean, p(target, 0), est.std_error)) <= 4.0);
    }
}

TEST_CASE("MMGOU running mean and second moment vs closed forms (Model B with L drift)") {
    const MapModel b = testutil::model_b_drift();
    const std::vector<double> zero(2, 0.0);
    const double closed_mean = running_mean(b, zero, StartSpec::at(0), 1.0);
    const auto tm = transient_second_moment_hat(b, zero, zero, StartSpec::at(0), 1.0);
    double closed_m2 = 0.0;
    for (double x : tm.second_hat) closed_m2 += x;

    const MmgouEstimates est = simulate_mmgou(b, 0.0, StartSpec::at(0), quick(100000, 1.0, 256, 780));
    CHECK(std::fabs(zscore(est.v.mean, closed_mean, est.v.std_error)) <= 4.0);
    CHECK(std::fabs(zscore(est.v_sq.mean, closed_m2, est.v_sq.std_error)) <= 4.0);
}

TEST_CASE("MMGOU with L == 0 and deterministic xi: V_t = e^{-at} exactly at grid points") {
    const MapModel dr = testutil::model_ou1(0.8, 0.0);
    const MmgouEstimates est = simulate_mmgou(dr, 1.0, StartSpec::at(0), quick(50, 1.0, 16));
    CHECK(est.v.mean == doctest::Approx(std::exp(-0.8)).epsilon(1e-12));
    CHECK(est.v.variance == doctest::Approx(0.0));
}

TEST_CASE("stationary sampling: classical OU, forward and dual modes agree on 0.5") {
    const MapModel ou = testutil::model_ou1(1.0, 1.0);
    SimConfig cfg = quick(30000, 1.0, 256, 781);
    const StationaryEstimates fwd = sample_stationary(ou, StationaryMode::Forward, cfg, 2);
    const StationaryEstimates dual = sample_stationary(ou, StationaryMode::Dual, cfg, 2);
    CHECK(std::fabs(zscore(fwd.moments[1].mean, 0.5, fwd.moments[1].std_error)) <= 4.0);
    CHECK(std::fabs(zscore(dual.moments[1].mean, 0.5, dual.moments[1].std_error)) <= 4.0);
    const double comb =
        std::sqrt(std::pow(fwd.moments[1].std_error, 2) + std::pow(dual.moments[1].std_error, 2));
    CHECK(std::fabs(fwd.moments[1].mean - dual.moments[1].mean) <= 4.0 * comb);
    CHECK(fwd.truncation_scale < 1e-3);
}

TEST_CASE("stationary sampling: Model B forward vs dual and vs the moment ladder") {
    const MapModel b = testutil::model_b();
    const MomentLadder lad = stationary_moments(b, 2);
    SimConfig cfg = quick(30000, 1.0, 256, 782);
    const StationaryEstimates fwd = sample_stationary(b, StationaryMode::Forward, cfg, 2);
    const StationaryEstimates dual = sample_stationary(b, StationaryMode::Dual, cfg, 2);
    CHECK(std::fabs(zscore(fwd.moments[1].mean, lad.mu[2], fwd.moments[1].std_error)) <= 4.0);
    const double comb =
        std::sqrt(std::pow(fwd.moments[1].std_error, 2) + std::pow(dual.moments[1].std_error, 2));
    CHECK(std::fabs(fwd.moments[1].mean - dual.moments[1].mean) <= 4.0 * comb);
}

TEST_CASE("stationary sampling: non-stationary model warns and requires force") {
    MapModel m = testutil::model_b();
    m.dynamics[0].drift_xi = -1.0;
    m.dynamics[1].drift_xi = -2.0;
    m.validate_and_finalize();
    SimConfig cfg = quick(100, 1.0, 16);
    CHECK_THROWS_AS(sample_stationary(m, StationaryMode::Forward, cfg, 2), PreconditionError);
    const StationaryEstimates est = sample_stationary(m, StationaryMode::Forward, cfg, 2, 2.0, true);
    CHECK(est.stationarity_warning);
}

TEST_CASE("return-time functional: Model A kappa=-1 matches 1/6 within 4 SE") {
    const ReturnEstimate est =
        estimate_return_exp_moment(testutil::model_a(), Component::Xi, 0, -1.0, quick(100000, 1.0));
    CHECK(std::fabs(zscore(est.stat.mean, 1.0 / 6.0, est.stat.std_error)) <= 4.0);
    CHECK(!est.unstable);
}

TEST_CASE("return-time functional: heavy tail fails to stabilize and is flagged") {
    MapModel heavy = testutil::model_a();
    heavy.dynamics[0].cp_rate = 1.0;
    heavy.dynamics[0].cp_law =
        BivariateJumpLaw::independent(JumpLaw::pareto(1.1, 1.0, 1), JumpLaw::constant(0.0));
    heavy.validate_and_finalize();
    const ReturnEstimate est =
        estimate_return_exp_moment(heavy, Component::Xi, 0, 1.0, quick(20000, 1.0, 1, 784));
    CHECK(est.unstable);
}

TEST_CASE("autocovariance estimator vs closed form at lags 0.5 and 1") {
    const MapModel b = testutil::model_b();
    const MomentLadder lad = stationary_moments(b, 2);
    const std::vector<double> lags{0.5, 1.0};
    const AcfEstimates est = simulate_autocovariance(b, lags, 8.0, quick(40000, 1.0, 256, 785));
    for (size_t i = 0; i < lags.size(); ++i) {
        const double closed =
            autocovariance(b, 0.0, lags[i], AcfStart::stationary_start()) + lad.mu[1] * lad.mu[1];
        CHECK(std::fabs(zscore(est.product[i].mean, closed, est.product[i].std_error)) <= 4.0);
    }
}

TEST_CASE("Euler bias: strictly monotone toward the closed form on a stiff scalar OU") {
    // a = 5: the left-point update inflates E[V_1^2] by about a*delta
    const MapModel stiff = testutil::model_ou1(5.0, 1.0);
    const double closed = (1.0 - std::exp(-10.0)) / 10.0;
    double prev_err = 1e9;
    for (int sub : {64, 128, 256}) {
        const MmgouEstimates est =
            simulate_mmgou(stiff, 0.0, StartSpec::at(0), quick(100000, 1.0, sub, 786));
        const double err = std::fabs(est.v_sq.mean - closed);
        CHECK(err < prev_err);
        prev_err = err;
    }
}

TEST_CASE("Euler bias shrinks at least linearly in 1/substeps on Model B") {
    const MapModel b = testutil::model_b();
    const std::vector<double> zero(2, 0.0);
    const auto tm = transient_second_moment_hat(b, zero, zero, StartSpec::at(0), 1.0);
    double closed = 0.0;
    for (double x : tm.second_hat) closed += x;
    const MmgouEstimates c64 = simulate_mmgou(b, 0.0, StartSpec::at(0), quick(200000, 1.0, 64, 787));
    const MmgouEstimates c256 =
        simulate_mmgou(b, 0.0, StartSpec::at(0), quick(200000, 1.0, 256, 787));
    const double e64 = std::fabs(c64.v_sq.mean - closed);
    const double e256 = std::fabs(c256.v_sq.mean - closed);
    // linear decay predicts a factor 4; noise allows asking for 2
    CHECK(e64 > 2.0 * e256 - 4.0 * c256.v_sq.std_error);
    CHECK(e64 > e256);
}

TEST_CASE("antithetic pairs: estimates stay consistent with closed forms") {
    const MapModel a = testutil::model_a();
    SimConfig cfg = quick(100000, 1.0);
    cfg.antithetic = true;
    const MapEstimates est = simulate_map(a, StartSpec::stationary(), cfg);
    CHECK(std::fabs(zscore(est.xi.mean, 1.5, est.xi.std_error)) <= 4.0);
}

TEST_CASE("crosscheck quick suite passes on Models A and B at reduced path count") {
    SimConfig cfg;
    cfg.n_paths = 20000;
    cfg.substeps = 128;
    cfg.master_seed = 20240817;
    for (const MapModel& m : {testutil::model_a(), testutil::model_b()}) {
        const CrosscheckResult res = run_crosscheck(m, "quick", cfg);
        for (const auto& row : res.rows) {
            INFO(row.name, " closed=", row.closed, " mc=", row.mc, " z=", row.z);
            CHECK((row.applicable ? row.pass : true));
        }
        CHECK(res.all_pass);
    }
}

TEST_CASE("transient autocovariance from a deterministic start matches MC") {
    // validates the c1/c2 assembly at a base time s > 0 (non-stationary start)
    const MapModel b = testutil::model_b_drift();
    const double s = 0.7, h = 0.5;
    const double closed_cov = autocovariance(b, s, s + h, AcfStart::from_state(0, 0.0, 0.0));

    const std::vector<double> zero(2, 0.0);
    const double mean_s = running_mean(b, zero, StartSpec::at(0), s);
    const double mean_sh = running_mean(b, zero, StartSpec::at(0), s + h);
    const double closed_product = closed_cov + mean_s * mean_sh;

    const AcfEstimates est =
        simulate_autocovariance(b, {h}, s, quick(150000, 1.0, 256, 788), StartSpec::at(0), 0.0);
    CHECK(std::fabs(zscore(est.product[0].mean, closed_product, est.product[0].std_error)) <= 4.0);
    CHECK(std::fabs(zscore(est.base.mean, mean_s, est.base.std_error)) <= 4.0);
}

TEST_CASE("crosscheck full suite passes on Model B with drift at reduced path count") {
    SimConfig cfg;
    cfg.n_paths = 15000;
    cfg.substeps = 128;
    cfg.master_seed = 20240820;
    const CrosscheckResult res = run_crosscheck(testutil::model_b_drift(), "full", cfg);
    bool saw_charfn = false, saw_dual = false, saw_mu3 = false;
    for (const auto& row : res.rows) {
        INFO(row.name, " closed=", row.closed, " mc=", row.mc, " z=", row.z);
        CHECK((row.applicable ? row.pass : true));
        saw_charfn |= row.name.find("charfn") != std::string::npos;
        saw_dual |= row.name.find("dual") != std::string::npos;
        saw_mu3 |= row.name.find("mu3") != std::string::npos;
    }
    CHECK(res.all_pass);
    CHECK(saw_charfn);
    CHECK(saw_dual);
    CHECK(saw_mu3);
}

TEST_CASE("random jump model: walker matches closed mean and variance within 4 SE") {
    // exercises CP events, transition jumps and correlated Gaussians together
    for (uint64_t s : {901u, 902u}) {
        const MapModel m = testutil::random_model(s, 3);
        const MapEstimates est = simulate_map(m, StartSpec::at(1), quick(150000, 1.0, 1, 790 + s));
        for (Component c : {Component::Xi, Component::Eta}) {
            const EnsembleStats& e = c == Component::Xi ? est.xi : est.eta;
            const double mu = mean(m, c, StartSpec::at(1), 1.0);
            const double va = variance(m, c, 1, 1.0);
            CHECK(std::fabs(zscore(e.mean, mu, e.std_error)) <= 4.0);
            CHECK(std::fabs(zscore(e.variance, va, e.var_std_error)) <= 4.0);
        }
    }
}

TEST_CASE("forward and dual stationary sampling agree on a model with jumps") {
    // validates the dual representation end to end: the (xi,L) transform,
    // the time reversal, and left-limit weighting of the jump contributions
    MapModel m = testutil::model_b();
    m.dynamics[0].cp_rate = 0.6;
    m.dynamics[0].cp_law = BivariateJumpLaw::independent(
        JumpLaw::discrete({{-0.2, 0.5}, {0.4, 0.5}}), JumpLaw::discrete({{-0.5, 0.5}, {0.3, 0.5}}));
    m.dynamics[1].cp_rate = 0.4;
    m.dynamics[1].cp_law = BivariateJumpLaw::joint_discrete({{0.3, -0.2, 0.5}, {-0.1, 0.4, 0.5}});
    m.transition_jumps.emplace(
        std::make_pair(0, 1),
        BivariateJumpLaw::independent(JumpLaw::constant(0.15), JumpLaw::constant(-0.1)));
    m.transition_jumps.emplace(
        std::make_pair(1, 0),
        BivariateJumpLaw::independent(JumpLaw::discrete({{-0.1, 0.5}, {0.2, 0.5}}),
                                      JumpLaw::constant(0.05)));
    m.validate_and_finalize();
    REQUIRE(stationarity_check(m, 2.0).exists);

    const MomentLadder lad = stationary_moments(m, 2);
    SimConfig cfg = quick(60000, 1.0, 256, 791);
    const StationaryEstimates fwd = sample_stationary(m, StationaryMode::Forward, cfg, 2);
    SimConfig cfg2 = quick(60000, 1.0, 256, 792);
    const StationaryEstimates dual = sample_stationary(m, StationaryMode::Dual, cfg2, 2);
    for (int k : {0, 1}) {
        const double comb = std::sqrt(std::pow(fwd.moments[k].std_error, 2) +
                                      std::pow(dual.moments[k].std_error, 2));
        INFO("k=", k + 1, " fwd=", fwd.moments[k].mean, " dual=", dual.moments[k].mean,
             " closed=", lad.mu[k + 1]);
        CHECK(std::fabs(fwd.moments[k].mean - dual.moments[k].mean) <= 4.0 * comb);
        CHECK(std::fabs(zscore(fwd.moments[k].mean, lad.mu[k + 1], fwd.moments[k].std_error)) <= 4.0);
        CHECK(std::fabs(zscore(dual.moments[k].mean, lad.mu[k + 1], dual.moments[k].std_error)) <=
              4.0);
    }
}

TEST_CASE("correlated Gaussian block: sigma_xi_eta pathway matches MC") {
    // the covariation term enters eps[L] as -sigma_xi_eta; this pins both the
    // closed forms and the discretization (the eta increment must ride inside
    // the e^{-dxi} factor, or the correction is lost entirely)
    MapModel m;
    m.n_states = 1;
    m.q = Matrix{{0.0}};
    m.dynamics.resize(1);
    m.dynamics[0].drift_xi = 1.5;
    m.dynamics[0].sigma2_xi = 0.25;
    m.dynamics[0].drift_eta = 0.5;
    m.dynamics[0].sigma2_eta = 0.5;
    m.dynamics[0].sigma_xi_eta = 0.25;
    m.validate_and_finalize();

    const std::vector<double> zero(1, 0.0);
    const double closed_mean = running_mean(m, zero, StartSpec::at(0), 1.0);
    // scalar check: (b - c)/(a - s2/2) * (1 - e^{-(a - s2/2)})
    const double eu = 1.5 - 0.125, el = 0.5 - 0.25;
    CHECK(closed_mean == doctest::Approx(el / eu * (1.0 - std::exp(-eu))).epsilon(1e-12));

    const MmgouEstimates est = simulate_mmgou(m, 0.0, StartSpec::at(0), quick(150000, 1.0, 256, 793));
    CHECK(std::fabs(zscore(est.v.mean, closed_mean, est.v.std_error)) <= 4.0);

    const auto tm = transient_second_moment_hat(m, zero, zero, StartSpec::at(0), 1.0);
    CHECK(std::fabs(zscore(est.v_sq.mean, tm.second_hat[0], est.v_sq.std_error)) <= 4.0);

    // stationary moments, forward and dual modes
    const MomentLadder lad = stationary_moments(m, 2);
    SimConfig cfg = quick(60000, 1.0, 256, 794);
    const StationaryEstimates fwd = sample_stationary(m, StationaryMode::Forward, cfg, 2);
    SimConfig cfg2 = quick(60000, 1.0, 256, 795);
    const StationaryEstimates dual = sample_stationary(m, StationaryMode::Dual, cfg2, 2);
    for (int k : {0, 1}) {
        CHECK(std::fabs(zscore(fwd.moments[k].mean, lad.mu[k + 1], fwd.moments[k].std_error)) <=
              4.0);
        CHECK(std::fabs(zscore(dual.moments[k].mean, lad.mu[k + 1], dual.moments[k].std_error)) <=
              4.0);
    }

    // 2-state variant with state-dependent correlation signs
    MapModel m2;
    m2.n_states = 2;
    m2.q = Matrix{{-1.0, 1.0}, {2.0, -2.0}};
    m2.dynamics.resize(2);
    m2.dynamics[0] = m.dynamics[0];
    m2.dynamics[1].drift_xi = 2.0;
    m2.dynamics[1].sigma2_xi = 0.16;
    m2.dynamics[1].drift_eta = -0.3;
    m2.dynamics[1].sigma2_eta = 1.0;
    m2.dynamics[1].sigma_xi_eta = -0.3;
    m2.validate_and_finalize();
    const std::vector<double> zero2(2, 0.0);
    const double cm2 = running_mean(m2, zero2, StartSpec::at(0), 1.0);
    const MmgouEstimates est2 =
        simulate_mmgou(m2, 0.0, StartSpec::at(0), quick(150000, 1.0, 256, 796));
    CHECK(std::fabs(zscore(est2.v.mean, cm2, est2.v.std_error)) <= 4.0);
}
