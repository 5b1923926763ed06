// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure.  Tolerances are pinned in code, not configurable.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "mapmom/cli.hpp"
#include "mapmom/crosscheck.hpp"
#include "mapmom/mc.hpp"
#include "mapmom/mmgou.hpp"

using namespace mapmom;

namespace {

int failures = 0;

struct Criterion {
    std::string name;
    bool ok = true;
    std::vector<std::string> details;
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();

    explicit Criterion(std::string n) : name(std::move(n)) {}
    void require(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            details.push_back(what);
        }
    }
    void finish() {
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %s (%.2fs)\n", ok ? "PASS" : "FAIL", name.c_str(), secs);
        for (const auto& d : details) std::printf("        %s\n", d.c_str());
        if (!ok) ++failures;
        std::fflush(stdout);
    }
};

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) d = std::max(d, std::fabs(a(i, j) - b(i, j)));
    return d;
}

double vsum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

void criterion_1_identity_suite() {
    Criterion c("1 identity suite: Psi_xi(-1)=Q^T+eps[U], Psi_xi(-2)=Q^T+2eps[U]+eps[[U,U]], 100 models, 1e-10");
    double worst = 0.0;
    for (uint64_t s = 1; s <= 100; ++s) {
        const MapModel m = testutil::random_model(1000 + s);
        const Matrix qt = m.q.transpose();
        const double d1 = max_abs_diff(psi_xi_matrix(m, 1), qt + eps_u(m));
        const double d2 = max_abs_diff(psi_xi_matrix(m, 2), qt + 2.0 * eps_u(m) + eps_uu(m));
        worst = std::max({worst, d1, d2});
    }
    c.require(worst < 1e-10, "worst deviation " + fmt(worst));
    c.details.push_back("worst deviation " + fmt(worst));
    c.finish();
}

void criterion_2_dual_identity() {
    Criterion c("2 dual identity: Psi_X*(w) ~ Psi_X(-w)^T conjugated by diag(pi), 20 models, 1e-10");
    // orientation note: with row = target state (Psi(0) = Q^T) and the
    // reversal q*_ij = (pi_j/pi_i) q_ji, the similarity reads
    // Psi_X*(w) = diag(pi) Psi_X(-w)^T diag(pi)^{-1}
    double worst = 0.0;
    for (uint64_t s = 1; s <= 20; ++s) {
        const MapModel m = testutil::random_model(2000 + s, 3);
        const MapModel d = dual_model(m, DualComponents::Both);
        for (double w : {-1.0, -0.5, 0.5}) {
            const Matrix lhs = matrix_exponent(d, Component::Xi, w);
            const Matrix psi = matrix_exponent(m, Component::Xi, -w);
            Matrix rhs(m.n_states, m.n_states);
            for (int i = 0; i < m.n_states; ++i)
                for (int j = 0; j < m.n_states; ++j) rhs(i, j) = m.pi[i] * psi(j, i) / m.pi[j];
            worst = std::max(worst, max_abs_diff(lhs, rhs));
        }
    }
    c.require(worst < 1e-10, "worst deviation " + fmt(worst));
    c.details.push_back("worst deviation " + fmt(worst));
    c.finish();
}

void criterion_3_ou_reduction() {
    Criterion c("3 Levy/OU reduction: mu1=0, mu2=0.5 (1e-12); acf e^{-h}/2 (1e-10)");
    const MapModel ou = testutil::model_ou1(1.0, 1.0);
    const MomentLadder lad = stationary_moments(ou, 2);
    c.require(std::fabs(lad.mu[1]) < 1e-15, "mu1 = " + fmt(lad.mu[1]));
    c.require(std::fabs(lad.mu[2] - 0.5) < 1e-12, "mu2 = " + fmt(lad.mu[2]));
    for (double h : {0.0, 0.5, 1.0, 2.0}) {
        const double cov = autocovariance(ou, 0.0, h, AcfStart::stationary_start());
        c.require(std::fabs(cov - 0.5 * std::exp(-h)) < 1e-10,
                  "acf(" + fmt(h) + ") = " + fmt(cov));
    }
    c.finish();
}

void criterion_4_mc_crosscheck() {
    Criterion c("4 MC cross-check: quick suite on Models A and B, N=200000, substeps=256, |z|<=4");
    SimConfig cfg;
    cfg.n_paths = 200000;
    cfg.substeps = 256;
    cfg.master_seed = 20240817;
    const MapModel a = testutil::model_a();
    const MapModel b = testutil::model_b();
    for (const auto& [name, model] : {std::pair<const char*, const MapModel*>{"A", &a},
                                      std::pair<const char*, const MapModel*>{"B", &b}}) {
        const CrosscheckResult res = run_crosscheck(*model, "quick", cfg);
        for (const auto& row : res.rows) {
            if (!row.applicable) {
                c.details.push_back(std::string("model ") + name + " " + row.name +
                                    ": skipped (" + row.note + ")");
                continue;
            }
            c.require(row.pass, std::string("model ") + name + " " + row.name +
                                    ": z = " + fmt(row.z));
            c.details.push_back(std::string("model ") + name + " " + row.name + ": closed " +
                                fmt(row.closed) + ", mc " + fmt(row.mc) + ", z " + fmt(row.z));
        }
    }
    // the return-time row of Model A checks the exact value 1/6
    const auto ret = return_time_exp_moment(a, Component::Xi, 0, -1.0);
    c.require(std::fabs(ret.value - 1.0 / 6.0) < 1e-12,
              "return-time closed form " + fmt(ret.value) + " != 1/6");
    c.finish();
}

void criterion_5_recursion_consistency() {
    Criterion c("5 recursion: k=2 equals the direct display (1e-10); k=3 vs long-run MC, |z|<=4");
    const MapModel b = testutil::model_b();
    const MomentLadder lad2 = stationary_moments(b, 2);
    const auto rec2 = stationary_moment_recursion_step(b, 2, {lad2.m_hat[0], lad2.m_hat[1]});
    double worst = 0.0;
    for (int i = 0; i < b.n_states; ++i) worst = std::max(worst, std::fabs(rec2[i] - lad2.m_hat[2][i]));
    for (uint64_t s = 1; s <= 10; ++s) {
        MapModel m = testutil::random_model(3000 + s, 2);
        m.dynamics[0].drift_xi = 1.2;
        m.dynamics[1].drift_xi = 2.1;
        m.dynamics[0].sigma2_xi = m.dynamics[1].sigma2_xi = 0.0;
        m.dynamics[0].sigma_xi_eta = m.dynamics[1].sigma_xi_eta = 0.0;
        m.dynamics[0].cp_rate = m.dynamics[1].cp_rate = 0.0;
        m.validate_and_finalize();
        if (!stationarity_check(m, 2.0).exists) continue;
        const MomentLadder l = stationary_moments(m, 2);
        const auto r = stationary_moment_recursion_step(m, 2, {l.m_hat[0], l.m_hat[1]});
        for (int i = 0; i < m.n_states; ++i)
            worst = std::max(worst, std::fabs(r[i] - l.m_hat[2][i]));
    }
    c.require(worst < 1e-10, "k=2 recursion-vs-display worst " + fmt(worst));
    c.details.push_back("k=2 worst deviation " + fmt(worst));

    // k=3 on Model B against the long-run MC third moment
    SimConfig cfg;
    cfg.n_paths = 200000;
    cfg.substeps = 256;
    cfg.master_seed = 20240818;
    const MomentLadder lad3 = stationary_moments(b, 3);
    const StationaryEstimates mc = sample_stationary(b, StationaryMode::Forward, cfg, 3, 12.0);
    const double z = (mc.moments[2].mean - lad3.mu[3]) / mc.moments[2].std_error;
    c.require(std::fabs(z) <= 4.0, "Model B mu3 z = " + fmt(z));
    c.details.push_back("Model B mu3 closed " + fmt(lad3.mu[3]) + ", mc " +
                        fmt(mc.moments[2].mean) + ", z " + fmt(z));

    // asymmetric variant (eta drift) exercises the odd-moment terms of the
    // regrouping for real
    const MapModel bd = testutil::model_b_drift();
    const MomentLadder ladd = stationary_moments(bd, 3);
    SimConfig cfg2 = cfg;
    cfg2.master_seed = 20240819;
    const StationaryEstimates mcd = sample_stationary(bd, StationaryMode::Forward, cfg2, 3, 12.0);
    const double zd = (mcd.moments[2].mean - ladd.mu[3]) / mcd.moments[2].std_error;
    c.require(std::fabs(zd) <= 4.0, "asymmetric-L mu3 z = " + fmt(zd));
    c.details.push_back("asymmetric-L mu3 closed " + fmt(ladd.mu[3]) + ", mc " +
                        fmt(mcd.moments[2].mean) + ", z " + fmt(zd));
    c.finish();
}

void criterion_6_degenerate_modulation() {
    Criterion c("6 degenerate modulation: identical 2-state dynamics reproduce 1-state outputs, 1e-10");
    MapModel two;
    two.n_states = 2;
    two.q = Matrix{{-0.7, 0.7}, {1.3, -1.3}};
    two.dynamics.resize(2);
    for (auto& d : two.dynamics) {
        d.drift_xi = 1.0;
        d.drift_eta = 0.25;
        d.sigma2_eta = 1.0;
    }
    two.validate_and_finalize();
    MapModel one = testutil::model_ou1(1.0, 1.0);
    one.dynamics[0].drift_eta = 0.25;
    one.validate_and_finalize();

    const std::vector<double> z2(2, 0.0), z1(1, 0.0);
    for (double t : {0.5, 1.0, 3.0}) {
        const double m2s = mean(two, Component::Xi, StartSpec::at(0), t);
        const double m1s = mean(one, Component::Xi, StartSpec::at(0), t);
        c.require(std::fabs(m2s - m1s) < 1e-10, "mean at t=" + fmt(t));
        const double v2s = variance(two, Component::Eta, 0, t);
        const double v1s = variance(one, Component::Eta, 0, t);
        c.require(std::fabs(v2s - v1s) < 1e-10, "variance at t=" + fmt(t));
        const double r2s = running_mean(two, z2, StartSpec::at(1), t);
        const double r1s = running_mean(one, z1, StartSpec::at(0), t);
        c.require(std::fabs(r2s - r1s) < 1e-10, "running mean at t=" + fmt(t));
    }
    const MomentLadder l2 = stationary_moments(two, 3);
    const MomentLadder l1 = stationary_moments(one, 3);
    for (int k = 1; k <= 3; ++k)
        c.require(std::fabs(l2.mu[k] - l1.mu[k]) < 1e-10, "mu_" + std::to_string(k));
    for (double h : {0.5, 1.0, 2.0}) {
        const double a2 = autocovariance(two, 0.0, h, AcfStart::stationary_start());
        const double a1 = autocovariance(one, 0.0, h, AcfStart::stationary_start());
        c.require(std::fabs(a2 - a1) < 1e-10, "acf at h=" + fmt(h));
    }
    const StationaryReport s2 = stationarity_check(two, 2.0);
    const StationaryReport s1 = stationarity_check(one, 2.0);
    c.require(s2.exists == s1.exists, "stationarity certificates disagree");
    c.finish();
}

void criterion_7_existence_checkers() {
    Criterion c("7 existence checkers: exact pareto(1.5)/exponential pass-fail patterns");
    MapModel normal = testutil::model_b();
    normal.dynamics[0].cp_rate = 1.0;
    normal.dynamics[0].cp_law =
        BivariateJumpLaw::independent(JumpLaw::normal(0.0, 1.0), JumpLaw::normal(0.0, 1.0));
    normal.validate_and_finalize();
    c.require(moment_exists(normal, Component::Xi, 7.0).ok, "all-normal kappa=7 should pass");

    MapModel heavy = testutil::model_b();
    heavy.dynamics[1].cp_rate = 1.0;
    heavy.dynamics[1].cp_law =
        BivariateJumpLaw::independent(JumpLaw::pareto(1.5, 1.0, 1), JumpLaw::constant(0.0));
    heavy.validate_and_finalize();
    const auto k2 = moment_exists(heavy, Component::Xi, 2.0);
    c.require(!k2.ok, "pareto(1.5) kappa=2 should fail");
    c.require(!k2.failures.empty() && k2.failures[0].find("state 2") != std::string::npos,
              "failure should name state 2");
    c.require(moment_exists(heavy, Component::Xi, 1.2).ok, "pareto(1.5) kappa=1.2 should pass");

    MapModel expo = testutil::model_b();
    expo.dynamics[0].cp_rate = 1.0;
    expo.dynamics[0].cp_law =
        BivariateJumpLaw::independent(JumpLaw::exponential(1.0, 1), JumpLaw::constant(0.0));
    expo.validate_and_finalize();
    c.require(exp_moment_exists(normal, Component::Xi, 2.0).ok, "normal exp-moment should pass");
    c.require(!exp_moment_exists(expo, Component::Xi, 2.0).ok,
              "exponential(1) kappa=2 should fail");
    c.require(exp_moment_exists(expo, Component::Xi, 0.5).ok,
              "exponential(1) kappa=0.5 should pass");

    // stationarity pattern on Model B at kappa=2 and its broken variants
    const StationaryReport okrep = stationarity_check(testutil::model_b(), 2.0);
    c.require(okrep.cond_psi_vs_exit_rate && okrep.cond_return_ratio &&
                  okrep.cond_leading_eigenvalue && okrep.cond_l_moments && okrep.exists,
              "Model B kappa=2 should pass all four conditions");
    MapModel neg = testutil::model_b();
    neg.dynamics[0].drift_xi = -1.0;
    neg.dynamics[1].drift_xi = -2.0;
    neg.validate_and_finalize();
    const StationaryReport negrep = stationarity_check(neg, 1.0);
    c.require(!negrep.cond_leading_eigenvalue && !negrep.exists,
              "negative drifts should fail (iii)");
    MapModel hv = testutil::model_b();
    hv.dynamics[0].cp_rate = 1.0;
    hv.dynamics[0].cp_law =
        BivariateJumpLaw::independent(JumpLaw::constant(0.0), JumpLaw::pareto(1.5, 1.0, 1));
    hv.validate_and_finalize();
    const StationaryReport hvrep = stationarity_check(hv, 2.0);
    c.require(!hvrep.cond_l_moments && !hvrep.exists, "pareto eta jumps should fail (iv)");
    c.finish();
}

void criterion_8_derivative_identity() {
    Criterion c("8 derivative identity: central-difference d lambda_max/dw at 0 vs mean_rate, 20 models, 1e-6");
    const double h = 1e-5;
    double worst = 0.0;
    for (uint64_t s = 1; s <= 20; ++s) {
        const MapModel m = testutil::random_model(4000 + s, 3);
        const double lp = leading_eigenvalue(matrix_exponent(m, Component::Xi, h));
        const double lm = leading_eigenvalue(matrix_exponent(m, Component::Xi, -h));
        const double fd = (lp - lm) / (2.0 * h);
        const double mr = mean_rate(m, Component::Xi);
        worst = std::max(worst, std::fabs(fd - mr) / std::max(1.0, std::fabs(mr)));
    }
    c.require(worst < 1e-6, "worst relative deviation " + fmt(worst));
    c.details.push_back("worst relative deviation " + fmt(worst));
    c.finish();
}

void criterion_9_determinism() {
    Criterion c("9 determinism: crosscheck twice with one seed gives byte-identical CSV bodies");
    const std::string model_path = "/tmp/mapmom_acceptance_model_b.json";
    {
        std::ofstream f(model_path);
        f << R"({"states":2,"Q":[[-1,1],[1,-1]],
                 "dynamics":[{"drift_xi":1,"sigma2_eta":1},{"drift_xi":2,"sigma2_eta":4}]})";
    }
    auto run_once = [&]() {
        std::ostringstream out, err;
        const int code = cli::run({"crosscheck", model_path, "--suite", "quick", "--paths", "2000",
                                   "--seed", "7", "--substeps", "32"},
                                  out, err);
        // strip the isolated timestamp line
        std::istringstream in(out.str());
        std::ostringstream body;
        std::string line;
        while (std::getline(in, line))
            if (line.rfind("# timestamp:", 0) != 0) body << line << "\n";
        return std::make_pair(code, body.str());
    };
    const auto r1 = run_once();
    const auto r2 = run_once();
    c.require(r1.second == r2.second, "CSV bodies differ");
    c.require(!r1.second.empty(), "empty output");
    c.finish();
}

}  // namespace

int main() {
    criterion_1_identity_suite();
    criterion_2_dual_identity();
    criterion_3_ou_reduction();
    criterion_4_mc_crosscheck();
    criterion_5_recursion_consistency();
    criterion_6_degenerate_modulation();
    criterion_7_existence_checkers();
    criterion_8_derivative_identity();
    criterion_9_determinism();
    if (failures) {
        std::printf("%d criterion(s) FAILED\n", failures);
        return 1;
    }
    std::printf("all acceptance criteria PASSED\n");
    return 0;
}
