#include "mapmom/mmgou.hpp"

#include <cmath>
#include <functional>

namespace mapmom {

namespace {

std::vector<double> basis_vector(int n, int j) {
    std::vector<double> e(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    return e;
}

std::vector<double> start_vector(const MapModel& m, StartSpec s) {
    if (s.is_pi) return m.pi;
    if (s.state < 0 || s.state >= m.n_states) throw PreconditionError("start state out of range");
    return basis_vector(m.n_states, s.state);
}

double vsum(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

// diag + Q^T-weighted assembly around per-state / per-transition functionals
Matrix assemble(const MapModel& m, const std::function<double(const StateDynamics&)>& diag,
                const std::function<double(const BivariateJumpLaw&)>& jump, const char* who) {
    const int n = m.n_states;
    Matrix out(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const double v = diag(m.dynamics[j]);
        if (divergent(v) || !std::isfinite(v))
            throw DivergentMomentError(std::string(who) + ": divergent state functional at state " +
                                       std::to_string(j + 1));
        out(j, j) = v;
    }
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            if (a == b || !(m.q(b, a) > 0.0)) continue;
            const double v = jump(m.transition_law(b, a));
            if (divergent(v) || !std::isfinite(v))
                throw DivergentMomentError(std::string(who) + ": divergent jump functional at transition " +
                                           std::to_string(b + 1) + "->" + std::to_string(a + 1));
            out(a, b) = m.q(b, a) * v;
        }
    return out;
}

}  // namespace

Matrix psi_xi_matrix(const MapModel& m, int k) {
    if (k < 1) throw PreconditionError("psi_xi_matrix: k must be >= 1");
    return matrix_exponent(m, Component::Xi, -static_cast<double>(k));
}

Matrix eps_u(const MapModel& m) {
    return assemble(
        m,
        [](const StateDynamics& d) {
            double v = -d.drift_xi + 0.5 * d.sigma2_xi;
            if (d.cp_rate > 0.0) v += d.cp_rate * (d.cp_law.mixed_exp(-1.0, 0) - 1.0);
            return v;
        },
        [](const BivariateJumpLaw& l) { return l.mixed_exp(-1.0, 0) - 1.0; }, "eps_u");
}

Matrix eps_l(const MapModel& m) {
    return assemble(
        m,
        [](const StateDynamics& d) {
            double v = d.drift_eta - d.sigma_xi_eta;
            if (d.cp_rate > 0.0) v += d.cp_rate * d.cp_law.mixed_exp(-1.0, 1);
            return v;
        },
        [](const BivariateJumpLaw& l) { return l.mixed_exp(-1.0, 1); }, "eps_l");
}

Matrix eps_uu(const MapModel& m) {
    // E[(e^{-z}-1)^2] = E[e^{-2z}] - 2E[e^{-z}] + 1
    auto sq = [](const BivariateJumpLaw& l) {
        return l.mixed_exp(-2.0, 0) - 2.0 * l.mixed_exp(-1.0, 0) + 1.0;
    };
    return assemble(
        m,
        [&](const StateDynamics& d) {
            double v = d.sigma2_xi;
            if (d.cp_rate > 0.0) v += d.cp_rate * sq(d.cp_law);
            return v;
        },
        sq, "eps_uu");
}

Matrix eps_ul(const MapModel& m) {
    // E[(e^{-z}-1) e^{-z} x] = E[e^{-2z}x] - E[e^{-z}x]
    auto cross = [](const BivariateJumpLaw& l) {
        return l.mixed_exp(-2.0, 1) - l.mixed_exp(-1.0, 1);
    };
    return assemble(
        m,
        [&](const StateDynamics& d) {
            double v = -d.sigma_xi_eta;
            if (d.cp_rate > 0.0) v += d.cp_rate * cross(d.cp_law);
            return v;
        },
        cross, "eps_ul");
}

Matrix eps_ll(const MapModel& m) {
    auto sq = [](const BivariateJumpLaw& l) { return l.mixed_exp(-2.0, 2); };
    return assemble(
        m,
        [&](const StateDynamics& d) {
            double v = d.sigma2_eta;
            if (d.cp_rate > 0.0) v += d.cp_rate * sq(d.cp_law);
            return v;
        },
        sq, "eps_ll");
}

std::vector<double> running_mean_hat(const MapModel& m, const std::vector<double>& v0_hat,
                                     StartSpec start, double t) {
    if (t < 0.0) throw PreconditionError("running_mean: t must be >= 0");
    if (static_cast<int>(v0_hat.size()) != m.n_states)
        throw DimensionError("running_mean: v0_hat size mismatch");
    const auto exp_ok = exp_moment_exists(m, Component::Xi, 1.0);
    if (!exp_ok.ok)
        throw PreconditionError("running_mean: exponential moment of xi at kappa=1 fails: " +
                                exp_ok.failures.front());
    const Matrix psi1 = psi_xi_matrix(m, 1);
    const Matrix el = eps_l(m);
    const Matrix qt = m.q.transpose();
    std::vector<double> out = expm(psi1, t) * v0_hat;
    const std::vector<double> inhom = van_loan_single(psi1, el, qt, t) * start_vector(m, start);
    for (size_t i = 0; i < out.size(); ++i) out[i] += inhom[i];
    return out;
}

double running_mean(const MapModel& m, const std::vector<double>& v0_hat, StartSpec start,
                    double t) {
    return vsum(running_mean_hat(m, v0_hat, start, t));
}

TransientMoments transient_second_moment_hat(const MapModel& m,
                                             const std::vector<double>& v0_sq_hat,
                                             const std::vector<double>& v0_hat, StartSpec start,
                                             double t) {
    if (t < 0.0) throw PreconditionError("transient_second_moment: t must be >= 0");
    const int n = m.n_states;
    if (static_cast<int>(v0_sq_hat.size()) != n || static_cast<int>(v0_hat.size()) != n)
        throw DimensionError("transient_second_moment: v0 vector size mismatch");
    const auto exp_ok = exp_moment_exists(m, Component::Xi, 2.0);
    if (!exp_ok.ok)
        throw PreconditionError("transient_second_moment: exponential moment of xi at kappa=2 fails: " +
                                exp_ok.failures.front());
    const auto eta_ok = moment_exists(m, Component::Eta, 2.0);
    if (!eta_ok.ok)
        throw PreconditionError("transient_second_moment: second moment of eta fails: " +
                                eta_ok.failures.front());

    const Matrix psi2 = psi_xi_matrix(m, 2);
    const Matrix psi1 = psi_xi_matrix(m, 1);
    const Matrix qt = m.q.transpose();
    const Matrix coupling = 2.0 * (eps_l(m) + eps_ul(m));
    const Matrix ll = eps_ll(m);
    const Matrix el = eps_l(m);

    // d/dt (y; x; z) = [[Psi2, coupling, eps_LL], [0, Psi1, eps_L], [0, 0, Q^T]] (y; x; z)
    Matrix g(3 * n, 3 * n, 0.0);
    g.set_block(0, 0, psi2);
    g.set_block(0, n, coupling);
    g.set_block(0, 2 * n, ll);
    g.set_block(n, n, psi1);
    g.set_block(n, 2 * n, el);
    g.set_block(2 * n, 2 * n, qt);

    std::vector<double> w0(static_cast<size_t>(3 * n), 0.0);
    const std::vector<double> z0 = start_vector(m, start);
    for (int i = 0; i < n; ++i) {
        w0[i] = v0_sq_hat[i];
        w0[n + i] = v0_hat[i];
        w0[2 * n + i] = z0[i];
    }
    const std::vector<double> w = expm(g, t) * w0;
    TransientMoments out;
    out.second_hat.assign(w.begin(), w.begin() + n);
    out.mean_hat.assign(w.begin() + n, w.begin() + 2 * n);
    out.chain_hat.assign(w.begin() + 2 * n, w.end());
    return out;
}

double autocovariance(const MapModel& m, double s, double t, const AcfStart& start) {
    if (!(s >= 0.0) || t < s) throw PreconditionError("autocovariance: need 0 <= s <= t");
    const int n = m.n_states;

    std::vector<double> c1(static_cast<size_t>(n), 0.0), c2(static_cast<size_t>(n), 0.0);
    if (start.stationary) {
        const MomentLadder lad = stationary_moments(m, 2);
        for (int i = 0; i < n; ++i) {
            c1[i] = lad.m_hat[1][i] - m.pi[i] * lad.mu[1];
            c2[i] = lad.m_hat[2][i] - lad.m_hat[1][i] * lad.mu[1];
        }
    } else {
        std::vector<double> v0_hat(static_cast<size_t>(n), 0.0), v0_sq_hat(static_cast<size_t>(n), 0.0);
        v0_hat[start.state] = start.v0_mean;
        v0_sq_hat[start.state] = start.v0_var + start.v0_mean * start.v0_mean;
        const TransientMoments tm =
            transient_second_moment_hat(m, v0_sq_hat, v0_hat, StartSpec::at(start.state), s);
        const double ev = vsum(tm.mean_hat);
        for (int i = 0; i < n; ++i) {
            c1[i] = tm.mean_hat[i] - tm.chain_hat[i] * ev;
            c2[i] = tm.second_hat[i] - tm.mean_hat[i] * ev;
        }
    }

    Matrix k(2 * n, 2 * n, 0.0);
    k.set_block(0, 0, m.q.transpose());
    k.set_block(n, 0, eps_l(m));
    k.set_block(n, n, psi_xi_matrix(m, 1));
    std::vector<double> w0(static_cast<size_t>(2 * n));
    for (int i = 0; i < n; ++i) {
        w0[i] = c1[i];
        w0[n + i] = c2[i];
    }
    const std::vector<double> w = expm(k, t - s) * w0;
    double cov = 0.0;
    for (int i = 0; i < n; ++i) cov += w[n + i];
    return cov;
}

StationaryReport stationarity_check(const MapModel& m, double kappa) {
    if (kappa < 1.0) throw PreconditionError("stationarity_check: kappa must be >= 1");
    StationaryReport rep;
    rep.kappa = kappa;
    const int n = m.n_states;

    // (i): psi_xi(-kappa) < |q_jj| per state, and finite E[e^{-kappa Z_xi}]
    rep.cond_psi_vs_exit_rate = true;
    std::vector<double> psi(static_cast<size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
        psi[j] = laplace_exponent(m, j, Component::Xi, -kappa);
        if (divergent(psi[j])) {
            rep.cond_psi_vs_exit_rate = false;
            rep.notes.push_back("(i): psi_xi(-kappa) diverges in state " + std::to_string(j + 1));
        } else if (!(psi[j] < m.exit_rate(j))) {
            rep.cond_psi_vs_exit_rate = false;
            rep.notes.push_back("(i): psi_xi(-kappa) >= |q_jj| in state " + std::to_string(j + 1));
        }
    }
    for (const auto& [key, law] : m.transition_jumps) {
        if (!(m.q(key.first, key.second) > 0.0)) continue;
        if (divergent(law.comp_expmoment(Component::Xi, -kappa))) {
            rep.cond_psi_vs_exit_rate = false;
            rep.notes.push_back("(i): E[e^{-kappa Z_xi}] diverges on transition " +
                                std::to_string(key.first + 1) + "->" + std::to_string(key.second + 1));
        }
    }

    // (ii): max-ratio display; empty inner sum evaluates to 0 (trivially true)
    if (rep.cond_psi_vs_exit_rate) {
        rep.cond_return_ratio = true;
        for (int j = 0; j < n && rep.cond_return_ratio; ++j) {
            for (int i = 0; i < n; ++i) {
                if (i == j) continue;
                double num = 0.0;
                for (int l = 0; l < n; ++l) {
                    if (l == i || l == j || !(m.q(i, l) > 0.0)) continue;
                    num += m.q(i, l) * m.transition_law(i, l).comp_expmoment(Component::Xi, -kappa);
                }
                const double ratio = num / (m.exit_rate(i) - psi[i]);
                if (!(ratio < 1.0)) {
                    rep.cond_return_ratio = false;
                    rep.notes.push_back("(ii): ratio >= 1 at (j=" + std::to_string(j + 1) +
                                        ", i=" + std::to_string(i + 1) + ")");
                    break;
                }
            }
        }
    } else {
        rep.cond_return_ratio = false;
        rep.notes.push_back("(ii): not evaluable, (i) fails");
    }

    // (iii): leading eigenvalue of Psi_xi(-kappa) negative
    try {
        const Matrix p = matrix_exponent(m, Component::Xi, -kappa);
        rep.lambda_max = leading_eigenvalue(p);
        rep.cond_leading_eigenvalue = rep.lambda_max < 0.0;
        if (!rep.cond_leading_eigenvalue)
            rep.notes.push_back("(iii): lambda_max^xi(-kappa) = " + std::to_string(rep.lambda_max));
    } catch (const Error& e) {
        rep.cond_leading_eigenvalue = false;
        rep.lambda_max = kDivergent;
        rep.notes.push_back(std::string("(iii): ") + e.what());
    }

    // (iv): kappa-th moments of the L components
    try {
        const MapModel xl = xi_l_characteristics(m);
        const ExistenceReport l_rep = moment_exists(xl, Component::Eta, kappa);
        rep.cond_l_moments = l_rep.ok;
        for (const auto& f : l_rep.failures) rep.notes.push_back("(iv): " + f);
    } catch (const Error& e) {
        rep.cond_l_moments = false;
        rep.notes.push_back(std::string("(iv): ") + e.what());
    }

    rep.exists = rep.cond_psi_vs_exit_rate && rep.cond_return_ratio &&
                 rep.cond_leading_eigenvalue && rep.cond_l_moments;
    return rep;
}

Matrix recursion_coefficient(const MapModel& m, int k, int n) {
    if (k < 2 || n < 1 || n > k) throw PreconditionError("recursion_coefficient: need 2 <= k, 1 <= n <= k");
    const double kk = static_cast<double>(k);
    const double c = detail::binom(k, n);
    auto jump = [&](const BivariateJumpLaw& l) { return c * l.mixed_exp(-kk, n); };
    auto diag = [&](const StateDynamics& d) {
        double v = 0.0;
        if (n == 1) v = kk * (d.drift_eta - kk * d.sigma_xi_eta);
        if (n == 2) v = 0.5 * kk * (kk - 1.0) * d.sigma2_eta;
        if (d.cp_rate > 0.0) v += d.cp_rate * c * d.cp_law.mixed_exp(-kk, n);
        return v;
    };
    return assemble(m, diag, jump, "recursion_coefficient");
}

std::vector<double> stationary_moment_recursion_step(const MapModel& m, int k,
                                                     const std::vector<std::vector<double>>& lower) {
    if (static_cast<int>(lower.size()) < k)
        throw PreconditionError("recursion step: need m_0..m_{k-1}");
    const int n = m.n_states;
    std::vector<double> rhs(static_cast<size_t>(n), 0.0);
    for (int nn = 1; nn <= k; ++nn) {
        const Matrix b = recursion_coefficient(m, k, nn);
        const std::vector<double> term = b * lower[k - nn];
        for (int i = 0; i < n; ++i) rhs[i] += term[i];
    }
    for (double& x : rhs) x = -x;
    return solve(psi_xi_matrix(m, k), rhs);
}

MomentLadder stationary_moments(const MapModel& m, int order) {
    if (order < 1) throw PreconditionError("stationary_moments: order must be >= 1");
    const StationaryReport chk = stationarity_check(m, static_cast<double>(order));
    if (!chk.exists) {
        std::string msg = "stationary_moments: stationarity check fails at kappa=" +
                          std::to_string(order);
        for (const auto& nname : chk.notes) msg += "; " + nname;
        throw PreconditionError(msg);
    }

    MomentLadder lad;
    lad.order = order;
    lad.m_hat.resize(order + 1);
    lad.mu.resize(order + 1);
    lad.m_hat[0] = m.pi;
    lad.mu[0] = 1.0;

    const Matrix psi1 = psi_xi_matrix(m, 1);
    const Matrix el = eps_l(m);

    // m1 = -Psi_xi(-1)^{-1} eps[L] pi
    std::vector<double> rhs = el * m.pi;
    for (double& x : rhs) x = -x;
    lad.m_hat[1] = solve(psi1, rhs);

    if (order >= 2) {
        // m2 = Psi_xi(-2)^{-1} (2(eps[L]+eps[[U,L]]) Psi_xi(-1)^{-1} eps[L] - eps[[L,L]]) pi
        const Matrix psi2 = psi_xi_matrix(m, 2);
        const std::vector<double> inner = solve(psi1, el * m.pi);
        std::vector<double> v = (2.0 * (el + eps_ul(m))) * inner;
        const std::vector<double> llpi = eps_ll(m) * m.pi;
        for (int i = 0; i < m.n_states; ++i) v[i] -= llpi[i];
        lad.m_hat[2] = solve(psi2, v);
    }
    for (int k = 3; k <= order; ++k)
        lad.m_hat[k] = stationary_moment_recursion_step(m, k, lad.m_hat);

    for (int k = 0; k <= order; ++k) lad.mu[k] = vsum(lad.m_hat[k]);
    return lad;
}

}  // namespace mapmom
