#include "mapmom/map_moments.hpp"

#include <cmath>

namespace mapmom {

namespace {

double comp_drift(const StateDynamics& d, Component c) {
    return c == Component::Xi ? d.drift_xi : d.drift_eta;
}

double comp_sigma2(const StateDynamics& d, Component c) {
    return c == Component::Xi ? d.sigma2_xi : d.sigma2_eta;
}

double gauss_cov(const StateDynamics& d, Component a, Component b) {
    if (a == b) return comp_sigma2(d, a);
    return d.sigma_xi_eta;
}

int cross_pow_xi(Component a, Component b) {
    return (a == Component::Xi) + (b == Component::Xi);
}

int cross_pow_eta(Component a, Component b) {
    return (a == Component::Eta) + (b == Component::Eta);
}

std::string state_name(int j) { return "state " + std::to_string(j + 1); }
std::string trans_name(int i, int j) {
    return "transition " + std::to_string(i + 1) + "->" + std::to_string(j + 1);
}

std::vector<double> basis_vector(int n, int j) {
    std::vector<double> e(static_cast<size_t>(n), 0.0);
    e[static_cast<size_t>(j)] = 1.0;
    return e;
}

void check_state(const MapModel& m, int state) {
    if (state < 0 || state >= m.n_states)
        throw PreconditionError("state index out of range");
}

}  // namespace

double laplace_exponent(const MapModel& m, int state, Component c, double w) {
    check_state(m, state);
    const auto& d = m.dynamics[state];
    double psi = comp_drift(d, c) * w + 0.5 * comp_sigma2(d, c) * w * w;
    if (d.cp_rate > 0.0) {
        const double mgf = d.cp_law.comp_expmoment(c, w);
        if (divergent(mgf)) return kDivergent;
        psi += d.cp_rate * (mgf - 1.0);
    }
    return psi;
}

Matrix matrix_exponent(const MapModel& m, Component c, double w) {
    const int n = m.n_states;
    Matrix psi(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const double p = laplace_exponent(m, j, c, w);
        if (divergent(p))
            throw DivergentMomentError("matrix_exponent: psi diverges at " + state_name(j));
        psi(j, j) = p + m.q(j, j);
    }
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            if (a == b || !(m.q(b, a) > 0.0)) continue;
            const double mgf = m.transition_law(b, a).comp_expmoment(c, w);
            if (divergent(mgf))
                throw DivergentMomentError("matrix_exponent: jump moment diverges at " +
                                           trans_name(b, a));
            psi(a, b) = m.q(b, a) * mgf;
        }
    return psi;
}

Matrix expectation_matrix(const MapModel& m, Component c) {
    const int n = m.n_states;
    Matrix eps(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const auto& d = m.dynamics[j];
        double mean = comp_drift(d, c);
        if (d.cp_rate > 0.0) {
            const double jm = d.cp_law.comp_moment(c, 1);
            if (divergent(jm))
                throw DivergentMomentError("expectation_matrix: divergent CP jump mean at " +
                                           state_name(j));
            mean += d.cp_rate * jm;
        }
        eps(j, j) = mean;
    }
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            if (a == b || !(m.q(b, a) > 0.0)) continue;
            const double jm = m.transition_law(b, a).comp_moment(c, 1);
            if (divergent(jm))
                throw DivergentMomentError("expectation_matrix: divergent jump mean at " +
                                           trans_name(b, a));
            eps(a, b) = m.q(b, a) * jm;
        }
    return eps;
}

Matrix quadratic_expectation_matrix(const MapModel& m, Component ca, Component cb) {
    const int n = m.n_states;
    const int px = cross_pow_xi(ca, cb), pe = cross_pow_eta(ca, cb);
    Matrix eps(n, n, 0.0);
    for (int j = 0; j < n; ++j) {
        const auto& d = m.dynamics[j];
        double v = gauss_cov(d, ca, cb);
        if (d.cp_rate > 0.0) {
            const double jm = d.cp_law.cross_moment(px, pe);
            if (divergent(jm))
                throw DivergentMomentError(
                    "quadratic_expectation_matrix: divergent CP second moment at " + state_name(j));
            v += d.cp_rate * jm;
        }
        eps(j, j) = v;
    }
    for (int b = 0; b < n; ++b)
        for (int a = 0; a < n; ++a) {
            if (a == b || !(m.q(b, a) > 0.0)) continue;
            const double jm = m.transition_law(b, a).cross_moment(px, pe);
            if (divergent(jm))
                throw DivergentMomentError(
                    "quadratic_expectation_matrix: divergent jump second moment at " +
                    trans_name(b, a));
            eps(a, b) = m.q(b, a) * jm;
        }
    return eps;
}

std::vector<double> mean_hat(const MapModel& m, Component c, int state, double t) {
    check_state(m, state);
    if (t < 0.0) throw PreconditionError("mean_hat: t must be >= 0");
    const Matrix qt = m.q.transpose();
    const Matrix eps = expectation_matrix(m, c);
    return van_loan_single(qt, eps, qt, t) * basis_vector(m.n_states, state);
}

double mean(const MapModel& m, Component c, StartSpec start, double t) {
    if (t < 0.0) throw PreconditionError("mean: t must be >= 0");
    if (start.is_pi) {
        // e^{Q^T s} pi = pi, so the occupation integral collapses to t*pi
        const Matrix eps = expectation_matrix(m, c);
        const std::vector<double> v = eps * m.pi;
        double s = 0.0;
        for (double x : v) s += x;
        return t * s;
    }
    const std::vector<double> hat = mean_hat(m, c, start.state, t);
    double s = 0.0;
    for (double x : hat) s += x;
    return s;
}

double mean_rate(const MapModel& m, Component c) {
    const Matrix eps = expectation_matrix(m, c);
    const std::vector<double> v = eps * m.pi;
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

std::vector<double> second_moment_hat(const MapModel& m, Component c, int state, double t) {
    check_state(m, state);
    if (t < 0.0) throw PreconditionError("second_moment_hat: t must be >= 0");
    const Matrix qt = m.q.transpose();
    const Matrix eps = expectation_matrix(m, c);
    const Matrix epsq = quadratic_expectation_matrix(m, c, c);
    const Matrix dbl = van_loan_double(qt, eps, qt, eps, qt, t);
    const Matrix sgl = van_loan_single(qt, epsq, qt, t);
    const auto e = basis_vector(m.n_states, state);
    std::vector<double> out = (2.0 * dbl + sgl) * e;
    return out;
}

double variance(const MapModel& m, Component c, int state, double t) {
    const auto hat = second_moment_hat(m, c, state, t);
    double m2 = 0.0;
    for (double x : hat) m2 += x;
    const double m1 = mean(m, c, StartSpec::at(state), t);
    return m2 - m1 * m1;
}

ExistenceReport moment_exists(const MapModel& m, Component c, double kappa) {
    if (kappa < 1.0) throw PreconditionError("moment_exists: kappa must be >= 1");
    ExistenceReport rep;
    for (int j = 0; j < m.n_states; ++j) {
        const auto& d = m.dynamics[j];
        if (d.cp_rate > 0.0 && !d.cp_law.comp_abs_moment_finite(c, kappa))
            rep.failures.push_back(state_name(j) + ": cp_law lacks the " + std::to_string(kappa) +
                                   "-th absolute moment");
    }
    for (const auto& [key, law] : m.transition_jumps) {
        if (!(m.q(key.first, key.second) > 0.0)) continue;
        if (!law.comp_abs_moment_finite(c, kappa))
            rep.failures.push_back(trans_name(key.first, key.second) + ": jump law lacks the " +
                                   std::to_string(kappa) + "-th absolute moment");
    }
    rep.ok = rep.failures.empty();
    return rep;
}

ExistenceReport exp_moment_exists(const MapModel& m, Component c, double kappa) {
    ExistenceReport rep;
    const double k = std::fabs(kappa);
    auto finite_both = [&](const BivariateJumpLaw& law) {
        return !divergent(law.comp_expmoment(c, k)) && !divergent(law.comp_expmoment(c, -k));
    };
    for (int j = 0; j < m.n_states; ++j) {
        const auto& d = m.dynamics[j];
        if (d.cp_rate > 0.0 && !finite_both(d.cp_law))
            rep.failures.push_back(state_name(j) + ": cp_law lacks E[e^{" + std::to_string(k) +
                                   "|Z|}]");
    }
    for (const auto& [key, law] : m.transition_jumps) {
        if (!(m.q(key.first, key.second) > 0.0)) continue;
        if (!finite_both(law))
            rep.failures.push_back(trans_name(key.first, key.second) + ": jump law lacks E[e^{" +
                                   std::to_string(k) + "|Z|}]");
    }
    rep.ok = rep.failures.empty();
    return rep;
}

ReturnMomentResult return_time_exp_moment(const MapModel& m, Component c, int state, double kappa) {
    check_state(m, state);
    const int n = m.n_states;
    if (n < 2) throw PreconditionError("return_time_exp_moment: needs |S| >= 2");

    std::vector<double> denom(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double psi = laplace_exponent(m, i, c, kappa);
        if (divergent(psi) || psi >= m.exit_rate(i))
            throw PreconditionError("return_time_exp_moment: psi_" + std::to_string(i + 1) +
                                    "(kappa) must stay below the exit rate");
        denom[i] = m.exit_rate(i) - psi;
    }

    Matrix r(n, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int l = 0; l < n; ++l) {
            if (i == l || !(m.q(i, l) > 0.0)) continue;
            const double mgf = m.transition_law(i, l).comp_expmoment(c, kappa);
            if (divergent(mgf))
                throw DivergentMomentError("return_time_exp_moment: divergent jump moment at " +
                                           trans_name(i, l));
            r(i, l) = m.q(i, l) * mgf / denom[i];
        }

    Matrix l = r;
    for (int k = 0; k < n; ++k) {
        l(state, k) = 0.0;
        l(k, state) = 0.0;
    }

    ReturnMomentResult res;

    // row-norm condition: rows of L restricted to i != state must stay below 1
    double rownorm = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i == state) continue;
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += l(i, k);
        rownorm = std::max(rownorm, s);
    }
    res.row_norm_ok = rownorm < 1.0;

    // Gelfand bound: ||L^{2^k}||^{1/2^k} decreases to the spectral radius
    {
        Matrix p = l;
        double logscale = 0.0;
        double rho = kDivergent;
        const int squarings = 8;
        for (int it = 0; it < squarings; ++it) {
            const double s = p.norm_inf();
            if (s == 0.0) {
                rho = 0.0;
                break;
            }
            logscale = 2.0 * (logscale + std::log(s));
            p = (1.0 / s) * p;
            p = p * p;
        }
        if (divergent(rho)) {
            const double s = std::max(p.norm_inf(), 1e-300);
            rho = std::exp((logscale + std::log(s)) / std::ldexp(1.0, squarings));
        }
        res.neumann_ok = rho < 1.0 - 1e-12;
    }

    res.condition_verified = res.row_norm_ok || res.neumann_ok;
    if (res.condition_verified) {
        const Matrix eye = Matrix::identity(n);
        res.value = 1.0 - determinant(eye - r) / determinant(eye - l);
    } else {
        res.value = kDivergent;
    }

    try {
        res.less_than_one_certified = leading_eigenvalue(matrix_exponent(m, c, kappa)) < 0.0;
    } catch (const Error&) {
        res.less_than_one_certified = false;
    }
    return res;
}

}  // namespace mapmom
