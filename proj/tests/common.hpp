#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "mapmom/model.hpp"
#include "mapmom/rng.hpp"

namespace testutil {

using namespace mapmom;

// Q = [[-1,1],[1,-1]], xi drifts (1,2), nothing else.
inline MapModel model_a() {
    MapModel m;
    m.n_states = 2;
    m.q = Matrix{{-1.0, 1.0}, {1.0, -1.0}};
    m.dynamics.resize(2);
    m.dynamics[0].drift_xi = 1.0;
    m.dynamics[1].drift_xi = 2.0;
    m.validate_and_finalize();
    return m;
}

// Model A plus eta = sigma_j B with sigma = (1,2): a 2-state regime-switching OU driver.
inline MapModel model_b() {
    MapModel m = model_a();
    m.dynamics[0].sigma2_eta = 1.0;
    m.dynamics[1].sigma2_eta = 4.0;
    m.validate_and_finalize();
    return m;
}

// Model B with an eta drift (1,1): non-trivial running mean and odd moments.
inline MapModel model_b_drift() {
    MapModel m = model_b();
    m.dynamics[0].drift_eta = 1.0;
    m.dynamics[1].drift_eta = 1.0;
    m.validate_and_finalize();
    return m;
}

// 1-state OU driver: xi = a t, eta = sigma B.
inline MapModel model_ou1(double a = 1.0, double sigma = 1.0) {
    MapModel m;
    m.n_states = 1;
    m.q = Matrix{{0.0}};
    m.dynamics.resize(1);
    m.dynamics[0].drift_xi = a;
    m.dynamics[0].sigma2_eta = sigma * sigma;
    m.validate_and_finalize();
    return m;
}

// Deterministic random model: irreducible chain, psd Gaussian blocks, jump
// mix over constant / normal / discrete families.
inline MapModel random_model(uint64_t seed, int n_states = 0, bool with_cp = true,
                             bool with_transition_jumps = true) {
    RngStream rng(seed, 0xABCD);
    const int n = n_states > 0 ? n_states : 2 + static_cast<int>(rng.uniform() * 3.0);

    auto random_law = [&]() -> JumpLaw {
        const double u = rng.uniform();
        if (u < 0.34) return JumpLaw::constant(-0.5 + rng.uniform());
        if (u < 0.67) return JumpLaw::normal(-0.3 + 0.6 * rng.uniform(), 0.01 + 0.2 * rng.uniform());
        const double x1 = -0.6 + 1.2 * rng.uniform();
        const double x2 = -0.6 + 1.2 * rng.uniform();
        const double p = 0.2 + 0.6 * rng.uniform();
        return JumpLaw::discrete({{x1, p}, {x2, 1.0 - p}});
    };

    MapModel m;
    m.n_states = n;
    m.q = Matrix(n, n, 0.0);
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            m.q(i, j) = 0.2 + rng.uniform();
            row += m.q(i, j);
        }
        m.q(i, i) = -row;
    }
    m.dynamics.resize(n);
    for (int j = 0; j < n; ++j) {
        auto& d = m.dynamics[j];
        d.drift_xi = -1.0 + 2.0 * rng.uniform();
        d.drift_eta = -1.0 + 2.0 * rng.uniform();
        d.sigma2_xi = 0.5 * rng.uniform();
        d.sigma2_eta = 0.5 * rng.uniform();
        const double rho = -0.9 + 1.8 * rng.uniform();
        d.sigma_xi_eta = rho * std::sqrt(d.sigma2_xi * d.sigma2_eta);
        if (with_cp && rng.uniform() < 0.8) {
            d.cp_rate = rng.uniform();
            d.cp_law = BivariateJumpLaw::independent(random_law(), random_law());
        }
    }
    if (with_transition_jumps) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                if (i == j || rng.uniform() < 0.5) continue;
                m.transition_jumps.emplace(std::make_pair(i, j),
                                           BivariateJumpLaw::independent(random_law(), random_law()));
            }
    }
    m.validate_and_finalize();
    return m;
}

// adaptive Simpson on [a,b]
inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                               double tol = 1e-12, int depth = 40) {
    std::function<double(double, double, double, double, double, double, double, int)> rec =
        [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
            int d) -> double {
        const double mid = 0.5 * (lo + hi);
        const double lmid = 0.5 * (lo + mid), rmid = 0.5 * (mid + hi);
        const double flm = f(lmid), frm = f(rmid);
        const double left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        const double right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if (d <= 0 || std::fabs(left + right - whole) < 15.0 * eps)
            return left + right + (left + right - whole) / 15.0;
        return rec(lo, mid, flo, flm, fmid, left, eps * 0.5, d - 1) +
               rec(mid, hi, fmid, frm, fhi, right, eps * 0.5, d - 1);
    };
    const double mid = 0.5 * (a + b);
    const double fa = f(a), fm = f(mid), fb = f(b);
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return rec(a, b, fa, fm, fb, whole, tol, depth);
}

// adaptive Simpson over fixed panels: robust when the mass sits in a small
// part of a long domain
inline double panel_simpson(const std::function<double(double)>& f, double a, double b,
                            int panels = 48, double tol = 1e-13) {
    double total = 0.0;
    for (int k = 0; k < panels; ++k) {
        const double lo = a + (b - a) * k / panels;
        const double hi = a + (b - a) * (k + 1) / panels;
        total += adaptive_simpson(f, lo, hi, tol);
    }
    return total;
}

// quadrature of integrand(x) against the density of a law over its support
inline double law_expectation(const JumpLaw& law, const std::function<double(double)>& g) {
    switch (law.family()) {
        case LawFamily::Constant:
            return g(law.param1());
        case LawFamily::Discrete: {
            double s = 0.0;
            for (const auto& [x, p] : law.atoms()) s += p * g(x);
            return s;
        }
        case LawFamily::Normal: {
            const double mu = law.param1(), sd = std::sqrt(law.param2());
            if (sd == 0.0) return g(mu);
            auto f = [&](double x) {
                const double z = (x - mu) / sd;
                return g(x) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * M_PI));
            };
            return panel_simpson(f, mu - 12.0 * sd, mu + 12.0 * sd);
        }
        case LawFamily::Exponential: {
            const double rate = law.param1();
            const int sgn = law.sign();
            auto f = [&](double x) { return g(sgn * x) * rate * std::exp(-rate * x); };
            // long domain: exponentially tilted integrands decay slower than the density
            return panel_simpson(f, 0.0, 250.0 / rate);
        }
        case LawFamily::Pareto: {
            const double alpha = law.param1(), xmin = law.param2();
            const int sgn = law.sign();
            // log substitution x = e^y handles the long tail
            auto f = [&](double y) {
                const double x = std::exp(y);
                return g(sgn * x) * alpha * std::pow(xmin, alpha) * std::pow(x, -alpha - 1.0) * x;
            };
            return panel_simpson(f, std::log(xmin), std::log(xmin) + 80.0);
        }
    }
    return 0.0;
}

}  // namespace testutil
