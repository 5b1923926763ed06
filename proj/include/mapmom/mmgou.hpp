#pragma once

#include <string>
#include <vector>

#include "mapmom/map_moments.hpp"
#include "mapmom/model.hpp"

namespace mapmom {

// Psi_xi(-k), built directly from the xi characteristics.  The identities
// Psi_xi(-1) = Q^T + eps[U] and Psi_xi(-2) = Q^T + 2 eps[U] + eps[[U,U]] are
// enforced by tests, not used as the implementation path.
Matrix psi_xi_matrix(const MapModel& m, int k);

// Expectation matrices of the (U,L) pair, evaluated against the original
// (xi,eta) laws (e.g. E[Z_U] = E[e^{-Z_xi}] - 1), never by sampling.
Matrix eps_u(const MapModel& m);
Matrix eps_l(const MapModel& m);
Matrix eps_uu(const MapModel& m);
Matrix eps_ul(const MapModel& m);
Matrix eps_ll(const MapModel& m);

// E_j[V_t Lambda_t] = e^{Psi_xi(-1) t} v0_hat + int_0^t e^{Psi_xi(-1)(t-s)} eps[L] e^{Q^T s} ds e_j
std::vector<double> running_mean_hat(const MapModel& m, const std::vector<double>& v0_hat,
                                     StartSpec start, double t);
double running_mean(const MapModel& m, const std::vector<double>& v0_hat, StartSpec start, double t);

// One augmented block exponential advances (E[V^2 Lambda], E[V Lambda], E[Lambda]).
struct TransientMoments {
    std::vector<double> second_hat;
    std::vector<double> mean_hat;
    std::vector<double> chain_hat;
};
TransientMoments transient_second_moment_hat(const MapModel& m,
                                             const std::vector<double>& v0_sq_hat,
                                             const std::vector<double>& v0_hat, StartSpec start,
                                             double t);

struct AcfStart {
    bool stationary = true;
    int state = 0;
    double v0_mean = 0.0;
    double v0_var = 0.0;
    static AcfStart stationary_start() { return {}; }
    static AcfStart from_state(int j, double mean, double var) { return {false, j, mean, var}; }
};
// Cov(V_t, V_s), s <= t, propagated by e^{K(t-s)} with
// K = [[Q^T, 0], [eps[L], Q^T + eps[U]]].
double autocovariance(const MapModel& m, double s, double t, const AcfStart& start);

struct StationaryReport {
    bool exists = false;
    double kappa = 0.0;
    bool cond_psi_vs_exit_rate = false;   // (i)
    bool cond_return_ratio = false;       // (ii)
    bool cond_leading_eigenvalue = false; // (iii)
    bool cond_l_moments = false;          // (iv)
    double lambda_max = kDivergent;       // lambda_max^xi(-kappa)
    std::vector<std::string> notes;
};
StationaryReport stationarity_check(const MapModel& m, double kappa);

struct MomentLadder {
    int order = 0;
    std::vector<std::vector<double>> m_hat;  // m_0..m_K, m_k ~ E_pi[V_inf^k Lambda_0]
    std::vector<double> mu;                  // mu_k = 1^T m_k
};
// m_1, m_2 from the closed displays; k >= 3 by the recursion.  Requires
// stationarity_check(kappa = order) to pass.
MomentLadder stationary_moments(const MapModel& m, int order);

// B_{k,n} coefficient matrix of the higher-moment recursion.
Matrix recursion_coefficient(const MapModel& m, int k, int n);
// m_k = -Psi_xi(-k)^{-1} sum_n B_{k,n} m_{k-n}; `lower` holds m_0..m_{k-1}.
std::vector<double> stationary_moment_recursion_step(const MapModel& m, int k,
                                                     const std::vector<std::vector<double>>& lower);

}  // namespace mapmom
