#pragma once

#include <string>
#include <vector>

#include "mapmom/model.hpp"

namespace mapmom {

// Start of the chain: a fixed state or the stationary distribution.
struct StartSpec {
    bool is_pi = false;
    int state = 0;
    static StartSpec at(int j) { return {false, j}; }
    static StartSpec stationary() { return {true, 0}; }
};

// psi_j(w) = drift*w + sigma^2 w^2/2 + cp_rate*(E[e^{w zeta}]-1); +inf when
// the exponential moment diverges (a value, not an error).
double laplace_exponent(const MapModel& m, int state, Component c, double w);

// Psi(w) = diag(psi_j(w)) + Q^T o (E[e^{w Z^{jk}}])^T, with E[e^{w Z^{jj}}] = 1
// so that Psi(0) = Q^T.  Throws DivergentMomentError naming the offender.
Matrix matrix_exponent(const MapModel& m, Component c, double w);

// eps[X] = diag(E[X_1^{(j)}]) + Q^T o (E[Z^{ij}])^T
Matrix expectation_matrix(const MapModel& m, Component c);

// eps[[A,B]] = diag(sigma_AB(j) + cp_rate*E[zeta_A zeta_B]) + Q^T o (E[Z_A Z_B])^T
Matrix quadratic_expectation_matrix(const MapModel& m, Component a, Component b);

// E_j[X_t Lambda_t] via the Van Loan block integral.
std::vector<double> mean_hat(const MapModel& m, Component c, int state, double t);
double mean(const MapModel& m, Component c, StartSpec start, double t);
// E_pi[X_t]/t = 1^T eps[X] pi
double mean_rate(const MapModel& m, Component c);

// E_j[X_t^2 Lambda_t] (double Van Loan integral), and the variance.
std::vector<double> second_moment_hat(const MapModel& m, Component c, int state, double t);
double variance(const MapModel& m, Component c, int state, double t);

struct ExistenceReport {
    bool ok = true;
    std::vector<std::string> failures;
};
// kappa-th absolute moments of all state CP laws and transition laws.
ExistenceReport moment_exists(const MapModel& m, Component c, double kappa);
// exponential moments at both +kappa and -kappa (the lemma's |x| form).
ExistenceReport exp_moment_exists(const MapModel& m, Component c, double kappa);

struct ReturnMomentResult {
    double value = kDivergent;  // E_j[e^{kappa X_{tau^re(j)}}]; +inf when unverified
    bool row_norm_ok = false;   // max-ratio condition of the proposition
    bool neumann_ok = false;    // spectral radius of L below 1
    bool condition_verified = false;
    bool less_than_one_certified = false;  // lambda_max(Psi(kappa)) < 0
};
// Determinant formula 1 - det(I-R)/det(I-L) with
// R_il = q_il E[e^{kappa Z^{il}}] / (|q_ii| - psi_i(kappa)), L = R with row
// and column j zeroed.  PreconditionError when |S| < 2 or psi_i >= |q_ii|;
// DivergentMomentError on divergent transition moments.
ReturnMomentResult return_time_exp_moment(const MapModel& m, Component c, int state, double kappa);

}  // namespace mapmom
