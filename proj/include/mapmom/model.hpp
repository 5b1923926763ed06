#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mapmom/laws.hpp"
#include "mapmom/matrix.hpp"

namespace mapmom {

// Per-state Levy triplet in finite-activity form: pathwise linear drift,
// 2x2 Gaussian covariance, compound-Poisson rate and bivariate jump law.
// With the pathwise-drift convention, E[X_1^{(j)}] = drift + cp_rate*E[jump].
struct StateDynamics {
    double drift_xi = 0.0;
    double drift_eta = 0.0;
    double sigma2_xi = 0.0;
    double sigma2_eta = 0.0;
    double sigma_xi_eta = 0.0;
    double cp_rate = 0.0;
    BivariateJumpLaw cp_law = BivariateJumpLaw::zero();
};

// Complete declaration of a bivariate MAP ((xi,eta),J).  Immutable after
// validate_and_finalize(); safe for concurrent reads.
struct MapModel {
    int n_states = 0;
    Matrix q;  // intensity matrix
    std::vector<StateDynamics> dynamics;
    std::map<std::pair<int, int>, BivariateJumpLaw> transition_jumps;  // 0-based keys
    std::vector<double> pi;  // stationary distribution, filled by validate_and_finalize

    double exit_rate(int j) const { return -q(j, j); }
    bool has_transition_law(int i, int j) const {
        return transition_jumps.count({i, j}) != 0;
    }
    // default: point mass at (0,0)
    const BivariateJumpLaw& transition_law(int i, int j) const {
        auto it = transition_jumps.find({i, j});
        return it == transition_jumps.end() ? BivariateJumpLaw::zero() : it->second;
    }

    // Checks every structural invariant and computes pi.  Throws
    // ValidationError / ReducibleChainError / SingularSystemError.
    void validate_and_finalize();
};

// pi with pi^T q = 0, sum pi = 1, solved from the rank-deficient system with
// the normalization row appended (normal equations).  Requires the residual
// ||pi^T q||_inf to come out below 1e-10 relative to the rate scale.
std::vector<double> stationary_distribution(const Matrix& q);

MapModel parse_model(const std::string& json_text);
MapModel load_model_file(const std::string& path);

// (U,L) model of the same MAP: e^{-xi} = stochastic exponential of U,
// dV = V_- dU + dL.  Transformed jump laws stay functional views unless the
// base is finitely supported (then exact atoms); require_explicit_laws makes
// non-representable cases throw UnsupportedLawError instead.
MapModel ul_characteristics(const MapModel& m, bool require_explicit_laws = false);

// (xi, L) model: keeps xi, replaces eta by L (drives the stationary
// exponential-functional representation).
MapModel xi_l_characteristics(const MapModel& m);

enum class DualComponents { Xi, Eta, Both };

// Time-reversed MAP under pi: q*_ij = (pi_j/pi_i) q_ji, selected Levy
// components negated in law, transition jump (i,j) = negated original (j,i).
MapModel dual_model(const MapModel& m, DualComponents which = DualComponents::Both);

}  // namespace mapmom
