#pragma once

#include <string>
#include <vector>

#include "mapmom/mc.hpp"
#include "mapmom/model.hpp"

namespace mapmom {

struct CheckRow {
    std::string name;
    double closed = 0.0;
    double mc = 0.0;
    double se = 0.0;
    double z = 0.0;
    bool pass = false;
    bool applicable = true;
    std::string note;
};

struct CrosscheckResult {
    std::vector<CheckRow> rows;
    bool all_pass = true;  // over applicable rows, at |z| <= 4
};

// Closed form vs Monte Carlo for the given model: mean and variance of xi at
// t=1, MMGOU running mean, stationary mu_1/mu_2, lag-{0.5,1} autocovariance,
// and the return-time exponential moment at kappa=-1.  The full suite adds
// the characteristic-function check, E[V_1^2], dual-mode stationary sampling
// and the third-moment recursion.  Rows whose preconditions fail are marked
// inapplicable instead of failing.
CrosscheckResult run_crosscheck(const MapModel& m, const std::string& suite, const SimConfig& cfg);

}  // namespace mapmom
