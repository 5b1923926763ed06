#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mapmom/map_moments.hpp"
#include "mapmom/model.hpp"
#include "mapmom/rng.hpp"

namespace mapmom {

struct SimConfig {
    long n_paths = 100000;
    double horizon = 1.0;
    int substeps = 64;  // per unit time; refines only the V Stieltjes integral
    uint64_t master_seed = 12345;
    bool antithetic = false;
    int threads = 0;  // 0: MAPMOM_THREADS if set, else hardware concurrency
};

// Per-functional Monte Carlo estimate.  hat[i] estimates E[X 1{J=i}] and the
// hat components sum to `mean`; std_error = sample std / sqrt(n).
struct EnsembleStats {
    long n = 0;
    double mean = 0.0;
    double variance = 0.0;       // sample variance of the functional
    double std_error = 0.0;      // of `mean`
    double var_std_error = 0.0;  // asymptotic std error of `variance`
    std::vector<double> hat;
};

// Event-exact MAP path endpoint statistics at the horizon.
struct MapEstimates {
    EnsembleStats xi, eta;
    std::vector<double> occupation;     // mean fraction of time per state
    std::vector<double> occupation_se;
};
MapEstimates simulate_map(const MapModel& m, StartSpec start, const SimConfig& cfg);

// E_i[e^{w X_t} 1{J_t = j}] estimated at the horizon.
EnsembleStats simulate_char_function(const MapModel& m, Component c, int start_state,
                                     int target_state, double w, const SimConfig& cfg);

struct MmgouEstimates {
    EnsembleStats v, v_sq;
};
// Left-point Stieltjes substep update V <- e^{-d xi} V + d eta between exact
// jump events; jumps apply V <- e^{-z_xi}(V + z_eta).
MmgouEstimates simulate_mmgou(const MapModel& m, double v0, StartSpec start, const SimConfig& cfg);

enum class StationaryMode { Forward, Dual };
struct StationaryEstimates {
    std::vector<EnsembleStats> moments;  // moments[k-1] estimates E[V_inf^k]
    bool stationarity_warning = false;
    double truncation_scale = 0.0;  // e^{lambda_max^xi(-1) * horizon}
    double horizon_used = 0.0;
};
// Forward: long-horizon forwarding from V_0 = 0 under pi.  Dual: simulates
// -int_0^T e^{xi*_{s-}} dL*_s on the dual of the (xi,L) model.
// PreconditionError when the stationarity check fails, unless `force`.
StationaryEstimates sample_stationary(const MapModel& m, StationaryMode mode, const SimConfig& cfg,
                                      int max_order = 2, double horizon_override = 0.0,
                                      bool force = false);

struct ReturnEstimate {
    EnsembleStats stat;
    bool unstable = false;  // batch means disagree: running mean not stabilizing
    std::vector<double> batch_means;
};
// Simulates to the first return time tau^re(j) and averages e^{kappa X_tau}.
ReturnEstimate estimate_return_exp_moment(const MapModel& m, Component c, int state, double kappa,
                                          const SimConfig& cfg);

struct AcfEstimates {
    EnsembleStats base;                    // V at the burn time
    std::vector<EnsembleStats> at_lag;     // V at burn + lag_k
    std::vector<EnsembleStats> product;    // V(T0) * V(T0 + lag_k)
    std::vector<double> covariance;        // product mean - base mean * lag mean
};
// Pairs (V_burn, V_{burn+lag}) from V_0 = v0; under pi with a long burn this
// estimates the stationary autocovariance, from a fixed state it estimates
// the transient one at base time `burn`.
AcfEstimates simulate_autocovariance(const MapModel& m, const std::vector<double>& lags,
                                     double burn, const SimConfig& cfg,
                                     StartSpec start = StartSpec::stationary(), double v0 = 0.0);

int resolve_threads(const SimConfig& cfg);

}  // namespace mapmom
