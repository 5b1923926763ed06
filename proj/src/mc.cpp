#include "mapmom/mc.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "mapmom/mmgou.hpp"

namespace mapmom {

int resolve_threads(const SimConfig& cfg) {
    int n = cfg.threads;
    if (n <= 0) n = static_cast<int>(std::thread::hardware_concurrency());
    if (n <= 0) n = 1;
    if (const char* env = std::getenv("MAPMOM_THREADS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return std::max(1, n);
}

namespace {

// Cholesky factor of the per-state 2x2 Gaussian block, precomputed once.
struct GaussFactor {
    double l11 = 0.0, l21 = 0.0, l22 = 0.0;
    bool need1 = false, need2 = false;
};

GaussFactor gauss_factor(const StateDynamics& d) {
    GaussFactor g;
    g.l11 = std::sqrt(std::max(0.0, d.sigma2_xi));
    if (g.l11 > 0.0) {
        g.l21 = d.sigma_xi_eta / g.l11;
        g.l22 = std::sqrt(std::max(0.0, d.sigma2_eta - g.l21 * g.l21));
    } else {
        g.l21 = 0.0;
        g.l22 = std::sqrt(std::max(0.0, d.sigma2_eta));
    }
    g.need1 = g.l11 > 0.0;
    g.need2 = g.l22 > 0.0;
    return g;
}

struct WalkContext {
    const MapModel* m;
    std::vector<GaussFactor> gauss;
    explicit WalkContext(const MapModel& model) : m(&model) {
        gauss.reserve(model.dynamics.size());
        for (const auto& d : model.dynamics) gauss.push_back(gauss_factor(d));
    }
};

int draw_successor(const MapModel& m, int j, RngStream& rng) {
    const double r = m.exit_rate(j);
    double u = rng.uniform() * r;
    int last = -1;
    for (int l = 0; l < m.n_states; ++l) {
        if (l == j || !(m.q(j, l) > 0.0)) continue;
        last = l;
        u -= m.q(j, l);
        if (u <= 0.0) return l;
    }
    return last;
}

// Walks one exact-event path and feeds an observer:
//   obs.step(state, dt, dxi, deta)  - continuous substep increments
//   obs.jump(from, to, zxi, zeta)   - CP jump (from == to) or chain transition
//   obs.record(k, state)            - crossing record_times[k] (sorted)
// Returns the state at the horizon.
template <class Obs>
int walk_path(const WalkContext& ctx, int start_state, double horizon, int substeps_per_unit,
              const std::vector<double>& record_times, RngStream& rng, Obs& obs) {
    const MapModel& m = *ctx.m;
    int j = start_state;
    double t = 0.0;
    size_t rec = 0;

    auto advance = [&](double from, double to) {
        const double dt = to - from;
        if (!(dt > 0.0)) return;
        const auto& d = m.dynamics[j];
        const auto& g = ctx.gauss[j];
        const int nsub =
            substeps_per_unit > 0 ? std::max(1, static_cast<int>(std::ceil(dt * substeps_per_unit))) : 1;
        const double delta = dt / nsub;
        const double sq = std::sqrt(delta);
        for (int i = 0; i < nsub; ++i) {
            double g1 = 0.0, g2 = 0.0;
            if (g.need1) {
                const double n1 = rng.normal();
                g1 = sq * g.l11 * n1;
                g2 = sq * g.l21 * n1;
            }
            if (g.need2) g2 += sq * g.l22 * rng.normal();
            obs.step(j, delta, d.drift_xi * delta + g1, d.drift_eta * delta + g2);
        }
    };

    while (t < horizon) {
        const double r = m.exit_rate(j);
        const double hold = r > 0.0 ? rng.exponential(r) : kDivergent;
        const bool transitions = t + hold < horizon;
        const double seg_end = transitions ? t + hold : horizon;

        const double cp_rate = m.dynamics[j].cp_rate;
        double next_cp = cp_rate > 0.0 ? t + rng.exponential(cp_rate) : kDivergent;
        double u = t;
        for (;;) {
            const double target = std::min(seg_end, next_cp);
            while (rec < record_times.size() && record_times[rec] <= target) {
                advance(u, record_times[rec]);
                u = std::max(u, record_times[rec]);
                obs.record(rec, j);
                ++rec;
            }
            advance(u, target);
            u = target;
            if (!(next_cp < seg_end)) break;
            const auto [zx, zy] = m.dynamics[j].cp_law.sample(rng);
            obs.jump(j, j, zx, zy);
            next_cp = u + rng.exponential(cp_rate);
        }
        t = seg_end;
        if (!transitions) break;
        const int k = draw_successor(m, j, rng);
        const auto [zx, zy] = m.transition_law(j, k).sample(rng);
        obs.jump(j, k, zx, zy);
        j = k;
    }
    while (rec < record_times.size()) obs.record(rec++, j);
    return j;
}

int draw_start(const MapModel& m, StartSpec start, RngStream& rng) {
    if (!start.is_pi) return start.state;
    double u = rng.uniform();
    for (int j = 0; j < m.n_states; ++j) {
        u -= m.pi[j];
        if (u <= 0.0) return j;
    }
    return m.n_states - 1;
}

// scalar accumulator with enough power sums for mean and variance z-tests
struct Acc {
    long n = 0;
    double s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    std::vector<double> hat;

    void ensure(int states) {
        if (hat.empty()) hat.assign(static_cast<size_t>(states), 0.0);
    }
    void add(double x, int state, int states) {
        ensure(states);
        ++n;
        s1 += x;
        const double x2 = x * x;
        s2 += x2;
        s3 += x2 * x;
        s4 += x2 * x2;
        hat[static_cast<size_t>(state)] += x;
    }
    Acc& operator+=(const Acc& o) {
        if (o.n == 0) return *this;
        if (hat.empty()) hat.assign(o.hat.size(), 0.0);
        n += o.n;
        s1 += o.s1;
        s2 += o.s2;
        s3 += o.s3;
        s4 += o.s4;
        for (size_t i = 0; i < o.hat.size(); ++i) hat[i] += o.hat[i];
        return *this;
    }
    EnsembleStats finalize() const {
        EnsembleStats e;
        e.n = n;
        if (n == 0) return e;
        e.mean = s1 / n;
        if (n > 1) {
            e.variance = std::max(0.0, (s2 - n * e.mean * e.mean) / (n - 1));
            e.std_error = std::sqrt(e.variance / n);
            // central fourth moment for the variance standard error
            const double m1 = e.mean;
            const double m2 = s2 / n - m1 * m1;
            const double m4 = s4 / n - 4.0 * m1 * s3 / n + 6.0 * m1 * m1 * s2 / n - 3.0 * m1 * m1 * m1 * m1;
            e.var_std_error = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
        }
        e.hat.resize(hat.size());
        for (size_t i = 0; i < hat.size(); ++i) e.hat[i] = hat[i] / n;
        return e;
    }
};

// Fixed-size chunks reduced in chunk order: results are bit-identical for a
// given (seed, cfg) regardless of thread count or scheduling.
template <class Partial, class PerPath>
Partial run_paths(const SimConfig& cfg, PerPath per_path) {
    if (cfg.n_paths < 1) throw PreconditionError("SimConfig: n_paths must be >= 1");
    if (cfg.substeps < 1) throw PreconditionError("SimConfig: substeps must be >= 1");
    const long chunk = 4096;
    const long nchunks = (cfg.n_paths + chunk - 1) / chunk;
    std::vector<Partial> parts(static_cast<size_t>(nchunks));
    std::atomic<long> next{0};
    auto work = [&]() {
        for (;;) {
            const long c = next.fetch_add(1);
            if (c >= nchunks) break;
            Partial p;
            const long lo = c * chunk;
            const long hi = std::min(cfg.n_paths, lo + chunk);
            for (long k = lo; k < hi; ++k) {
                const uint64_t stream = cfg.antithetic ? static_cast<uint64_t>(k / 2)
                                                       : static_cast<uint64_t>(k);
                const bool flip = cfg.antithetic && (k & 1);
                RngStream rng(cfg.master_seed, stream, flip);
                per_path(k, rng, p);
            }
            parts[static_cast<size_t>(c)] = std::move(p);
        }
    };
    const int nt = std::min<long>(resolve_threads(cfg), std::max<long>(1, nchunks));
    std::vector<std::thread> pool;
    for (int i = 1; i < nt; ++i) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    Partial total;
    for (auto& p : parts) total += p;
    return total;
}

struct MapObs {
    double xi = 0.0, eta = 0.0;
    std::vector<double>* occ = nullptr;
    void step(int j, double dt, double dx, double dy) {
        xi += dx;
        eta += dy;
        if (occ) (*occ)[static_cast<size_t>(j)] += dt;
    }
    void jump(int, int, double zx, double zy) {
        xi += zx;
        eta += zy;
    }
    void record(size_t, int) {}
};

struct MmgouObs {
    double v = 0.0;
    std::vector<double> snapshots;
    // left-point update V <- e^{-dxi}(V + deta): the eta increment rides
    // inside the discount factor, which keeps the within-step covariation
    // between xi and eta (the sigma_xi_eta term) in the limit
    void step(int, double, double dx, double dy) { v = std::exp(-dx) * (v + dy); }
    void jump(int, int, double zx, double zy) { v = std::exp(-zx) * (v + zy); }
    void record(size_t k, int) {
        if (k < snapshots.size()) snapshots[k] = v;
    }
};

struct DualFunctionalObs {
    double log_weight = 0.0;  // xi*_s
    double acc = 0.0;         // int e^{xi*_{s-}} dL*
    void step(int, double, double dx, double dy) {
        acc += std::exp(log_weight) * dy;
        log_weight += dx;
    }
    void jump(int, int, double zx, double zy) {
        acc += std::exp(log_weight) * zy;
        log_weight += zx;
    }
    void record(size_t, int) {}
};

}  // namespace

MapEstimates simulate_map(const MapModel& m, StartSpec start, const SimConfig& cfg) {
    struct Partial {
        Acc xi, eta;
        std::vector<double> occ_s, occ_s2;
        Partial& operator+=(const Partial& o) {
            xi += o.xi;
            eta += o.eta;
            if (occ_s.empty()) {
                occ_s = o.occ_s;
                occ_s2 = o.occ_s2;
            } else {
                for (size_t i = 0; i < o.occ_s.size(); ++i) {
                    occ_s[i] += o.occ_s[i];
                    occ_s2[i] += o.occ_s2[i];
                }
            }
            return *this;
        }
    };
    const WalkContext ctx(m);
    const std::vector<double> no_records;
    Partial total = run_paths<Partial>(cfg, [&](long, RngStream& rng, Partial& p) {
        if (p.occ_s.empty()) {
            p.occ_s.assign(static_cast<size_t>(m.n_states), 0.0);
            p.occ_s2.assign(static_cast<size_t>(m.n_states), 0.0);
        }
        const int j0 = draw_start(m, start, rng);
        std::vector<double> occ(static_cast<size_t>(m.n_states), 0.0);
        MapObs obs;
        obs.occ = &occ;
        const int jend = walk_path(ctx, j0, cfg.horizon, 0, no_records, rng, obs);
        p.xi.add(obs.xi, jend, m.n_states);
        p.eta.add(obs.eta, jend, m.n_states);
        for (int i = 0; i < m.n_states; ++i) {
            const double f = occ[static_cast<size_t>(i)] / cfg.horizon;
            p.occ_s[static_cast<size_t>(i)] += f;
            p.occ_s2[static_cast<size_t>(i)] += f * f;
        }
    });
    MapEstimates out;
    out.xi = total.xi.finalize();
    out.eta = total.eta.finalize();
    out.occupation.resize(static_cast<size_t>(m.n_states));
    out.occupation_se.resize(static_cast<size_t>(m.n_states));
    const double n = static_cast<double>(cfg.n_paths);
    for (int i = 0; i < m.n_states; ++i) {
        const double mu = total.occ_s[static_cast<size_t>(i)] / n;
        const double var =
            std::max(0.0, (total.occ_s2[static_cast<size_t>(i)] - n * mu * mu) / (n - 1));
        out.occupation[static_cast<size_t>(i)] = mu;
        out.occupation_se[static_cast<size_t>(i)] = std::sqrt(var / n);
    }
    return out;
}

EnsembleStats simulate_char_function(const MapModel& m, Component c, int start_state,
                                     int target_state, double w, const SimConfig& cfg) {
    const WalkContext ctx(m);
    const std::vector<double> no_records;
    Acc total = run_paths<Acc>(cfg, [&](long, RngStream& rng, Acc& p) {
        MapObs obs;
        const int jend = walk_path(ctx, start_state, cfg.horizon, 0, no_records, rng, obs);
        const double x = c == Component::Xi ? obs.xi : obs.eta;
        p.add(jend == target_state ? std::exp(w * x) : 0.0, jend, m.n_states);
    });
    return total.finalize();
}

MmgouEstimates simulate_mmgou(const MapModel& m, double v0, StartSpec start, const SimConfig& cfg) {
    struct Partial {
        Acc v, v2;
        Partial& operator+=(const Partial& o) {
            v += o.v;
            v2 += o.v2;
            return *this;
        }
    };
    const WalkContext ctx(m);
    const std::vector<double> no_records;
    Partial total = run_paths<Partial>(cfg, [&](long, RngStream& rng, Partial& p) {
        const int j0 = draw_start(m, start, rng);
        MmgouObs obs;
        obs.v = v0;
        const int jend = walk_path(ctx, j0, cfg.horizon, cfg.substeps, no_records, rng, obs);
        p.v.add(obs.v, jend, m.n_states);
        p.v2.add(obs.v * obs.v, jend, m.n_states);
    });
    MmgouEstimates out;
    out.v = total.v.finalize();
    out.v_sq = total.v2.finalize();
    return out;
}

StationaryEstimates sample_stationary(const MapModel& m, StationaryMode mode, const SimConfig& cfg,
                                      int max_order, double horizon_override, bool force) {
    StationaryEstimates out;
    double lambda1 = 0.0;
    bool have_lambda = false;
    try {
        lambda1 = leading_eigenvalue(psi_xi_matrix(m, 1));
        have_lambda = true;
    } catch (const Error&) {
    }
    const StationaryReport chk = stationarity_check(m, std::max(1.0, static_cast<double>(max_order)));
    if (!chk.exists) {
        if (!force)
            throw PreconditionError("sample_stationary: stationarity check fails; pass force to override");
        out.stationarity_warning = true;
    }

    double horizon = horizon_override;
    if (!(horizon > 0.0)) {
        // default: e^{lambda_max^xi(-1) T} < 1e-4 of the lag-0 scale
        horizon = (have_lambda && lambda1 < 0.0) ? std::log(1e4) / -lambda1 : cfg.horizon;
        horizon = std::max(horizon, 1.0);
    }
    out.horizon_used = horizon;
    out.truncation_scale = have_lambda ? std::exp(lambda1 * horizon) : kDivergent;

    struct Partial {
        std::vector<Acc> mom;
        Partial& operator+=(const Partial& o) {
            if (mom.empty()) mom.resize(o.mom.size());
            for (size_t i = 0; i < o.mom.size(); ++i) mom[i] += o.mom[i];
            return *this;
        }
    };

    SimConfig run_cfg = cfg;
    run_cfg.horizon = horizon;
    const std::vector<double> no_records;

    if (mode == StationaryMode::Forward) {
        const WalkContext ctx(m);
        Partial total = run_paths<Partial>(run_cfg, [&](long, RngStream& rng, Partial& p) {
            if (p.mom.empty()) p.mom.resize(static_cast<size_t>(max_order));
            const int j0 = draw_start(m, StartSpec::stationary(), rng);
            MmgouObs obs;
            const int jend = walk_path(ctx, j0, horizon, cfg.substeps, no_records, rng, obs);
            double pw = 1.0;
            for (int k = 0; k < max_order; ++k) {
                pw *= obs.v;
                p.mom[static_cast<size_t>(k)].add(pw, jend, m.n_states);
            }
        });
        for (auto& a : total.mom) out.moments.push_back(a.finalize());
        return out;
    }

    // dual representation: V_inf ~ -int_0^inf e^{xi*_{s-}} dL*_s on the dual (xi,L) model
    const MapModel dual = dual_model(xi_l_characteristics(m), DualComponents::Both);
    const WalkContext ctx(dual);
    Partial total = run_paths<Partial>(run_cfg, [&](long, RngStream& rng, Partial& p) {
        if (p.mom.empty()) p.mom.resize(static_cast<size_t>(max_order));
        const int j0 = draw_start(dual, StartSpec::stationary(), rng);
        DualFunctionalObs obs;
        const int jend = walk_path(ctx, j0, horizon, cfg.substeps, no_records, rng, obs);
        const double v = -obs.acc;
        double pw = 1.0;
        for (int k = 0; k < max_order; ++k) {
            pw *= v;
            p.mom[static_cast<size_t>(k)].add(pw, jend, dual.n_states);
        }
    });
    for (auto& a : total.mom) out.moments.push_back(a.finalize());
    return out;
}

ReturnEstimate estimate_return_exp_moment(const MapModel& m, Component c, int state, double kappa,
                                          const SimConfig& cfg) {
    if (m.n_states < 2) throw PreconditionError("estimate_return_exp_moment: needs |S| >= 2");
    struct Partial {
        Acc acc;
        std::vector<double> batch_sum;
        std::vector<long> batch_n;
        Partial& operator+=(const Partial& o) {
            acc += o.acc;
            if (batch_sum.empty()) {
                batch_sum = o.batch_sum;
                batch_n = o.batch_n;
            } else {
                for (size_t i = 0; i < o.batch_sum.size(); ++i) {
                    batch_sum[i] += o.batch_sum[i];
                    batch_n[i] += o.batch_n[i];
                }
            }
            return *this;
        }
    };
    const int n_batches = 10;
    const WalkContext ctx(m);
    Partial total = run_paths<Partial>(cfg, [&](long k, RngStream& rng, Partial& p) {
        if (p.batch_sum.empty()) {
            p.batch_sum.assign(n_batches, 0.0);
            p.batch_n.assign(n_batches, 0);
        }
        // exact events only: no grid needed for the value at the return time
        int j = state;
        double x = 0.0;
        for (long guard = 0; guard < 100000000L; ++guard) {
            const double r = m.exit_rate(j);
            const double hold = rng.exponential(r);
            const auto& d = m.dynamics[j];
            const auto& g = gauss_factor(d);
            double dx = (c == Component::Xi ? d.drift_xi : d.drift_eta) * hold;
            const double sq = std::sqrt(hold);
            if (g.need1) {
                const double n1 = rng.normal();
                if (c == Component::Xi) dx += sq * g.l11 * n1;
                else dx += sq * g.l21 * n1;
            }
            if (g.need2 && c == Component::Eta) dx += sq * g.l22 * rng.normal();
            x += dx;
            if (d.cp_rate > 0.0) {
                double u = rng.exponential(d.cp_rate);
                while (u < hold) {
                    const auto [zx, zy] = d.cp_law.sample(rng);
                    x += c == Component::Xi ? zx : zy;
                    u += rng.exponential(d.cp_rate);
                }
            }
            const int nxt = draw_successor(m, j, rng);
            const auto [zx, zy] = m.transition_law(j, nxt).sample(rng);
            x += c == Component::Xi ? zx : zy;
            const bool entering = j != state && nxt == state;
            j = nxt;
            if (entering) break;
        }
        const double val = std::exp(kappa * x);
        p.acc.add(val, j, m.n_states);
        const int b = static_cast<int>((k * n_batches) / std::max<long>(1, cfg.n_paths));
        const int bi = std::min(n_batches - 1, std::max(0, b));
        p.batch_sum[static_cast<size_t>(bi)] += val;
        p.batch_n[static_cast<size_t>(bi)] += 1;
    });
    ReturnEstimate out;
    out.stat = total.acc.finalize();
    for (int b = 0; b < n_batches; ++b)
        out.batch_means.push_back(total.batch_n[b] > 0 ? total.batch_sum[b] / total.batch_n[b] : 0.0);
    double lo = out.batch_means[0], hi = out.batch_means[0];
    for (double x : out.batch_means) {
        lo = std::min(lo, x);
        hi = std::max(hi, x);
    }
    const double spread_tol = 8.0 * out.stat.std_error * std::sqrt(static_cast<double>(n_batches));
    out.unstable = !std::isfinite(out.stat.std_error) || (hi - lo) > spread_tol;
    return out;
}

AcfEstimates simulate_autocovariance(const MapModel& m, const std::vector<double>& lags,
                                     double burn, const SimConfig& cfg, StartSpec start,
                                     double v0) {
    std::vector<double> records{burn};
    for (double h : lags) {
        if (h < 0.0) throw PreconditionError("simulate_autocovariance: negative lag");
        records.push_back(burn + h);
    }
    std::sort(records.begin(), records.end());
    records.erase(std::unique(records.begin(), records.end()), records.end());
    const double horizon = records.back();

    struct Partial {
        Acc base;
        std::vector<Acc> at_lag, product;
        Partial& operator+=(const Partial& o) {
            base += o.base;
            if (at_lag.empty()) {
                at_lag.resize(o.at_lag.size());
                product.resize(o.product.size());
            }
            for (size_t i = 0; i < o.at_lag.size(); ++i) {
                at_lag[i] += o.at_lag[i];
                product[i] += o.product[i];
            }
            return *this;
        }
    };

    const WalkContext ctx(m);
    SimConfig run_cfg = cfg;
    run_cfg.horizon = horizon;
    Partial total = run_paths<Partial>(run_cfg, [&](long, RngStream& rng, Partial& p) {
        if (p.at_lag.empty()) {
            p.at_lag.resize(lags.size());
            p.product.resize(lags.size());
        }
        const int j0 = draw_start(m, start, rng);
        MmgouObs obs;
        obs.v = v0;
        obs.snapshots.assign(records.size(), 0.0);
        const int jend = walk_path(ctx, j0, horizon, cfg.substeps, records, rng, obs);
        auto value_at = [&](double tt) {
            const auto it = std::lower_bound(records.begin(), records.end(), tt);
            return obs.snapshots[static_cast<size_t>(it - records.begin())];
        };
        const double v0 = value_at(burn);
        p.base.add(v0, jend, m.n_states);
        for (size_t i = 0; i < lags.size(); ++i) {
            const double vh = value_at(burn + lags[i]);
            p.at_lag[i].add(vh, jend, m.n_states);
            p.product[i].add(v0 * vh, jend, m.n_states);
        }
    });

    AcfEstimates out;
    out.base = total.base.finalize();
    for (size_t i = 0; i < lags.size(); ++i) {
        out.at_lag.push_back(total.at_lag[i].finalize());
        out.product.push_back(total.product[i].finalize());
        out.covariance.push_back(out.product[i].mean - out.base.mean * out.at_lag[i].mean);
    }
    return out;
}

}  // namespace mapmom
