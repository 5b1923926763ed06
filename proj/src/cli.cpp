#include "mapmom/cli.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapmom/crosscheck.hpp"
#include "mapmom/mc.hpp"
#include "mapmom/mmgou.hpp"
#include "mapmom/model.hpp"

namespace mapmom::cli {

namespace {

using nlohmann::json;

double parse_double(const std::string& s) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
        throw ValidationError("grid: '" + s + "' is not a number");
    return v;
}

struct Manifest {
    std::string command;
    std::string model;
    std::vector<std::pair<std::string, std::string>> params;
    std::string seed;
    double walltime_s = 0.0;
};

std::string iso_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string manifest_header(const Manifest& mf) {
    std::ostringstream s;
    s << "# mapmom " << mf.command << " v" << kVersion << "\n";
    if (!mf.model.empty()) s << "# model: " << mf.model << "\n";
    if (!mf.params.empty()) {
        s << "# params:";
        for (const auto& [k, v] : mf.params) s << " " << k << "=" << v;
        s << "\n";
    }
    if (!mf.seed.empty()) s << "# seed: " << mf.seed << "\n";
    // the only line that varies between identical runs; kept isolated
    char wall[64];
    std::snprintf(wall, sizeof(wall), "%.3f", mf.walltime_s);
    s << "# timestamp: " << iso_timestamp() << " walltime_s: " << wall << "\n";
    return s.str();
}

json manifest_json(const Manifest& mf) {
    json j;
    j["command"] = mf.command;
    j["model"] = mf.model;
    json params = json::object();
    for (const auto& [k, v] : mf.params) params[k] = v;
    j["parameters"] = params;
    if (!mf.seed.empty()) j["seed"] = mf.seed;
    j["tool_version"] = kVersion;
    j["timestamp"] = iso_timestamp();
    char wall[64];
    std::snprintf(wall, sizeof(wall), "%.3f", mf.walltime_s);
    j["walltime_s"] = wall;
    return j;
}

void emit(const std::string& text, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << text;
        return;
    }
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw ValidationError("cannot open output file: " + out_path);
    f << text;
}

Component parse_component(const std::string& s) {
    if (s == "xi") return Component::Xi;
    if (s == "eta") return Component::Eta;
    throw ValidationError("--component must be xi or eta");
}

StartSpec parse_start(bool use_pi, int state_1based, int n_states) {
    if (use_pi) return StartSpec::stationary();
    if (state_1based < 1 || state_1based > n_states)
        throw ValidationError("--state out of range (1-based)");
    return StartSpec::at(state_1based - 1);
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

}  // namespace

std::vector<double> parse_grid(const std::string& spec) {
    const auto c1 = spec.find(':');
    const auto c2 = spec.find(':', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos)
        throw ValidationError("grid: expected start:stop:count, got '" + spec + "'");
    const double start = parse_double(spec.substr(0, c1));
    const double stop = parse_double(spec.substr(c1 + 1, c2 - c1 - 1));
    long count = 0;
    {
        const std::string cs = spec.substr(c2 + 1);
        auto [ptr, ec] = std::from_chars(cs.data(), cs.data() + cs.size(), count);
        if (ec != std::errc() || ptr != cs.data() + cs.size() || count < 1)
            throw ValidationError("grid: count must be a positive integer");
    }
    std::vector<double> g;
    g.reserve(static_cast<size_t>(count));
    if (count == 1) {
        g.push_back(start);
        return g;
    }
    for (long i = 0; i < count; ++i)
        g.push_back(start + static_cast<double>(i) * (stop - start) / static_cast<double>(count - 1));
    return g;
}

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", x);
    return buf;
}

namespace {

int cmd_validate(const std::string& model_path, std::ostream& out) {
    const MapModel m = load_model_file(model_path);
    out << "ok: " << m.n_states << " states, " << m.transition_jumps.size()
        << " transition jump laws, pi = (";
    for (int j = 0; j < m.n_states; ++j) out << (j ? ", " : "") << m.pi[j];
    out << ")\n";
    return 0;
}

std::string csv_map_moments(const MapModel& m, Component c, bool use_pi, int state1,
                            const std::vector<double>& grid) {
    const StartSpec start = parse_start(use_pi, state1, m.n_states);
    std::ostringstream s;
    s << "t,mean,variance";
    for (int j = 0; j < m.n_states; ++j) s << ",hat_" << (j + 1);
    s << "\n";
    for (double t : grid) {
        double mu, var;
        std::vector<double> hat(static_cast<size_t>(m.n_states), 0.0);
        if (use_pi) {
            mu = mean(m, c, start, t);
            double m2 = 0.0;
            for (int j = 0; j < m.n_states; ++j) {
                const auto h = mean_hat(m, c, j, t);
                const auto s2 = second_moment_hat(m, c, j, t);
                for (int i = 0; i < m.n_states; ++i) {
                    hat[i] += m.pi[j] * h[i];
                    m2 += m.pi[j] * s2[i];
                }
            }
            var = m2 - mu * mu;
        } else {
            hat = mean_hat(m, c, start.state, t);
            mu = 0.0;
            for (double x : hat) mu += x;
            var = variance(m, c, start.state, t);
        }
        s << fmt17(t) << "," << fmt17(mu) << "," << fmt17(var);
        for (double x : hat) s << "," << fmt17(x);
        s << "\n";
    }
    return s.str();
}

std::string csv_mmgou(const MapModel& m, bool use_pi, int state1, double v0_mean, double v0_m2,
                      const std::vector<double>& grid) {
    const StartSpec start = parse_start(use_pi, state1, m.n_states);
    const std::vector<double> w = start.is_pi
                                      ? m.pi
                                      : [&] {
                                            std::vector<double> e(static_cast<size_t>(m.n_states), 0.0);
                                            e[start.state] = 1.0;
                                            return e;
                                        }();
    std::vector<double> v0_hat(w), v0_sq_hat(w);
    for (auto& x : v0_hat) x *= v0_mean;
    for (auto& x : v0_sq_hat) x *= v0_m2;
    std::ostringstream s;
    s << "t,mean,second_moment\n";
    for (double t : grid) {
        const TransientMoments tm = transient_second_moment_hat(m, v0_sq_hat, v0_hat, start, t);
        double mu = 0.0, m2 = 0.0;
        for (double x : tm.mean_hat) mu += x;
        for (double x : tm.second_hat) m2 += x;
        s << fmt17(t) << "," << fmt17(mu) << "," << fmt17(m2) << "\n";
    }
    return s.str();
}

std::string csv_acf(const MapModel& m, bool stationary, int state1, double v0_mean, double v0_var,
                    double base_time, const std::vector<double>& lags) {
    AcfStart start = stationary ? AcfStart::stationary_start()
                                : AcfStart::from_state(state1 - 1, v0_mean, v0_var);
    std::ostringstream s;
    s << "lag,covariance\n";
    for (double h : lags) {
        const double cov = autocovariance(m, base_time, base_time + h, start);
        s << fmt17(h) << "," << fmt17(cov) << "\n";
    }
    return s.str();
}

json stationary_json(const MapModel& m, int order) {
    const StationaryReport chk = stationarity_check(m, std::max(1.0, static_cast<double>(order)));
    json j;
    j["check"] = {{"exists", chk.exists},
                  {"kappa", chk.kappa},
                  {"conditions",
                   {{"i_psi_below_exit_rate", chk.cond_psi_vs_exit_rate},
                    {"ii_return_ratio", chk.cond_return_ratio},
                    {"iii_leading_eigenvalue", chk.cond_leading_eigenvalue},
                    {"iv_l_moments", chk.cond_l_moments}}},
                  {"lambda_max", divergent(chk.lambda_max) ? json("inf") : json(chk.lambda_max)},
                  {"notes", chk.notes}};
    if (chk.exists) {
        const MomentLadder lad = stationary_moments(m, order);
        j["moments"] = lad.mu;
        j["hat_vectors"] = lad.m_hat;
    } else {
        j["moments"] = json::array();
        j["hat_vectors"] = json::array();
    }
    return j;
}

std::string csv_simulate(const MapModel& m, const std::string& what, const SimConfig& cfg,
                         bool use_pi, int state1, Component comp, double kappa,
                         const std::string& mode, int order, double v0, bool force,
                         double horizon_override) {
    std::ostringstream s;
    s << "functional,estimate,std_error,n\n";
    auto row = [&](const std::string& name, double est, double se, long n) {
        s << name << "," << fmt17(est) << "," << fmt17(se) << "," << n << "\n";
    };
    const StartSpec start = parse_start(use_pi, state1, m.n_states);
    if (what == "map") {
        const MapEstimates est = simulate_map(m, start, cfg);
        row("xi_mean", est.xi.mean, est.xi.std_error, est.xi.n);
        row("xi_variance", est.xi.variance, est.xi.var_std_error, est.xi.n);
        row("eta_mean", est.eta.mean, est.eta.std_error, est.eta.n);
        row("eta_variance", est.eta.variance, est.eta.var_std_error, est.eta.n);
        for (int j = 0; j < m.n_states; ++j)
            row("occupation_" + std::to_string(j + 1), est.occupation[j], est.occupation_se[j],
                cfg.n_paths);
        return s.str();
    }
    if (what == "mmgou") {
        const MmgouEstimates est = simulate_mmgou(m, v0, start, cfg);
        row("v_mean", est.v.mean, est.v.std_error, est.v.n);
        row("v_second_moment", est.v_sq.mean, est.v_sq.std_error, est.v_sq.n);
        return s.str();
    }
    if (what == "stationary") {
        const StationaryMode md = mode == "dual" ? StationaryMode::Dual : StationaryMode::Forward;
        const StationaryEstimates est =
            sample_stationary(m, md, cfg, order, horizon_override, force);
        for (int k = 1; k <= order; ++k)
            row("mu" + std::to_string(k), est.moments[k - 1].mean, est.moments[k - 1].std_error,
                est.moments[k - 1].n);
        row("truncation_scale", est.truncation_scale, 0.0, 0);
        row("horizon_used", est.horizon_used, 0.0, 0);
        if (est.stationarity_warning) s << "# warning: stationarity check failed; estimates may diverge\n";
        return s.str();
    }
    if (what == "return") {
        const ReturnEstimate est = estimate_return_exp_moment(m, comp, start.state, kappa, cfg);
        row("return_exp_moment", est.stat.mean, est.stat.std_error, est.stat.n);
        if (est.unstable) s << "# warning: running mean failed to stabilize (heavy tail?)\n";
        return s.str();
    }
    throw ValidationError("--what must be map, mmgou, stationary or return");
}

std::string csv_crosscheck(const CrosscheckResult& res) {
    std::ostringstream s;
    s << "check,closed_form,mc_estimate,std_error,z,pass\n";
    for (const auto& r : res.rows) {
        if (!r.applicable) {
            std::string note = r.note;
            for (char& ch : note)
                if (ch == ',' || ch == '\n') ch = ';';
            s << r.name << ",skipped,skipped,skipped,skipped,skip(" << note << ")\n";
            continue;
        }
        s << r.name << "," << fmt17(r.closed) << "," << fmt17(r.mc) << "," << fmt17(r.se) << ","
          << fmt17(r.z) << "," << (r.pass ? 1 : 0) << "\n";
    }
    return s.str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"moment calculus and Monte Carlo for Markov-modulated processes"};
    app.require_subcommand(1);

    std::string model_path, out_path;
    std::string t_grid, lag_grid, component = "xi", suite = "quick", what = "map", mode = "forward";
    int state1 = 1, order = 2;
    bool use_pi = false, stationary_flag = false, force = false, antithetic = false;
    double v0_mean = 0.0, v0_m2 = 0.0, v0_var = 0.0, base_time = 0.0, kappa = -1.0, v0 = 0.0;
    long paths = 100000;
    unsigned long long seed = 12345;
    int substeps = 64;
    double horizon = 0.0;
    long cross_paths = 200000;
    unsigned long long cross_seed = 20240817;
    int cross_substeps = 256;

    auto add_model = [&](CLI::App* cmd) {
        cmd->add_option("model", model_path, "model JSON file")->required();
        cmd->add_option("--out", out_path, "write output to this file instead of stdout");
    };

    CLI::App* c_validate = app.add_subcommand("validate", "validate a model file");
    add_model(c_validate);

    CLI::App* c_map = app.add_subcommand("map-moments", "transient MAP mean/variance");
    add_model(c_map);
    c_map->add_option("--component", component, "xi or eta");
    c_map->add_option("--state", state1, "start state (1-based)");
    c_map->add_flag("--pi", use_pi, "start from the stationary distribution");
    c_map->add_option("--t", t_grid, "time grid start:stop:count")->required();

    CLI::App* c_mmgou = app.add_subcommand("mmgou", "MMGOU running mean and second moment");
    add_model(c_mmgou);
    c_mmgou->add_option("--t", t_grid, "time grid start:stop:count")->required();
    c_mmgou->add_option("--v0-mean", v0_mean, "E[V_0]");
    c_mmgou->add_option("--v0-m2", v0_m2, "E[V_0^2]");
    c_mmgou->add_option("--state", state1, "start state (1-based)");
    c_mmgou->add_flag("--pi", use_pi, "start from the stationary distribution");

    CLI::App* c_acf = app.add_subcommand("acf", "autocovariance over a lag grid");
    add_model(c_acf);
    c_acf->add_option("--lags", lag_grid, "lag grid start:stop:count")->required();
    c_acf->add_flag("--stationary", stationary_flag, "stationary start");
    c_acf->add_option("--start", state1, "start state (1-based)");
    c_acf->add_option("--v0-mean", v0_mean, "E[V_0] for a state start");
    c_acf->add_option("--v0-var", v0_var, "Var(V_0) for a state start");
    c_acf->add_option("--s", base_time, "base time s for Cov(V_{s+lag}, V_s)");

    CLI::App* c_stat = app.add_subcommand("stationary", "stationarity certificate and moments");
    add_model(c_stat);
    c_stat->add_option("--order", order, "highest moment order K");

    CLI::App* c_sim = app.add_subcommand("simulate", "Monte Carlo estimates");
    add_model(c_sim);
    c_sim->add_option("--what", what, "map | mmgou | stationary | return")->required();
    c_sim->add_option("--paths", paths, "number of paths");
    c_sim->add_option("--seed", seed, "master seed");
    c_sim->add_option("--substeps", substeps, "substeps per unit time");
    c_sim->add_option("--t", horizon, "horizon");
    c_sim->add_option("--state", state1, "start state (1-based)");
    c_sim->add_flag("--pi", use_pi, "start from the stationary distribution");
    c_sim->add_option("--component", component, "xi or eta");
    c_sim->add_option("--kappa", kappa, "exponent for --what return");
    c_sim->add_option("--mode", mode, "forward | dual (for --what stationary)");
    c_sim->add_option("--order", order, "moment orders (for --what stationary)");
    c_sim->add_option("--v0", v0, "initial V_0 (for --what mmgou)");
    c_sim->add_flag("--force", force, "proceed even if the stationarity check fails");
    c_sim->add_flag("--antithetic", antithetic, "antithetic path pairs");

    CLI::App* c_cross = app.add_subcommand("crosscheck", "closed forms vs Monte Carlo");
    add_model(c_cross);
    c_cross->add_option("--suite", suite, "quick | full");
    c_cross->add_option("--paths", cross_paths, "number of paths");
    c_cross->add_option("--seed", cross_seed, "master seed");
    c_cross->add_option("--substeps", cross_substeps, "substeps per unit time");

    std::vector<const char*> argv_ptrs;
    argv_ptrs.push_back("mapmom");
    for (const auto& a : args) argv_ptrs.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv_ptrs.size()), argv_ptrs.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    Timer timer;
    try {
        if (app.got_subcommand(c_validate)) {
            std::ostringstream body;
            const int code = cmd_validate(model_path, body);
            emit(body.str(), out_path, out);
            return code;
        }

        const MapModel m = load_model_file(model_path);
        Manifest mf;
        mf.model = model_path;

        if (app.got_subcommand(c_map)) {
            mf.command = "map-moments";
            mf.params = {{"component", component},
                         {"start", use_pi ? "pi" : std::to_string(state1)},
                         {"t", t_grid}};
            const std::string body =
                csv_map_moments(m, parse_component(component), use_pi, state1, parse_grid(t_grid));
            mf.walltime_s = timer.seconds();
            emit(manifest_header(mf) + body, out_path, out);
            return 0;
        }
        if (app.got_subcommand(c_mmgou)) {
            mf.command = "mmgou";
            mf.params = {{"start", use_pi ? "pi" : std::to_string(state1)},
                         {"v0_mean", fmt17(v0_mean)},
                         {"v0_m2", fmt17(v0_m2)},
                         {"t", t_grid}};
            const std::string body = csv_mmgou(m, use_pi, state1, v0_mean, v0_m2, parse_grid(t_grid));
            mf.walltime_s = timer.seconds();
            emit(manifest_header(mf) + body, out_path, out);
            return 0;
        }
        if (app.got_subcommand(c_acf)) {
            if (!stationary_flag && !c_acf->count("--start"))
                throw ValidationError("acf: need --stationary or --start j");
            mf.command = "acf";
            mf.params = {{"start", stationary_flag ? "stationary" : std::to_string(state1)},
                         {"lags", lag_grid}};
            const std::string body = csv_acf(m, stationary_flag, state1, v0_mean, v0_var, base_time,
                                             parse_grid(lag_grid));
            mf.walltime_s = timer.seconds();
            emit(manifest_header(mf) + body, out_path, out);
            return 0;
        }
        if (app.got_subcommand(c_stat)) {
            mf.command = "stationary";
            mf.params = {{"order", std::to_string(order)}};
            json j = stationary_json(m, order);
            mf.walltime_s = timer.seconds();
            j["manifest"] = manifest_json(mf);
            emit(j.dump(2) + "\n", out_path, out);
            return 0;
        }
        if (app.got_subcommand(c_sim)) {
            SimConfig cfg;
            cfg.n_paths = paths;
            cfg.master_seed = seed;
            cfg.substeps = substeps;
            cfg.horizon = horizon > 0.0 ? horizon : 1.0;
            cfg.antithetic = antithetic;
            mf.command = "simulate";
            mf.params = {{"what", what},
                         {"paths", std::to_string(paths)},
                         {"substeps", std::to_string(substeps)},
                         {"horizon", fmt17(cfg.horizon)}};
            mf.seed = std::to_string(seed);
            const std::string body = csv_simulate(m, what, cfg, use_pi, state1,
                                                  parse_component(component), kappa, mode, order,
                                                  v0, force, horizon);
            mf.walltime_s = timer.seconds();
            emit(manifest_header(mf) + body, out_path, out);
            return 0;
        }
        if (app.got_subcommand(c_cross)) {
            SimConfig cfg;
            cfg.n_paths = cross_paths;
            cfg.master_seed = cross_seed;
            cfg.substeps = cross_substeps;
            mf.command = "crosscheck";
            mf.params = {{"suite", suite},
                         {"paths", std::to_string(cross_paths)},
                         {"substeps", std::to_string(cross_substeps)}};
            mf.seed = std::to_string(cross_seed);
            const CrosscheckResult res = run_crosscheck(m, suite, cfg);
            mf.walltime_s = timer.seconds();
            emit(manifest_header(mf) + csv_crosscheck(res), out_path, out);
            return res.all_pass ? 0 : 3;
        }
    } catch (const SchemaError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ReducibleChainError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}

int main_entry(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

}  // namespace mapmom::cli
