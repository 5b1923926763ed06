#include "mapmom/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

namespace mapmom {

namespace {

using nlohmann::json;

bool strongly_connected(const Matrix& q) {
    const int n = q.rows();
    if (n <= 1) return true;
    auto reach = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<int> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const int i = stack.back();
            stack.pop_back();
            for (int j = 0; j < n; ++j) {
                if (seen[j] || i == j) continue;
                const double rate = forward ? q(i, j) : q(j, i);
                if (rate > 0.0) {
                    seen[j] = 1;
                    stack.push_back(j);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    return reach(true) && reach(false);
}

}  // namespace

std::vector<double> stationary_distribution(const Matrix& q) {
    if (!q.square()) throw NonSquareError("stationary_distribution: Q not square");
    const int n = q.rows();
    if (n == 1) return {1.0};

    // appended system: rows of Q^T plus the all-ones normalization row
    Matrix m(n + 1, n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = q(j, i);
    for (int j = 0; j < n; ++j) m(n, j) = 1.0;
    std::vector<double> rhs(static_cast<size_t>(n) + 1, 0.0);
    rhs[n] = 1.0;

    // normal equations
    Matrix a(n, n, 0.0);
    std::vector<double> b(static_cast<size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k <= n; ++k) s += m(k, i) * m(k, j);
            a(i, j) = s;
        }
        double s = 0.0;
        for (int k = 0; k <= n; ++k) s += m(k, i) * rhs[k];
        b[i] = s;
    }

    std::vector<double> pi;
    try {
        pi = solve(a, b);
    } catch (const SingularMatrixError& e) {
        throw SingularSystemError(std::string("stationary_distribution: ") + e.what());
    }

    double total = 0.0;
    for (double x : pi) total += x;
    if (!(std::fabs(total) > 1e-300))
        throw SingularSystemError("stationary_distribution: degenerate solution");
    for (double& x : pi) x /= total;

    const double scale = std::max(1.0, q.norm_inf());
    double resid = 0.0;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int i = 0; i < n; ++i) s += pi[i] * q(i, j);
        resid = std::max(resid, std::fabs(s));
    }
    if (resid > 1e-10 * scale)
        throw SingularSystemError("stationary_distribution: residual " + std::to_string(resid) +
                                  " exceeds tolerance");
    for (double x : pi)
        if (!(x > 0.0))
            throw SingularSystemError("stationary_distribution: not strictly positive");
    return pi;
}

void MapModel::validate_and_finalize() {
    if (n_states < 1) throw ValidationError("states: must be >= 1");
    if (q.rows() != n_states || q.cols() != n_states)
        throw ValidationError("Q: must be " + std::to_string(n_states) + "x" + std::to_string(n_states));
    if (!q.all_finite()) throw ValidationError("Q: non-finite entry");
    for (int i = 0; i < n_states; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_states; ++j) {
            if (i != j && q(i, j) < 0.0)
                throw ValidationError("Q[" + std::to_string(i) + "][" + std::to_string(j) +
                                      "]: negative off-diagonal rate");
            row += q(i, j);
        }
        if (std::fabs(row) > 1e-12)
            throw ValidationError("Q[" + std::to_string(i) + "]: row sums to " + std::to_string(row));
    }
    if (!strongly_connected(q)) throw ReducibleChainError("Q: chain is not irreducible");

    if (static_cast<int>(dynamics.size()) != n_states)
        throw ValidationError("dynamics: need exactly " + std::to_string(n_states) + " entries");
    for (int j = 0; j < n_states; ++j) {
        const auto& d = dynamics[j];
        const std::string path = "dynamics[" + std::to_string(j) + "]";
        for (double v : {d.drift_xi, d.drift_eta, d.sigma2_xi, d.sigma2_eta, d.sigma_xi_eta, d.cp_rate})
            if (!std::isfinite(v)) throw ValidationError(path + ": non-finite field");
        if (d.sigma2_xi < 0.0) throw ValidationError(path + ".sigma2_xi: must be >= 0");
        if (d.sigma2_eta < 0.0) throw ValidationError(path + ".sigma2_eta: must be >= 0");
        if (d.sigma2_xi * d.sigma2_eta - d.sigma_xi_eta * d.sigma_xi_eta < -1e-12)
            throw ValidationError(path + ": Gaussian block is not positive semidefinite");
        if (d.cp_rate < 0.0) throw ValidationError(path + ".cp_rate: must be >= 0");
    }

    for (const auto& [key, law] : transition_jumps) {
        (void)law;
        const auto [i, j] = key;
        const std::string path =
            "transition_jumps." + std::to_string(i + 1) + "->" + std::to_string(j + 1);
        if (i < 0 || j < 0 || i >= n_states || j >= n_states || i == j)
            throw ValidationError(path + ": invalid state pair");
        if (!(q(i, j) > 0.0)) throw ValidationError(path + ": q_ij is not positive");
    }

    pi = stationary_distribution(q);
}

namespace {

JumpLaw univariate_law_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    if (!j.contains("family")) throw SchemaError(path + ".family: missing");
    const std::string fam = j.at("family").get<std::string>();
    auto need = [&](const char* key) -> const json& {
        if (!j.contains(key)) throw SchemaError(path + "." + key + ": missing");
        return j.at(key);
    };
    auto allow_only = [&](std::initializer_list<std::string> keys) {
        for (const auto& [k, v] : j.items()) {
            (void)v;
            if (std::find(keys.begin(), keys.end(), k) == keys.end())
                throw SchemaError(path + "." + k + ": unknown key");
        }
    };
    try {
        if (fam == "constant") {
            allow_only({"family", "value"});
            return JumpLaw::constant(need("value").get<double>());
        }
        if (fam == "normal") {
            allow_only({"family", "mean", "var"});
            return JumpLaw::normal(need("mean").get<double>(), need("var").get<double>());
        }
        if (fam == "exponential") {
            allow_only({"family", "rate", "sign"});
            return JumpLaw::exponential(need("rate").get<double>(), need("sign").get<int>());
        }
        if (fam == "discrete") {
            allow_only({"family", "atoms"});
            std::vector<std::pair<double, double>> atoms;
            for (const auto& a : need("atoms")) {
                if (!a.is_array() || a.size() != 2)
                    throw SchemaError(path + ".atoms: each atom is [value, prob]");
                atoms.emplace_back(a[0].get<double>(), a[1].get<double>());
            }
            return JumpLaw::discrete(std::move(atoms));
        }
        if (fam == "pareto") {
            allow_only({"family", "alpha", "xmin", "sign"});
            return JumpLaw::pareto(need("alpha").get<double>(), need("xmin").get<double>(),
                                   need("sign").get<int>());
        }
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    throw SchemaError(path + ".family: unknown family '" + fam + "'");
}

BivariateJumpLaw bivariate_law_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw SchemaError(path + ": expected an object");
    if (!j.contains("joint")) throw SchemaError(path + ".joint: missing");
    const std::string kind = j.at("joint").get<std::string>();
    try {
        if (kind == "independent") {
            for (const auto& [k, v] : j.items()) {
                (void)v;
                if (k != "joint" && k != "xi" && k != "eta")
                    throw SchemaError(path + "." + k + ": unknown key");
            }
            if (!j.contains("xi")) throw SchemaError(path + ".xi: missing");
            if (!j.contains("eta")) throw SchemaError(path + ".eta: missing");
            return BivariateJumpLaw::independent(univariate_law_from_json(j.at("xi"), path + ".xi"),
                                                 univariate_law_from_json(j.at("eta"), path + ".eta"));
        }
        if (kind == "discrete") {
            for (const auto& [k, v] : j.items()) {
                (void)v;
                if (k != "joint" && k != "atoms")
                    throw SchemaError(path + "." + k + ": unknown key");
            }
            if (!j.contains("atoms")) throw SchemaError(path + ".atoms: missing");
            std::vector<std::array<double, 3>> atoms;
            for (const auto& a : j.at("atoms")) {
                if (!a.is_array() || a.size() != 3)
                    throw SchemaError(path + ".atoms: each atom is [x, y, prob]");
                atoms.push_back({a[0].get<double>(), a[1].get<double>(), a[2].get<double>()});
            }
            return BivariateJumpLaw::joint_discrete(std::move(atoms));
        }
    } catch (const ValidationError& e) {
        throw ValidationError(path + ": " + e.what());
    }
    throw SchemaError(path + ".joint: must be 'independent' or 'discrete'");
}

}  // namespace

MapModel parse_model(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("model: not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("model: top level must be an object");
    for (const auto& [k, v] : doc.items()) {
        (void)v;
        if (k != "states" && k != "Q" && k != "dynamics" && k != "transition_jumps")
            throw SchemaError("model." + k + ": unknown key");
    }
    for (const char* key : {"states", "Q", "dynamics"})
        if (!doc.contains(key)) throw SchemaError(std::string("model.") + key + ": missing");

    MapModel m;
    if (!doc["states"].is_number_integer()) throw SchemaError("states: expected an integer");
    m.n_states = doc["states"].get<int>();
    if (m.n_states < 1) throw ValidationError("states: must be >= 1");

    const json& qj = doc["Q"];
    if (!qj.is_array() || static_cast<int>(qj.size()) != m.n_states)
        throw SchemaError("Q: expected " + std::to_string(m.n_states) + " rows");
    m.q = Matrix(m.n_states, m.n_states);
    for (int i = 0; i < m.n_states; ++i) {
        if (!qj[i].is_array() || static_cast<int>(qj[i].size()) != m.n_states)
            throw SchemaError("Q[" + std::to_string(i) + "]: expected " + std::to_string(m.n_states) +
                              " entries");
        for (int j = 0; j < m.n_states; ++j) m.q(i, j) = qj[i][j].get<double>();
    }

    const json& dj = doc["dynamics"];
    if (!dj.is_array() || static_cast<int>(dj.size()) != m.n_states)
        throw SchemaError("dynamics: expected " + std::to_string(m.n_states) + " entries");
    m.dynamics.resize(m.n_states);
    for (int i = 0; i < m.n_states; ++i) {
        const std::string path = "dynamics[" + std::to_string(i) + "]";
        const json& e = dj[i];
        if (!e.is_object()) throw SchemaError(path + ": expected an object");
        StateDynamics d;
        for (const auto& [k, v] : e.items()) {
            if (k == "drift_xi") d.drift_xi = v.get<double>();
            else if (k == "drift_eta") d.drift_eta = v.get<double>();
            else if (k == "sigma2_xi") d.sigma2_xi = v.get<double>();
            else if (k == "sigma2_eta") d.sigma2_eta = v.get<double>();
            else if (k == "sigma_xi_eta") d.sigma_xi_eta = v.get<double>();
            else if (k == "cp_rate") d.cp_rate = v.get<double>();
            else if (k == "cp_law") d.cp_law = bivariate_law_from_json(v, path + ".cp_law");
            else throw SchemaError(path + "." + k + ": unknown key");
        }
        m.dynamics[i] = std::move(d);
    }

    if (doc.contains("transition_jumps")) {
        const json& tj = doc["transition_jumps"];
        if (!tj.is_object()) throw SchemaError("transition_jumps: expected an object");
        for (const auto& [key, value] : tj.items()) {
            const std::string path = "transition_jumps." + key;
            const auto arrow = key.find("->");
            if (arrow == std::string::npos) throw SchemaError(path + ": key must look like 'i->j'");
            int i = 0, j = 0;
            try {
                i = std::stoi(key.substr(0, arrow));
                j = std::stoi(key.substr(arrow + 2));
            } catch (const std::exception&) {
                throw SchemaError(path + ": key must look like 'i->j'");
            }
            if (i < 1 || j < 1 || i > m.n_states || j > m.n_states)
                throw ValidationError(path + ": state index out of range (1-based)");
            m.transition_jumps.emplace(std::make_pair(i - 1, j - 1),
                                       bivariate_law_from_json(value, path));
        }
    }

    m.validate_and_finalize();
    return m;
}

MapModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open model file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

MapModel ul_characteristics(const MapModel& m, bool require_explicit_laws) {
    MapModel u = m;
    for (int j = 0; j < m.n_states; ++j) {
        const auto& d = m.dynamics[j];
        auto& e = u.dynamics[j];
        e.drift_xi = -d.drift_xi + 0.5 * d.sigma2_xi;
        e.drift_eta = d.drift_eta - d.sigma_xi_eta;
        e.sigma2_xi = d.sigma2_xi;
        e.sigma2_eta = d.sigma2_eta;
        e.sigma_xi_eta = -d.sigma_xi_eta;
        e.cp_law = d.cp_law.ul_view(require_explicit_laws);
    }
    for (auto& [key, law] : u.transition_jumps) {
        (void)key;
        law = law.ul_view(require_explicit_laws);
    }
    u.validate_and_finalize();
    return u;
}

MapModel xi_l_characteristics(const MapModel& m) {
    MapModel x = m;
    for (int j = 0; j < m.n_states; ++j) {
        const auto& d = m.dynamics[j];
        auto& e = x.dynamics[j];
        e.drift_eta = d.drift_eta - d.sigma_xi_eta;
        e.cp_law = d.cp_law.xi_l_view();
    }
    for (auto& [key, law] : x.transition_jumps) {
        (void)key;
        law = law.xi_l_view();
    }
    x.validate_and_finalize();
    return x;
}

MapModel dual_model(const MapModel& m, DualComponents which) {
    const bool nx = which == DualComponents::Xi || which == DualComponents::Both;
    const bool ny = which == DualComponents::Eta || which == DualComponents::Both;
    MapModel d;
    d.n_states = m.n_states;
    d.q = Matrix(m.n_states, m.n_states);
    for (int i = 0; i < m.n_states; ++i) {
        double row = 0.0;
        for (int j = 0; j < m.n_states; ++j) {
            if (i == j) continue;
            d.q(i, j) = m.pi[j] * m.q(j, i) / m.pi[i];
            row += d.q(i, j);
        }
        d.q(i, i) = -row;
    }
    d.dynamics = m.dynamics;
    for (auto& e : d.dynamics) {
        if (nx) e.drift_xi = -e.drift_xi;
        if (ny) e.drift_eta = -e.drift_eta;
        if (nx != ny) e.sigma_xi_eta = -e.sigma_xi_eta;
        e.cp_law = e.cp_law.negated(nx, ny);
    }
    for (const auto& [key, law] : m.transition_jumps) {
        const auto [i, j] = key;
        d.transition_jumps.emplace(std::make_pair(j, i), law.negated(nx, ny));
    }
    d.validate_and_finalize();
    return d;
}

}  // namespace mapmom
