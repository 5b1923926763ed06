#include "mapmom/laws.hpp"

#include <algorithm>
#include <cmath>

namespace mapmom {

namespace detail {

double ipow(double base, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= base;
    return r;
}

double binom(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    double r = 1.0;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

double upper_incomplete_gamma(double s, double x) {
    if (!(x > 0.0)) throw PreconditionError("upper_incomplete_gamma: need x > 0");
    if (s <= 0.0) {
        // Gamma(s,x) = (Gamma(s+1,x) - x^s e^{-x}) / s
        const double g = upper_incomplete_gamma(s + 1.0, x);
        return (g - std::pow(x, s) * std::exp(-x)) / s;
    }
    if (x < s + 1.0) {
        // lower-incomplete series, then complement
        double term = 1.0 / s;
        double sum = term;
        for (int n = 1; n < 1000; ++n) {
            term *= x / (s + n);
            sum += term;
            if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
        }
        const double lower = std::pow(x, s) * std::exp(-x) * sum;
        return std::tgamma(s) - lower;
    }
    // modified Lentz continued fraction
    const double tiny = 1e-300;
    double b = x + 1.0 - s;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 1000; ++i) {
        const double an = -static_cast<double>(i) * (i - s);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double delta = d * c;
        h *= delta;
        if (std::fabs(delta - 1.0) < 1e-16) break;
    }
    return std::exp(-x) * std::pow(x, s) * h;
}

namespace {

// E[W^p] for W ~ N(mu, v)
double normal_moment(double mu, double v, int p) {
    double sum = 0.0;
    for (int k = 0; k <= p; k += 2) {
        double dfact = 1.0;  // (k-1)!!
        for (int i = k - 1; i > 1; i -= 2) dfact *= i;
        sum += binom(p, k) * dfact * std::pow(v, k / 2.0) * ipow(mu, p - k);
    }
    return sum;
}

}  // namespace
}  // namespace detail

using detail::binom;
using detail::ipow;

// ---------------------------------------------------------------------------
// JumpLaw

JumpLaw JumpLaw::constant(double value) {
    if (!std::isfinite(value)) throw ValidationError("constant law: non-finite value");
    JumpLaw l;
    l.family_ = LawFamily::Constant;
    l.a_ = value;
    return l;
}

JumpLaw JumpLaw::normal(double mean, double var) {
    if (!std::isfinite(mean) || !std::isfinite(var)) throw ValidationError("normal law: non-finite parameter");
    if (var < 0.0) throw ValidationError("normal law: var must be >= 0");
    JumpLaw l;
    l.family_ = LawFamily::Normal;
    l.a_ = mean;
    l.b_ = var;
    return l;
}

JumpLaw JumpLaw::exponential(double rate, int sign) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("exponential law: rate must be > 0");
    if (sign != 1 && sign != -1) throw ValidationError("exponential law: sign must be 1 or -1");
    JumpLaw l;
    l.family_ = LawFamily::Exponential;
    l.a_ = rate;
    l.sign_ = sign;
    return l;
}

JumpLaw JumpLaw::discrete(std::vector<std::pair<double, double>> atoms) {
    if (atoms.empty()) throw ValidationError("discrete law: needs at least one atom");
    double total = 0.0;
    for (const auto& [x, p] : atoms) {
        if (!std::isfinite(x) || !std::isfinite(p)) throw ValidationError("discrete law: non-finite atom");
        if (p < 0.0) throw ValidationError("discrete law: negative probability");
        total += p;
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw ValidationError("discrete law: probabilities sum to " + std::to_string(total));
    JumpLaw l;
    l.family_ = LawFamily::Discrete;
    l.atoms_ = std::move(atoms);
    return l;
}

JumpLaw JumpLaw::pareto(double alpha, double xmin, int sign) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ValidationError("pareto law: alpha must be > 0");
    if (!(xmin > 0.0) || !std::isfinite(xmin)) throw ValidationError("pareto law: xmin must be > 0");
    if (sign != 1 && sign != -1) throw ValidationError("pareto law: sign must be 1 or -1");
    JumpLaw l;
    l.family_ = LawFamily::Pareto;
    l.a_ = alpha;
    l.b_ = xmin;
    l.sign_ = sign;
    return l;
}

double JumpLaw::moment(int p) const {
    if (p < 0) throw PreconditionError("JumpLaw::moment: p must be >= 0");
    if (p == 0) return 1.0;
    switch (family_) {
        case LawFamily::Constant:
            return ipow(a_, p);
        case LawFamily::Normal:
            return detail::normal_moment(a_, b_, p);
        case LawFamily::Exponential: {
            double f = 1.0;
            for (int i = 2; i <= p; ++i) f *= i;
            return ipow(static_cast<double>(sign_), p) * f / std::pow(a_, p);
        }
        case LawFamily::Discrete: {
            double s = 0.0;
            for (const auto& [x, pr] : atoms_) s += pr * ipow(x, p);
            return s;
        }
        case LawFamily::Pareto: {
            if (p >= a_) return kDivergent;
            return ipow(static_cast<double>(sign_), p) * a_ * std::pow(b_, p) / (a_ - p);
        }
    }
    return kDivergent;
}

bool JumpLaw::abs_moment_finite(double p) const {
    return family_ != LawFamily::Pareto || p < a_;
}

double JumpLaw::expmoment(double theta) const {
    switch (family_) {
        case LawFamily::Constant:
            return std::exp(theta * a_);
        case LawFamily::Normal:
            return std::exp(theta * a_ + 0.5 * theta * theta * b_);
        case LawFamily::Exponential: {
            const double u = theta * sign_;
            if (u >= a_) return kDivergent;
            return a_ / (a_ - u);
        }
        case LawFamily::Discrete: {
            double s = 0.0;
            for (const auto& [x, pr] : atoms_) s += pr * std::exp(theta * x);
            return s;
        }
        case LawFamily::Pareto: {
            const double u = theta * sign_;
            if (u > 0.0) return kDivergent;
            if (u == 0.0) return 1.0;
            const double s = -u;
            return a_ * std::pow(s * b_, a_) * detail::upper_incomplete_gamma(-a_, s * b_);
        }
    }
    return kDivergent;
}

double JumpLaw::exp_weighted_moment(double theta, int p) const {
    if (p < 0) throw PreconditionError("JumpLaw::exp_weighted_moment: p must be >= 0");
    if (p == 0) return expmoment(theta);
    if (theta == 0.0) return moment(p);
    switch (family_) {
        case LawFamily::Constant:
            return ipow(a_, p) * std::exp(theta * a_);
        case LawFamily::Normal:
            // Gaussian tilt: E[Z^p e^{tZ}] = mgf(t) E[W^p], W ~ N(mean + t var, var)
            return std::exp(theta * a_ + 0.5 * theta * theta * b_) *
                   detail::normal_moment(a_ + theta * b_, b_, p);
        case LawFamily::Exponential: {
            const double u = theta * sign_;
            if (u >= a_) return kDivergent;
            double f = 1.0;
            for (int i = 2; i <= p; ++i) f *= i;
            return ipow(static_cast<double>(sign_), p) * a_ * f / std::pow(a_ - u, p + 1);
        }
        case LawFamily::Discrete: {
            double s = 0.0;
            for (const auto& [x, pr] : atoms_) s += pr * ipow(x, p) * std::exp(theta * x);
            return s;
        }
        case LawFamily::Pareto: {
            const double u = theta * sign_;
            if (u > 0.0) return kDivergent;
            const double s = -u;
            // E[P^p e^{-sP}] = alpha xmin^alpha s^{alpha-p} Gamma(p - alpha, s xmin)
            const double v = a_ * std::pow(b_, a_) * std::pow(s, a_ - p) *
                             detail::upper_incomplete_gamma(p - a_, s * b_);
            return ipow(static_cast<double>(sign_), p) * v;
        }
    }
    return kDivergent;
}

bool JumpLaw::is_zero() const {
    switch (family_) {
        case LawFamily::Constant:
            return a_ == 0.0;
        case LawFamily::Normal:
            return a_ == 0.0 && b_ == 0.0;
        case LawFamily::Discrete:
            return std::all_of(atoms_.begin(), atoms_.end(),
                               [](const auto& a) { return a.first == 0.0 || a.second == 0.0; });
        default:
            return false;
    }
}

double JumpLaw::sample(RngStream& rng) const {
    switch (family_) {
        case LawFamily::Constant:
            return a_;
        case LawFamily::Normal:
            return a_ + std::sqrt(b_) * rng.normal();
        case LawFamily::Exponential:
            return sign_ * rng.exponential(a_);
        case LawFamily::Discrete: {
            double total = 0.0;
            for (const auto& a : atoms_) total += a.second;
            double u = rng.uniform() * total;
            for (const auto& [x, p] : atoms_) {
                u -= p;
                if (u <= 0.0) return x;
            }
            return atoms_.back().first;
        }
        case LawFamily::Pareto:
            return sign_ * b_ * std::pow(rng.uniform(), -1.0 / a_);
    }
    return 0.0;
}

JumpLaw JumpLaw::negated() const {
    switch (family_) {
        case LawFamily::Constant:
            return constant(-a_);
        case LawFamily::Normal:
            return normal(-a_, b_);
        case LawFamily::Exponential:
            return exponential(a_, -sign_);
        case LawFamily::Discrete: {
            auto atoms = atoms_;
            for (auto& [x, p] : atoms) x = -x;
            return discrete(std::move(atoms));
        }
        case LawFamily::Pareto:
            return pareto(a_, b_, -sign_);
    }
    return *this;
}

// ---------------------------------------------------------------------------
// BivariateJumpLaw

BivariateJumpLaw BivariateJumpLaw::independent(JumpLaw xi, JumpLaw eta) {
    BivariateJumpLaw l;
    l.joint_ = false;
    l.xi_ = std::move(xi);
    l.eta_ = std::move(eta);
    return l;
}

BivariateJumpLaw BivariateJumpLaw::joint_discrete(std::vector<std::array<double, 3>> atoms) {
    if (atoms.empty()) throw ValidationError("joint discrete law: needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!std::isfinite(a[0]) || !std::isfinite(a[1]) || !std::isfinite(a[2]))
            throw ValidationError("joint discrete law: non-finite atom");
        if (a[2] < 0.0) throw ValidationError("joint discrete law: negative probability");
        total += a[2];
    }
    if (std::fabs(total - 1.0) > 1e-12)
        throw ValidationError("joint discrete law: probabilities sum to " + std::to_string(total));
    BivariateJumpLaw l;
    l.joint_ = true;
    l.atoms_ = std::move(atoms);
    return l;
}

BivariateJumpLaw BivariateJumpLaw::point_mass(double x, double y) {
    return joint_discrete({{x, y, 1.0}});
}

const BivariateJumpLaw& BivariateJumpLaw::zero() {
    static const BivariateJumpLaw z = point_mass(0.0, 0.0);
    return z;
}

bool BivariateJumpLaw::is_zero() const {
    if (tf_ != PairTransform::None) return false;
    if (joint_)
        return std::all_of(atoms_.begin(), atoms_.end(), [](const auto& a) {
            return a[2] == 0.0 || (a[0] == 0.0 && a[1] == 0.0);
        });
    return xi_.is_zero() && eta_.is_zero();
}

bool BivariateJumpLaw::base_xi_is_zero() const {
    if (joint_)
        return std::all_of(atoms_.begin(), atoms_.end(),
                           [](const auto& a) { return a[2] == 0.0 || a[0] == 0.0; });
    return xi_.is_zero();
}

bool BivariateJumpLaw::base_eta_is_zero() const {
    if (joint_)
        return std::all_of(atoms_.begin(), atoms_.end(),
                           [](const auto& a) { return a[2] == 0.0 || a[1] == 0.0; });
    return eta_.is_zero();
}

double BivariateJumpLaw::base_cross(int a, double theta, int b) const {
    if (joint_) {
        double s = 0.0;
        for (const auto& at : atoms_)
            s += at[2] * ipow(at[0], a) * std::exp(theta * at[0]) * ipow(at[1], b);
        return s;
    }
    const double fx = xi_.exp_weighted_moment(theta, a);
    const double fy = eta_.moment(b);
    if (divergent(fx)) return (b >= 1 && eta_.is_zero()) ? 0.0 : kDivergent;
    if (divergent(fy)) return (a >= 1 && xi_.is_zero()) ? 0.0 : kDivergent;
    return fx * fy;
}

double BivariateJumpLaw::exp_weighted_cross(int a, double theta, int b) const {
    if (a < 0 || b < 0) throw PreconditionError("exp_weighted_cross: powers must be >= 0");
    switch (tf_) {
        case PairTransform::None:
            return base_cross(a, theta, b);
        case PairTransform::XiL: {
            // zeta' = sx*zeta, chi' = sy*e^{-zeta}*chi
            const double scale = ipow(sx_, a) * ipow(sy_, b);
            const double v = base_cross(a, theta * sx_ - b, b);
            return divergent(v) ? kDivergent : scale * v;
        }
        case PairTransform::UL: {
            // zeta' = sx*(e^{-zeta}-1), chi' = sy*e^{-zeta}*chi
            if (theta != 0.0)
                throw UnsupportedLawError(
                    "exponential moments of a transformed jump view are not representable; "
                    "reify the law (constant/discrete base) first");
            const double scale = ipow(sx_, a) * ipow(sy_, b);
            double sum = 0.0;
            for (int i = 0; i <= a; ++i) {
                const double term = base_cross(0, -static_cast<double>(i + b), b);
                if (divergent(term)) return kDivergent;
                sum += binom(a, i) * ipow(-1.0, a - i) * term;
            }
            return scale * sum;
        }
    }
    return kDivergent;
}

double BivariateJumpLaw::comp_moment(Component c, int p) const {
    return c == Component::Xi ? exp_weighted_cross(p, 0.0, 0) : exp_weighted_cross(0, 0.0, p);
}

double BivariateJumpLaw::comp_expmoment(Component c, double theta) const {
    if (tf_ == PairTransform::None) {
        if (joint_) {
            double s = 0.0;
            for (const auto& at : atoms_) s += at[2] * std::exp(theta * (c == Component::Xi ? at[0] : at[1]));
            return s;
        }
        return c == Component::Xi ? xi_.expmoment(theta) : eta_.expmoment(theta);
    }
    if (tf_ == PairTransform::XiL && c == Component::Xi) return base_cross(0, theta * sx_, 0);
    throw UnsupportedLawError(
        "exponential moment of a transformed jump component is not representable exactly");
}

bool BivariateJumpLaw::comp_abs_moment_finite(Component c, double p) const {
    if (joint_) return true;  // finite support survives every transform here
    switch (tf_) {
        case PairTransform::None:
            return c == Component::Xi ? xi_.abs_moment_finite(p) : eta_.abs_moment_finite(p);
        case PairTransform::XiL:
            if (c == Component::Xi) return xi_.abs_moment_finite(p);
            // |e^{-zeta} chi|^p integrable iff E[e^{-p zeta}] and E[|chi|^p] are
            return !divergent(xi_.expmoment(-p)) && eta_.abs_moment_finite(p);
        case PairTransform::UL:
            if (c == Component::Xi) return !divergent(xi_.expmoment(-p));
            return !divergent(xi_.expmoment(-p)) && eta_.abs_moment_finite(p);
    }
    return false;
}

std::pair<double, double> BivariateJumpLaw::sample(RngStream& rng) const {
    double x, y;
    if (joint_) {
        double total = 0.0;
        for (const auto& a : atoms_) total += a[2];
        double u = rng.uniform() * total;
        size_t pick = atoms_.size() - 1;
        for (size_t i = 0; i < atoms_.size(); ++i) {
            u -= atoms_[i][2];
            if (u <= 0.0) {
                pick = i;
                break;
            }
        }
        x = atoms_[pick][0];
        y = atoms_[pick][1];
    } else {
        x = xi_.sample(rng);
        y = eta_.sample(rng);
    }
    switch (tf_) {
        case PairTransform::None:
            return {x, y};
        case PairTransform::XiL:
            return {sx_ * x, sy_ * std::exp(-x) * y};
        case PairTransform::UL:
            return {sx_ * (std::exp(-x) - 1.0), sy_ * std::exp(-x) * y};
    }
    return {x, y};
}

BivariateJumpLaw BivariateJumpLaw::negated(bool neg_xi, bool neg_eta) const {
    BivariateJumpLaw l = *this;
    if (tf_ != PairTransform::None) {
        if (neg_xi) l.sx_ = -l.sx_;
        if (neg_eta) l.sy_ = -l.sy_;
        return l;
    }
    if (joint_) {
        for (auto& a : l.atoms_) {
            if (neg_xi) a[0] = -a[0];
            if (neg_eta) a[1] = -a[1];
        }
        return l;
    }
    if (neg_xi) l.xi_ = l.xi_.negated();
    if (neg_eta) l.eta_ = l.eta_.negated();
    return l;
}

namespace {

// atom extraction for finitely supported univariate laws
std::optional<std::vector<std::pair<double, double>>> law_atoms(const JumpLaw& l) {
    switch (l.family()) {
        case LawFamily::Constant:
            return std::vector<std::pair<double, double>>{{l.param1(), 1.0}};
        case LawFamily::Discrete:
            return l.atoms();
        default:
            return std::nullopt;
    }
}

}  // namespace

std::optional<BivariateJumpLaw> BivariateJumpLaw::try_reify() const {
    if (tf_ != PairTransform::None) return std::nullopt;
    if (joint_) return *this;
    const auto ax = law_atoms(xi_);
    const auto ay = law_atoms(eta_);
    if (!ax || !ay) return std::nullopt;
    std::vector<std::array<double, 3>> atoms;
    atoms.reserve(ax->size() * ay->size());
    for (const auto& [x, px] : *ax)
        for (const auto& [y, py] : *ay) atoms.push_back({x, y, px * py});
    return joint_discrete(std::move(atoms));
}

BivariateJumpLaw BivariateJumpLaw::ul_view(bool require_explicit) const {
    if (tf_ != PairTransform::None)
        throw UnsupportedLawError("ul_view: law is already a transformed view");
    if (auto reified = try_reify()) {
        auto atoms = reified->atoms_;
        for (auto& a : atoms) {
            const double e = std::exp(-a[0]);
            a[1] = e * a[1];
            a[0] = e - 1.0;
        }
        return joint_discrete(std::move(atoms));
    }
    if (require_explicit)
        throw UnsupportedLawError("ul_view: transformed law has no exact parametric family");
    BivariateJumpLaw l = *this;
    l.tf_ = PairTransform::UL;
    return l;
}

BivariateJumpLaw BivariateJumpLaw::xi_l_view(bool require_explicit) const {
    if (tf_ != PairTransform::None)
        throw UnsupportedLawError("xi_l_view: law is already a transformed view");
    if (auto reified = try_reify()) {
        auto atoms = reified->atoms_;
        for (auto& a : atoms) a[1] = std::exp(-a[0]) * a[1];
        return joint_discrete(std::move(atoms));
    }
    if (require_explicit)
        throw UnsupportedLawError("xi_l_view: transformed law has no exact parametric family");
    BivariateJumpLaw l = *this;
    l.tf_ = PairTransform::XiL;
    return l;
}

}  // namespace mapmom
