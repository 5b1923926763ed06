#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mapmom/errors.hpp"
#include "mapmom/rng.hpp"

namespace mapmom {

// Divergent moments are reported as the single sentinel value +infinity;
// NaN never escapes an operation.
inline constexpr double kDivergent = std::numeric_limits<double>::infinity();
inline bool divergent(double x) { return std::isinf(x); }

enum class Component { Xi, Eta };

enum class LawFamily { Constant, Normal, Exponential, Discrete, Pareto };

// Univariate jump-size distribution with exact moment functionals.
class JumpLaw {
  public:
    static JumpLaw constant(double value);
    static JumpLaw normal(double mean, double var);
    static JumpLaw exponential(double rate, int sign);
    static JumpLaw discrete(std::vector<std::pair<double, double>> atoms);  // (value, prob)
    static JumpLaw pareto(double alpha, double xmin, int sign);

    LawFamily family() const { return family_; }

    double mean() const { return moment(1); }
    double moment(int p) const;                 // E[Z^p]; +inf when E|Z|^p diverges
    bool abs_moment_finite(double p) const;     // E[|Z|^p] < inf
    double expmoment(double theta) const;       // E[e^{theta Z}]; +inf when divergent
    double exp_weighted_moment(double theta, int p) const;  // E[Z^p e^{theta Z}]
    bool is_zero() const;                       // point mass at 0
    double sample(RngStream& rng) const;
    JumpLaw negated() const;

    // parameter access (value/mean/rate/alpha in a_, var/xmin in b_)
    double param1() const { return a_; }
    double param2() const { return b_; }
    int sign() const { return sign_; }
    const std::vector<std::pair<double, double>>& atoms() const { return atoms_; }

  private:
    JumpLaw() = default;
    LawFamily family_ = LawFamily::Constant;
    double a_ = 0.0, b_ = 0.0;  // constant: a=value; normal: a=mean,b=var;
                                // exponential: a=rate; pareto: a=alpha,b=xmin
    int sign_ = 1;
    std::vector<std::pair<double, double>> atoms_;
};

// Pathwise transform applied on top of a concrete base pair law.
// UL:  (z,x) -> (e^{-z}-1, e^{-z}x)     [the (U,L) jump map]
// XiL: (z,x) -> (z, e^{-z}x)           [keeps xi, maps eta to L]
enum class PairTransform { None, UL, XiL };

// Bivariate jump law: independent marginals or a joint discrete atom set,
// optionally viewed through a pathwise transform plus per-component sign
// flips.  Transformed views answer moment queries by evaluating the
// transformed integrand against the base law; they are reified to an exact
// joint-discrete law whenever the base is finitely supported.
class BivariateJumpLaw {
  public:
    static BivariateJumpLaw independent(JumpLaw xi, JumpLaw eta);
    static BivariateJumpLaw joint_discrete(std::vector<std::array<double, 3>> atoms);  // (x,y,p)
    static BivariateJumpLaw point_mass(double x, double y);
    static const BivariateJumpLaw& zero();

    bool is_zero() const;  // point mass at (0,0)
    PairTransform transform() const { return tf_; }

    // E[zeta^a e^{theta zeta} chi^b]; +inf when divergent.
    double exp_weighted_cross(int a, double theta, int b) const;
    double mixed_exp(double theta, int m) const { return exp_weighted_cross(0, theta, m); }
    double cross_moment(int a, int b) const { return exp_weighted_cross(a, 0.0, b); }

    double comp_moment(Component c, int p) const;
    double comp_expmoment(Component c, double theta) const;  // UnsupportedLawError on
                                                             // non-polynomial views
    bool comp_abs_moment_finite(Component c, double p) const;

    std::pair<double, double> sample(RngStream& rng) const;

    BivariateJumpLaw negated(bool neg_xi, bool neg_eta) const;
    // Views; throw UnsupportedLawError when already transformed, or (for
    // require_explicit) when the base cannot be reified exactly.
    BivariateJumpLaw ul_view(bool require_explicit = false) const;
    BivariateJumpLaw xi_l_view(bool require_explicit = false) const;
    std::optional<BivariateJumpLaw> try_reify() const;

  private:
    BivariateJumpLaw() : xi_(JumpLaw::constant(0.0)), eta_(JumpLaw::constant(0.0)) {}

    double base_cross(int a, double theta, int b) const;  // on untransformed pair
    bool base_xi_is_zero() const;
    bool base_eta_is_zero() const;

    bool joint_ = false;
    JumpLaw xi_, eta_;                          // independent case
    std::vector<std::array<double, 3>> atoms_;  // joint discrete case
    PairTransform tf_ = PairTransform::None;
    double sx_ = 1.0, sy_ = 1.0;                // post-transform component signs
};

namespace detail {
// Upper incomplete gamma for x > 0 and any real s (used for the Pareto
// Laplace transform); recursion in s plus series/continued fraction.
double upper_incomplete_gamma(double s, double x);
double ipow(double base, int n);
double binom(int n, int k);
}  // namespace detail

}  // namespace mapmom
