#include "mapmom/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace mapmom {

namespace {

void require_square(const Matrix& a, const char* who) {
    if (!a.square()) throw NonSquareError(std::string(who) + ": matrix is not square");
}

void require_finite(const Matrix& a, const char* who) {
    if (!a.all_finite()) throw ValidationError(std::string(who) + ": non-finite matrix entry");
}

}  // namespace

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ ? static_cast<int>(rows.begin()->size()) : 0;
    a_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != cols_)
            throw DimensionError("Matrix: ragged initializer");
        a_.insert(a_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix& Matrix::operator+=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("Matrix::+=: shape mismatch");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& o) {
    if (rows_ != o.rows_ || cols_ != o.cols_) throw DimensionError("Matrix::-=: shape mismatch");
    for (size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
    return *this;
}

Matrix& Matrix::operator*=(double s) {
    for (double& x : a_) x *= s;
    return *this;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::norm1() const {
    double best = 0.0;
    for (int j = 0; j < cols_; ++j) {
        double s = 0.0;
        for (int i = 0; i < rows_; ++i) s += std::fabs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

double Matrix::norm_inf() const {
    double best = 0.0;
    for (int i = 0; i < rows_; ++i) {
        double s = 0.0;
        for (int j = 0; j < cols_; ++j) s += std::fabs((*this)(i, j));
        best = std::max(best, s);
    }
    return best;
}

double Matrix::max_abs() const {
    double best = 0.0;
    for (double x : a_) best = std::max(best, std::fabs(x));
    return best;
}

bool Matrix::all_finite() const {
    for (double x : a_)
        if (!std::isfinite(x)) return false;
    return true;
}

void Matrix::set_block(int i0, int j0, const Matrix& block) {
    if (i0 + block.rows_ > rows_ || j0 + block.cols_ > cols_)
        throw DimensionError("Matrix::set_block: block out of range");
    for (int i = 0; i < block.rows_; ++i)
        for (int j = 0; j < block.cols_; ++j) (*this)(i0 + i, j0 + j) = block(i, j);
}

Matrix Matrix::block(int i0, int j0, int rows, int cols) const {
    if (i0 + rows > rows_ || j0 + cols > cols_)
        throw DimensionError("Matrix::block: block out of range");
    Matrix b(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) b(i, j) = (*this)(i0 + i, j0 + j);
    return b;
}

Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
Matrix operator*(double s, Matrix a) { return a *= s; }

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("Matrix::*: shape mismatch");
    Matrix c(a.rows(), b.cols(), 0.0);
    for (int i = 0; i < a.rows(); ++i)
        for (int k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
        }
    return c;
}

std::vector<double> operator*(const Matrix& a, const std::vector<double>& v) {
    if (a.cols() != static_cast<int>(v.size())) throw DimensionError("Matrix*vector: shape mismatch");
    std::vector<double> w(static_cast<size_t>(a.rows()), 0.0);
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
        w[i] = s;
    }
    return w;
}

namespace {

// LU with partial pivoting, in place.  Returns the permutation sign, fills
// `piv`.  Throws on pivot collapse when `throw_on_singular`.
int lu_factor(Matrix& a, std::vector<int>& piv, bool throw_on_singular) {
    const int n = a.rows();
    const double scale = std::max(a.max_abs(), 1e-300);
    piv.resize(n);
    int sign = 1;
    for (int k = 0; k < n; ++k) {
        int p = k;
        for (int i = k + 1; i < n; ++i)
            if (std::fabs(a(i, k)) > std::fabs(a(p, k))) p = i;
        piv[k] = p;
        if (p != k) {
            for (int j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            sign = -sign;
        }
        if (std::fabs(a(k, k)) < 1e-13 * scale) {
            if (throw_on_singular)
                throw SingularMatrixError("solve: pivot " + std::to_string(k) +
                                          " below 1e-13 of matrix scale");
            return 0;
        }
        const double inv = 1.0 / a(k, k);
        for (int i = k + 1; i < n; ++i) {
            const double f = a(i, k) * inv;
            a(i, k) = f;
            if (f == 0.0) continue;
            for (int j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
        }
    }
    return sign;
}

}  // namespace

Matrix solve(const Matrix& a, const Matrix& b) {
    require_square(a, "solve");
    require_finite(a, "solve");
    require_finite(b, "solve");
    if (a.rows() != b.rows()) throw DimensionError("solve: rhs row count mismatch");
    Matrix lu = a;
    std::vector<int> piv;
    lu_factor(lu, piv, true);
    const int n = a.rows();
    Matrix x = b;
    // the factorization swaps full rows, so all interchanges apply to the
    // right-hand side before the triangular solves
    for (int k = 0; k < n; ++k)
        if (piv[k] != k)
            for (int j = 0; j < x.cols(); ++j) std::swap(x(k, j), x(piv[k], j));
    for (int k = 0; k < n; ++k) {
        for (int i = k + 1; i < n; ++i) {
            const double f = lu(i, k);
            if (f == 0.0) continue;
            for (int j = 0; j < x.cols(); ++j) x(i, j) -= f * x(k, j);
        }
    }
    for (int k = n - 1; k >= 0; --k) {
        const double inv = 1.0 / lu(k, k);
        for (int j = 0; j < x.cols(); ++j) {
            double s = x(k, j);
            for (int i = k + 1; i < n; ++i) s -= lu(k, i) * x(i, j);
            x(k, j) = s * inv;
        }
    }
    return x;
}

std::vector<double> solve(const Matrix& a, const std::vector<double>& b) {
    Matrix rhs(static_cast<int>(b.size()), 1);
    for (size_t i = 0; i < b.size(); ++i) rhs(static_cast<int>(i), 0) = b[i];
    Matrix x = solve(a, rhs);
    std::vector<double> out(b.size());
    for (size_t i = 0; i < b.size(); ++i) out[i] = x(static_cast<int>(i), 0);
    return out;
}

double determinant(const Matrix& a) {
    require_square(a, "determinant");
    require_finite(a, "determinant");
    Matrix lu = a;
    std::vector<int> piv;
    const int sign = lu_factor(lu, piv, false);
    if (sign == 0) return 0.0;
    double det = sign;
    for (int k = 0; k < lu.rows(); ++k) det *= lu(k, k);
    return det;
}

namespace {

// Degree-13 Pade coefficients (Higham 2005).
constexpr double kPade13[] = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0,
    129060195264000.0,   10559470521600.0,    670442572800.0,     33522128640.0,
    1323241920.0,        40840800.0,          960960.0,           16380.0,
    182.0,               1.0};
constexpr double kTheta13 = 5.371920351148152;

}  // namespace

Matrix expm(const Matrix& a) {
    require_square(a, "expm");
    require_finite(a, "expm");
    const int n = a.rows();
    if (n == 0) return a;

    const double eta = a.norm1();
    int s = 0;
    if (eta > kTheta13) s = static_cast<int>(std::ceil(std::log2(eta / kTheta13)));
    Matrix x = a;
    if (s > 0) x *= std::ldexp(1.0, -s);

    const Matrix i = Matrix::identity(n);
    const Matrix x2 = x * x;
    const Matrix x4 = x2 * x2;
    const Matrix x6 = x2 * x4;

    Matrix u = kPade13[13] * x6 + kPade13[11] * x4 + kPade13[9] * x2;
    u = x6 * u;
    u += kPade13[7] * x6 + kPade13[5] * x4 + kPade13[3] * x2 + kPade13[1] * i;
    u = x * u;

    Matrix v = kPade13[12] * x6 + kPade13[10] * x4 + kPade13[8] * x2;
    v = x6 * v;
    v += kPade13[6] * x6 + kPade13[4] * x4 + kPade13[2] * x2 + kPade13[0] * i;

    Matrix r = solve(v - u, v + u);
    for (int k = 0; k < s; ++k) r = r * r;
    return r;
}

Matrix expm(const Matrix& a, double t) {
    if (!std::isfinite(t)) throw ValidationError("expm: non-finite time");
    Matrix at = a;
    at *= t;
    return expm(at);
}

Matrix van_loan_single(const Matrix& a, const Matrix& b, const Matrix& c, double t) {
    const int n = a.rows();
    if (!a.square() || !c.square() || b.rows() != n || b.cols() != c.rows() || c.rows() != n)
        throw DimensionError("van_loan_single: blocks must be square and equally sized");
    Matrix m(2 * n, 2 * n, 0.0);
    m.set_block(0, 0, a);
    m.set_block(0, n, b);
    m.set_block(n, n, c);
    return expm(m, t).block(0, n, n, n);
}

Matrix van_loan_double(const Matrix& a, const Matrix& b, const Matrix& c,
                       const Matrix& d, const Matrix& e, double t) {
    const int n = a.rows();
    if (!a.square() || !c.square() || !e.square() || c.rows() != n || e.rows() != n ||
        b.rows() != n || b.cols() != n || d.rows() != n || d.cols() != n)
        throw DimensionError("van_loan_double: blocks must be square and equally sized");
    Matrix m(3 * n, 3 * n, 0.0);
    m.set_block(0, 0, a);
    m.set_block(0, n, b);
    m.set_block(n, n, c);
    m.set_block(n, 2 * n, d);
    m.set_block(2 * n, 2 * n, e);
    return expm(m, t).block(0, 2 * n, n, n);
}

Matrix van_loan_integral(const std::vector<VanLoanBlock>& blocks, double t) {
    if (blocks.size() == 2)
        return van_loan_single(blocks[0].diag, blocks[0].super, blocks[1].diag, t);
    if (blocks.size() == 3)
        return van_loan_double(blocks[0].diag, blocks[0].super, blocks[1].diag,
                               blocks[1].super, blocks[2].diag, t);
    throw DimensionError("van_loan_integral: need 2 or 3 blocks");
}

double leading_eigenvalue(const Matrix& a) {
    require_square(a, "leading_eigenvalue");
    require_finite(a, "leading_eigenvalue");
    const int n = a.rows();
    if (n == 0) throw DimensionError("leading_eigenvalue: empty matrix");
    if (n == 1) return a(0, 0);

    // e^{a/c} is entrywise nonnegative for an ML-matrix (positive when
    // irreducible); its Perron root is e^{lambda_max/c}.
    const double c = std::max(1.0, a.norm1() / 5.0);
    const Matrix p = expm(a, 1.0 / c);

    std::vector<double> v(static_cast<size_t>(n), 1.0 / n);
    double lam = 0.0, lam_prev = 0.0, lam_prev2 = 0.0;
    const int max_iter = 10000;
    for (int it = 0; it < max_iter; ++it) {
        std::vector<double> w = p * v;
        double s = 0.0;
        for (double x : w) s += x;
        if (!(s > 0.0) || !std::isfinite(s))
            throw ConvergenceError("leading_eigenvalue: power iteration left the positive cone");
        for (size_t k = 0; k < w.size(); ++k) v[k] = w[k] / s;
        lam_prev2 = lam_prev;
        lam_prev = lam;
        lam = c * std::log(s);
        if (it >= 2) {
            const double d1 = std::fabs(lam - lam_prev);
            const double d2 = std::fabs(lam_prev - lam_prev2);
            const double tol = 1e-12 * std::max(1.0, std::fabs(lam));
            if (d1 <= tol && d2 <= 4.0 * tol) return lam;
            // Aitken error estimate for slow geometric convergence
            if (d2 > 0.0 && d1 < d2) {
                const double r = d1 / d2;
                if (d1 * r / (1.0 - r) <= tol && d1 <= 16.0 * tol) return lam;
            }
        }
    }
    throw ConvergenceError("leading_eigenvalue: no convergence in 10000 iterations");
}

}  // namespace mapmom
