#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "mapmom/errors.hpp"

namespace mapmom {

// Dense real matrix, row-major. Small sizes only (state-space dimension and
// block compositions thereof); no attempt at cache blocking or SIMD.
class Matrix {
  public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<size_t>(rows) * cols, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0 || cols_ == 0; }
    bool square() const { return rows_ == cols_; }

    double& operator()(int i, int j) { return a_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<size_t>(i) * cols_ + j]; }

    Matrix& operator+=(const Matrix& o);
    Matrix& operator-=(const Matrix& o);
    Matrix& operator*=(double s);

    Matrix transpose() const;
    double norm1() const;     // max column abs sum
    double norm_inf() const;  // max row abs sum
    double max_abs() const;
    bool all_finite() const;

    // Writes `block` with its (0,0) at (i0,j0).
    void set_block(int i0, int j0, const Matrix& block);
    Matrix block(int i0, int j0, int rows, int cols) const;

  private:
    int rows_, cols_;
    std::vector<double> a_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);
std::vector<double> operator*(const Matrix& a, const std::vector<double>& v);

// x with a*x = b by partial-pivot Gaussian elimination.
// Throws SingularMatrixError when a pivot magnitude drops below 1e-13 * max|a|.
Matrix solve(const Matrix& a, const Matrix& b);
std::vector<double> solve(const Matrix& a, const std::vector<double>& b);

// det(a) via the LU factorization of solve().  Returns 0.0 for numerically
// singular input rather than throwing.
double determinant(const Matrix& a);

// e^{a}: scaling and squaring with the degree-13 Pade approximant,
// squaring count from the 1-norm.
Matrix expm(const Matrix& a);
// e^{a*t}
Matrix expm(const Matrix& a, double t);

// Iterated matrix-exponential sandwich integrals evaluated as one block
// exponential (Van Loan):
//   single: int_0^t e^{A(t-s)} B e^{Cs} ds
//   double: int_0^t e^{A(t-s)} B int_0^s e^{C(s-u)} D e^{Eu} du ds
Matrix van_loan_single(const Matrix& a, const Matrix& b, const Matrix& c, double t);
Matrix van_loan_double(const Matrix& a, const Matrix& b, const Matrix& c,
                       const Matrix& d, const Matrix& e, double t);

// List form: 2 blocks -> single integral, 3 blocks -> double integral.
// The super matrix of the last block is ignored (may be empty).
struct VanLoanBlock {
    Matrix diag;
    Matrix super;
};
Matrix van_loan_integral(const std::vector<VanLoanBlock>& blocks, double t);

// Perron root of an ML-matrix (nonnegative off-diagonal entries): the real,
// simple eigenvalue of maximal real part.  Computed as c*log(spectral radius
// of e^{a/c}) by power iteration; ConvergenceError after 10000 iterations.
double leading_eigenvalue(const Matrix& a);

}  // namespace mapmom
