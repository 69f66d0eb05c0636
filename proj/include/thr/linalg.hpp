#pragma once

#include <Eigen/Dense>
#include <lapacke.h>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace thr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Rule {
    std::vector<double> x, w;
    std::size_t size() const { return x.size(); }
};

// Gauss-Legendre on [a,b], Golub-Welsch.
inline Rule gauss_legendre(int n, double a, double b)
{
    if (n < 1) throw std::invalid_argument("gauss_legendre: n < 1");
    Rule r;
    if (n == 1) {
        r.x = {0.5 * (a + b)};
        r.w = {b - a};
        return r;
    }
    VectorXd diag = VectorXd::Zero(n), sub(n - 1);
    for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        double t = es.eigenvalues()(i);
        double v = es.eigenvectors()(0, i);
        r.x[i] = 0.5 * (b - a) * (t + 1.0) + a;
        r.w[i] = (b - a) * v * v;
    }
    return r;
}

// Gauss-Legendre in ln(t) on [a,b], a > 0; weights include the Jacobian t.
inline Rule gauss_legendre_log(int n, double a, double b)
{
    Rule u = gauss_legendre(n, std::log(a), std::log(b));
    for (std::size_t i = 0; i < u.size(); ++i) {
        u.x[i] = std::exp(u.x[i]);
        u.w[i] *= u.x[i];
    }
    return u;
}

// Lowest eigenpair of a symmetric matrix (upper triangle referenced).
inline std::pair<double, VectorXd> lowest_eigenpair(const MatrixXd& h)
{
    const lapack_int n = static_cast<lapack_int>(h.rows());
    if (n == 0) throw std::invalid_argument("lowest_eigenpair: empty matrix");
    MatrixXd a = h;
    lapack_int m = 0;
    double w[1];
    VectorXd z(n);
    std::vector<lapack_int> isuppz(2);
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, 1,
                                     0.0, &m, w, z.data(), n, isuppz.data());
    if (info != 0 || m != 1) throw std::runtime_error("dsyevr failed, info=" + std::to_string(info));
    return {w[0], z};
}

inline double lowest_eigenvalue(const MatrixXd& h)
{
    const lapack_int n = static_cast<lapack_int>(h.rows());
    if (n == 0) throw std::invalid_argument("lowest_eigenvalue: empty matrix");
    MatrixXd a = h;
    lapack_int m = 0;
    double w[1];
    double dummy[1];
    std::vector<lapack_int> isuppz(2);
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, a.data(), n, 0.0, 0.0, 1, 1,
                                     0.0, &m, w, dummy, 1, isuppz.data());
    if (info != 0 || m != 1) throw std::runtime_error("dsyevr failed, info=" + std::to_string(info));
    return w[0];
}

// Largest eigenpair of a symmetric matrix.
inline std::pair<double, VectorXd> top_eigenpair_sym(const MatrixXd& k)
{
    const lapack_int n = static_cast<lapack_int>(k.rows());
    if (n == 0) throw std::invalid_argument("top_eigenpair_sym: empty matrix");
    MatrixXd a = k;
    lapack_int m = 0;
    double w[1];
    VectorXd z(n);
    std::vector<lapack_int> isuppz(2);
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'V', 'I', 'U', n, a.data(), n, 0.0, 0.0, n, n,
                                     0.0, &m, w, z.data(), n, isuppz.data());
    if (info != 0 || m != 1) throw std::runtime_error("dsyevr failed, info=" + std::to_string(info));
    return {w[0], z};
}

// All eigenpairs, ascending (divide and conquer).
inline std::pair<VectorXd, MatrixXd> sym_eig(const MatrixXd& s)
{
    const lapack_int n = static_cast<lapack_int>(s.rows());
    MatrixXd a = s;
    VectorXd w(n);
    lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'U', n, a.data(), n, w.data());
    if (info != 0) throw std::runtime_error("dsyevd failed, info=" + std::to_string(info));
    return {w, a};
}

inline double top_eigenvalue_sym(const MatrixXd& k)
{
    const lapack_int n = static_cast<lapack_int>(k.rows());
    MatrixXd a = k;
    lapack_int m = 0;
    double w[1];
    double dummy[1];
    std::vector<lapack_int> isuppz(2);
    lapack_int info = LAPACKE_dsyevr(LAPACK_COL_MAJOR, 'N', 'I', 'U', n, a.data(), n, 0.0, 0.0, n, n,
                                     0.0, &m, w, dummy, 1, isuppz.data());
    if (info != 0 || m != 1) throw std::runtime_error("dsyevr failed, info=" + std::to_string(info));
    return w[0];
}

} // namespace thr
