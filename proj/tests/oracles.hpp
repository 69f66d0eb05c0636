#pragma once

// Test-side reference computations. None of these call the solvers under test.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

using Radial = std::function<double(double)>;

// Numerov for u'' = (mu V(r) - E) u from u(0) = 0; returns u on the grid 0, h, ..., n h.
inline std::vector<double> numerov(const Radial& V, double mu, double E, double h, int n)
{
    std::vector<double> u(n + 1), k(n + 1);
    for (int i = 0; i <= n; ++i) k[i] = E - mu * V(i * h);
    u[0] = 0.0;
    u[1] = h;
    const double c = h * h / 12.0;
    for (int i = 1; i < n; ++i)
        u[i + 1] = (2.0 * u[i] * (1.0 - 5.0 * c * k[i]) - u[i - 1] * (1.0 + c * k[i - 1])) / (1.0 + c * k[i + 1]);
    return u;
}

// Zero-energy Sturm test: a bound state exists iff the zero-energy solution has
// a node inside [0, R] or is already turning down at R (outside the well
// u = r - a_s, so a large positive scattering length shows as u' < 0).
inline bool binds_at_zero(const Radial& V, double mu, double R, double h = 1e-3)
{
    const int n = static_cast<int>(R / h);
    auto u = numerov(V, mu, 0.0, h, n + 1);
    for (int i = 2; i <= n; ++i)
        if (u[i] * u[i - 1] < 0.0) return true;
    return (u[n + 1] - u[n - 1]) < 0.0;
}

// Ground-state energy by matching to exp(-kappa r) at R (outside the well):
// D(kappa) = u'(R) + kappa u(R) changes sign at the eigenvalue.
inline std::optional<double> ground_energy_shooting(const Radial& V, double mu, double R, double h = 5e-4)
{
    if (!binds_at_zero(V, mu, R, h)) return std::nullopt;
    const int n = static_cast<int>(R / h);
    auto D = [&](double kappa) {
        auto u = numerov(V, mu, -kappa * kappa, h, n + 1);
        const double up = (u[n + 1] - u[n - 1]) / (2.0 * h);
        return (up + kappa * u[n]) / std::abs(u[n] == 0.0 ? 1.0 : u[n]);
    };
    double lo = 1e-9, hi = 1.0;
    while (D(hi) < 0.0) hi *= 2.0;
    if (D(lo) > 0.0) return std::nullopt;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
        const double m = 0.5 * (lo + hi);
        (D(m) < 0.0 ? lo : hi) = m;
    }
    const double k = 0.5 * (lo + hi);
    return -k * k;
}

// Monte Carlo estimate of an integral over R^6 with a centred Gaussian proposal
// N(0, Sigma (x) I3) in the (x, y) Jacobi vectors.
struct MCResult {
    double mean = 0.0, sigma = 0.0;
};

inline MCResult mc_integral(const std::function<double(const Eigen::Matrix<double, 6, 1>&)>& f,
                            const Eigen::Matrix2d& Sigma, long n, unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N01(0.0, 1.0);
    Eigen::LLT<Eigen::Matrix2d> llt(Sigma);
    const Eigen::Matrix2d L = llt.matrixL();
    const double norm = std::pow(2.0 * M_PI, 3.0) * std::pow(Sigma.determinant(), 1.5);
    double s = 0.0, s2 = 0.0;
    Eigen::Matrix<double, 6, 1> X;
    for (long i = 0; i < n; ++i) {
        double q = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double z0 = N01(rng), z1 = N01(rng);
            X(d) = L(0, 0) * z0;
            X(3 + d) = L(1, 0) * z0 + L(1, 1) * z1;
            q += z0 * z0 + z1 * z1;
        }
        const double val = f(X) * norm * std::exp(0.5 * q);
        s += val;
        s2 += val * val;
    }
    MCResult r;
    r.mean = s / n;
    r.sigma = std::sqrt(std::max(0.0, s2 / n - r.mean * r.mean) / n);
    return r;
}

// L = 0 three-body ground state for equal unit masses, H = -Lap_x - Lap_y + V, on
// F = r1 r2 psi(r1, r2, u): sine DVR in r1 = |x| and r2 = |y| on (0, L), Legendre
// DVR in u = cos(x, y). Pair distances: r12 = r1, r13/r23^2 = r1^2/4 + 3 r2^2/4 +- (sqrt3/2) r1 r2 u.
struct DVR3 {
    int nr, nu;
    double L;
    MatrixXd T;      // -d^2/dr^2
    MatrixXd Lam;    // -d/du (1-u^2) d/du
    VectorXd r, u;
    VectorXd diag;   // potential + nothing else
    VectorXd cent;   // 1/r1^2 + 1/r2^2

    // index (i1, i2, a) -> (a * nr + i2) * nr + i1
    VectorXd apply(const VectorXd& v) const
    {
        VectorXd out = diag.cwiseProduct(v);
        const int n1 = nr, blk = nr * nr;
        for (int a = 0; a < nu; ++a) {
            Eigen::Map<const MatrixXd> V(v.data() + a * blk, n1, n1); // (i1, i2)
            Eigen::Map<MatrixXd> O(out.data() + a * blk, n1, n1);
            O.noalias() += T * V + V * T.transpose();
        }
        Eigen::Map<const MatrixXd> Vu(v.data(), blk, nu);
        MatrixXd ang = Vu * Lam.transpose();
        Eigen::Map<MatrixXd> Ou(out.data(), blk, nu);
        for (int a = 0; a < nu; ++a) Ou.col(a) += cent.cwiseProduct(ang.col(a));
        return out;
    }
};

inline DVR3 make_dvr3(int nr, int nu, double L, const std::function<double(double)>& v12,
                      const std::function<double(double)>& v13, const std::function<double(double)>& v23)
{
    DVR3 d{nr, nu, L};
    d.r.resize(nr);
    MatrixXd U(nr, nr);
    for (int i = 0; i < nr; ++i) {
        d.r(i) = (i + 1) * L / (nr + 1);
        for (int k = 0; k < nr; ++k) U(i, k) = std::sqrt(2.0 / (nr + 1)) * std::sin((i + 1) * (k + 1) * M_PI / (nr + 1));
    }
    VectorXd kk(nr);
    for (int k = 0; k < nr; ++k) kk(k) = std::pow((k + 1) * M_PI / L, 2);
    d.T = U * kk.asDiagonal() * U.transpose();

    // Gauss-Legendre nodes via Golub-Welsch
    MatrixXd J = MatrixXd::Zero(nu, nu);
    for (int k = 1; k < nu; ++k) J(k, k - 1) = J(k - 1, k) = k / std::sqrt(4.0 * k * k - 1.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
    d.u = es.eigenvalues();
    VectorXd w(nu);
    for (int a = 0; a < nu; ++a) w(a) = 2.0 * std::pow(es.eigenvectors()(0, a), 2);
    MatrixXd P(nu, nu); // sqrt(w_a) * normalized P_l(u_a)
    for (int a = 0; a < nu; ++a) {
        double p0 = 1.0, p1 = d.u(a);
        for (int l = 0; l < nu; ++l) {
            double pl;
            if (l == 0) pl = 1.0;
            else if (l == 1) pl = d.u(a);
            else {
                pl = ((2.0 * l - 1.0) * d.u(a) * p1 - (l - 1.0) * p0) / l;
                p0 = p1;
                p1 = pl;
            }
            P(a, l) = std::sqrt(w(a)) * std::sqrt((2.0 * l + 1.0) / 2.0) * pl;
        }
    }
    VectorXd ll(nu);
    for (int l = 0; l < nu; ++l) ll(l) = l * (l + 1.0);
    d.Lam = P * ll.asDiagonal() * P.transpose();

    const int n = nr * nr * nu;
    d.diag.resize(n);
    d.cent.resize(nr * nr);
    for (int a = 0; a < nu; ++a)
        for (int i2 = 0; i2 < nr; ++i2)
            for (int i1 = 0; i1 < nr; ++i1) {
                const double r1 = d.r(i1), r2 = d.r(i2), uu = d.u(a);
                const double base = 0.25 * r1 * r1 + 0.75 * r2 * r2, mix = std::sqrt(3.0) / 2.0 * r1 * r2 * uu;
                const double r13 = std::sqrt(std::max(0.0, base + mix)), r23 = std::sqrt(std::max(0.0, base - mix));
                d.diag((a * nr + i2) * nr + i1) = v12(r1) + v13(r13) + v23(r23);
                if (a == 0) d.cent(i2 * nr + i1) = 1.0 / (r1 * r1) + 1.0 / (r2 * r2);
            }
    return d;
}

// Lowest eigenvalue by Lanczos with full reorthogonalization.
template <class Op>
double lanczos_lowest(const Op& op, int n, int m, unsigned seed = 7)
{
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    MatrixXd Q(n, m + 1);
    VectorXd q(n);
    for (int i = 0; i < n; ++i) q(i) = U(rng);
    Q.col(0) = q / q.norm();
    std::vector<double> al, be;
    double prev = 0.0;
    for (int j = 0; j < m; ++j) {
        VectorXd w = op(Q.col(j));
        const double a = Q.col(j).dot(w);
        al.push_back(a);
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        w -= Q.leftCols(j + 1) * (Q.leftCols(j + 1).transpose() * w);
        const double b = w.norm();
        MatrixXd Tm = MatrixXd::Zero(j + 1, j + 1);
        for (int i = 0; i <= j; ++i) Tm(i, i) = al[i];
        for (int i = 0; i < j; ++i) Tm(i, i + 1) = Tm(i + 1, i) = be[i];
        const double lo = Eigen::SelfAdjointEigenSolver<MatrixXd>(Tm, Eigen::EigenvaluesOnly).eigenvalues()(0);
        if (j > 10 && std::abs(lo - prev) < 1e-10 * std::abs(lo)) return lo;
        prev = lo;
        if (b < 1e-14) return lo;
        be.push_back(b);
        Q.col(j + 1) = w / b;
    }
    return prev;
}

} // namespace oracle
