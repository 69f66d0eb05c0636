#pragma once

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "linalg.hpp"

namespace thr {

struct RadialGrid {
    std::vector<double> r, w;
    double R_max = 0.0;
    std::size_t size() const { return r.size(); }
};

inline RadialGrid make_radial_grid(int n, double R_max)
{
    if (n < 1 || !(R_max > 0.0)) throw ValidationError("RadialGrid: need n >= 1 and R_max > 0");
    Rule q = gauss_legendre(n, 0.0, R_max);
    return {q.x, q.w, R_max};
}

// default: 400 nodes on (0, 40 * range]
inline RadialGrid default_radial_grid(const PairPotential& p, int n = 400, double factor = 40.0)
{
    return make_radial_grid(n, factor * p.max_range());
}

// s-wave reduced Green's function of -d^2/dr^2 + kappa^2, Dirichlet at 0
inline double reduced_green(double r, double rp, double kappa)
{
    const double lo = std::min(r, rp), hi = std::max(r, rp);
    if (kappa == 0.0) return lo;
    return std::exp(-kappa * (hi - lo)) * (-std::expm1(-2.0 * kappa * lo)) / (2.0 * kappa);
}

// int_0^R g(r, r') dr'
inline double reduced_green_integral(double r, double R, double kappa)
{
    if (kappa == 0.0) return r * R - 0.5 * r * r;
    const double a = std::expm1(-kappa * r);
    return (a * a + std::expm1(-2.0 * kappa * r) * std::expm1(-kappa * (R - r))) / (2.0 * kappa * kappa);
}

struct BSKernel {
    MatrixXd K;
    double z = 0.0;
    RadialGrid grid;
    PairPotential pot;
    VectorXd vhalf; // |V|^{1/2} at the nodes
};

// Nystrom matrix of |V|^{1/2} (-D + z)^{-1} |V|^{1/2} in the s-wave, with the
// kink of g handled by subtracting the row integral of g on the diagonal.
inline MatrixXd weighted_green(const RadialGrid& g, double z)
{
    const int n = static_cast<int>(g.size());
    const double kappa = std::sqrt(z);
    MatrixXd G(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j <= i; ++j) {
            double v = std::sqrt(g.w[i] * g.w[j]) * reduced_green(g.r[i], g.r[j], kappa);
            G(i, j) = v;
            G(j, i) = v;
        }
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < n; ++k) s += g.w[k] * reduced_green(g.r[i], g.r[k], kappa);
        G(i, i) += reduced_green_integral(g.r[i], g.R_max, kappa) - s;
    }
    return G;
}

inline BSKernel bs_matrix(const PairPotential& pot, double z, const RadialGrid& grid)
{
    if (!(z >= 0.0)) throw ValidationError("bs_matrix: z must be >= 0");
    if (grid.size() == 0) throw ValidationError("bs_matrix: empty grid");
    BSKernel k;
    k.z = z;
    k.grid = grid;
    k.pot = pot;
    const int n = static_cast<int>(grid.size());
    k.vhalf.resize(n);
    for (int i = 0; i < n; ++i) k.vhalf(i) = pot.sqrt_abs(grid.r[i]);
    k.K = k.vhalf.asDiagonal() * weighted_green(grid, z) * k.vhalf.asDiagonal();
    return k;
}

struct TopEigen {
    double value = 0.0;
    VectorXd u;
};

inline TopEigen top_eigenpair(const BSKernel& k)
{
    if (k.K.norm() == 0.0) {
        VectorXd u = VectorXd::Zero(k.K.rows());
        if (u.size()) u(0) = 1.0;
        return {0.0, u};
    }
    auto [ev, u] = top_eigenpair_sym(k.K);
    if (u.sum() < 0.0) u = -u;
    u = u.cwiseMax(0.0);
    u.normalize();
    return {ev, u};
}

inline double top_eigenvalue(const BSKernel& k) { return top_eigenvalue_sym(k.K); }

struct ResonantPair {
    PairPotential potential; // mu* V
    double mu_star = 0.0;
    RadialGrid grid;
    std::vector<double> u0; // phi0(x) = u0(r) / (sqrt(4 pi) r), int u0^2 dr = 1
    double a = 0.0;
    double R0 = 0.0;

    // Nystrom continuation of u0 off the nodes
    double u0_at(double r) const
    {
        double s = 0.0;
        for (std::size_t j = 0; j < grid.size(); ++j)
            s += grid.w[j] * reduced_green(r, grid.r[j], 0.0) * potential.sqrt_abs(grid.r[j]) * u0[j];
        return potential.sqrt_abs(r) * s;
    }
    double phi0_at(double r) const { return u0_at(r) / (std::sqrt(4.0 * M_PI) * r); }
};

inline ResonantPair tune_resonance(const PairPotential& pot, const RadialGrid& grid)
{
    BSKernel k = bs_matrix(pot, 0.0, grid);
    TopEigen te = top_eigenpair(k);
    if (!(te.value > 0.0)) throw NumericalError("tune_resonance: zero potential, no resonance achievable");
    ResonantPair rp;
    rp.mu_star = 1.0 / te.value;
    rp.potential = pot.scaled(rp.mu_star);
    rp.grid = grid;
    const std::size_t n = grid.size();
    rp.u0.resize(n);
    double nrm = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        rp.u0[j] = te.u(j) / std::sqrt(grid.w[j]);
        nrm += grid.w[j] * rp.u0[j] * rp.u0[j];
    }
    nrm = std::sqrt(nrm);
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        rp.u0[j] /= nrm;
        const double vh = rp.potential.sqrt_abs(grid.r[j]);
        s1 += grid.w[j] * vh * rp.u0[j] * grid.r[j];
        s2 += grid.w[j] * vh * rp.u0[j];
    }
    rp.a = s1 * s1;
    rp.R0 = std::sqrt(4.0 * M_PI) * s2;
    return rp;
}

// e < 0 with top-eigenvalue(K(-e)) = 1/mu, or nullopt when no bound state
inline std::optional<double> bound_state_energy(const PairPotential& pot, double mu, const RadialGrid& grid)
{
    if (!(mu > 0.0)) throw ValidationError("bound_state_energy: mu must be > 0");
    auto f = [&](double kappa) { return mu * top_eigenvalue(bs_matrix(pot, kappa * kappa, grid)) - 1.0; };
    const double f0 = f(0.0);
    if (f0 <= 0.0) return std::nullopt;
    double hi = 1.0, fhi = f(hi);
    int guard = 0;
    while (fhi > 0.0) {
        hi *= 2.0;
        fhi = f(hi);
        if (++guard > 60) throw NumericalError("bound_state_energy: no upper kappa bracket (f=" + std::to_string(fhi) + ")");
    }
    double lo = hi / 2.0, flo = (hi == 1.0) ? f0 : f(lo);
    if (hi == 1.0) lo = 0.0;
    if (!(flo > 0.0 && fhi < 0.0))
        throw NumericalError("bound_state_energy: bracket failure, f(" + std::to_string(lo) + ")=" + std::to_string(flo) +
                             ", f(" + std::to_string(hi) + ")=" + std::to_string(fhi));
    boost::uintmax_t it = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) < 1e-10; };
    auto res = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, it);
    const double kappa = 0.5 * (res.first + res.second);
    return -kappa * kappa;
}

struct KlausSimonReport {
    double exponent = 0.0;
    double prefactor = 0.0; // |e| = prefactor (mu-1)^exponent
    std::vector<double> mu, e, residuals;
    double rms = 0.0;
};

inline KlausSimonReport klaus_simon_check(const ResonantPair& tuned, const std::vector<double>& mu_grid)
{
    if (mu_grid.size() < 6) throw ValidationError("klaus_simon_check: need at least 6 mu values");
    for (double m : mu_grid)
        if (!(m > 1.0 && m <= 1.05)) throw ValidationError("klaus_simon_check: mu must lie in (1, 1.05]");
    KlausSimonReport r;
    const int n = static_cast<int>(mu_grid.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        auto e = bound_state_energy(tuned.potential, mu_grid[i], tuned.grid);
        if (!e) throw NumericalError("klaus_simon_check: no bound state at mu=" + std::to_string(mu_grid[i]));
        r.mu.push_back(mu_grid[i]);
        r.e.push_back(*e);
        A(i, 0) = std::log(mu_grid[i] - 1.0);
        A(i, 1) = 1.0;
        b(i) = std::log(-*e);
    }
    Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
    r.exponent = c(0);
    r.prefactor = std::exp(c(1));
    Eigen::VectorXd res = A * c - b;
    r.residuals.assign(res.data(), res.data() + n);
    r.rms = std::sqrt(res.squaredNorm() / n);
    return r;
}

// |v|^{1/2} (-D + v + z)^{-1} |v|^{1/2} = K (1 - K)^{-1} for v <= 0
inline MatrixXd fiber_bs_resolvent(const ResonantPair& tuned, double z, const RadialGrid& grid)
{
    if (!(z > 0.0)) throw ValidationError("fiber_bs_resolvent: z must be > 0");
    BSKernel k = bs_matrix(tuned.potential, z, grid);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k.K);
    const VectorXd& ev = es.eigenvalues();
    const double smin = (1.0 - ev.array()).abs().minCoeff();
    if (smin < 1e-12) throw NumericalError("fiber_bs_resolvent: 1-K(z) singular, smallest singular value " + std::to_string(smin));
    VectorXd d = ev.array() / (1.0 - ev.array());
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

} // namespace thr
