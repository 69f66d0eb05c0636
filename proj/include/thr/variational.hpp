#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "linalg.hpp"

namespace thr {

// exp(-1/2 (A11 |x|^2 + 2 A12 x.y + A22 |y|^2))
struct GaussianBasisElement {
    Matrix2d A;
};

struct BasisDescriptor {
    int n_scales = 16;
    int n_pair12 = 32;
    double r_min = 0.1, r_max = 2000.0;
};

struct GaussianBasis {
    std::vector<GaussianBasisElement> elements;
    BasisDescriptor desc;
    std::size_t size() const { return elements.size(); }
};

inline std::vector<double> geometric_ladder(int n, double lo, double hi)
{
    if (n == 1) return {std::sqrt(lo * hi)};
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return v;
}

inline double gaussian_overlap(const Matrix2d& A, const Matrix2d& B)
{
    const double det = (A + B).determinant();
    return std::pow(4.0 * M_PI * M_PI / det, 1.5);
}

inline double normalized_overlap(const Matrix2d& A, const Matrix2d& B)
{
    const double da = (2.0 * A).determinant(), db = (2.0 * B).determinant();
    return std::pow(std::sqrt(da * db) / (A + B).determinant(), 1.5);
}

// Widths in each arrangement's (pair, spectator) coordinates; the {1,2}
// arrangement gets its own (denser) ladder along x.
inline GaussianBasis generate_basis(const JacobiFrame& f, int n_scales, double r_min, double r_max, int n_pair12 = 0)
{
    if (n_scales < 1) throw ValidationError("generate_basis: n_scales must be >= 1");
    if (!(r_min > 0.0 && r_max > r_min) && !(n_scales == 1 && r_min > 0.0 && r_max >= r_min))
        throw ValidationError("generate_basis: need 0 < r_min < r_max");
    if (n_pair12 <= 0) n_pair12 = n_scales;
    GaussianBasis b;
    b.desc = {n_scales, n_pair12, r_min, r_max};
    const auto rho = geometric_ladder(n_scales, r_min, r_max);
    const auto rho12 = geometric_ladder(n_pair12, r_min, r_max);

    std::vector<Matrix2d> cand;
    for (double a : rho12)
        for (double c : rho) cand.push_back(Eigen::Vector2d(1.0 / (a * a), 1.0 / (c * c)).asDiagonal());
    for (int k = 1; k <= 2; ++k) {
        const Matrix2d& O = f.arr[k].from_xy;
        for (double a : rho)
            for (double c : rho) {
                Matrix2d D = Eigen::Vector2d(1.0 / (a * a), 1.0 / (c * c)).asDiagonal();
                Matrix2d A = O.transpose() * D * O;
                A = (0.5 * (A + A.transpose())).eval();
                cand.push_back(A);
            }
    }
    for (const auto& A : cand) {
        bool dup = false;
        for (const auto& e : b.elements)
            if (normalized_overlap(A, e.A) >= 1.0 - 1e-10) {
                dup = true;
                break;
            }
        if (!dup) b.elements.push_back({A});
    }
    return b;
}

struct HamiltonianMatrices {
    MatrixXd S, T;
    MatrixXd V[3];    // v12, v13, v23
    MatrixXd absV[3]; // |v12|, |v13|, |v23|
};

// S = ((2pi)^2/det D)^{3/2}, T = 3 tr(A D^-1 B) S, and each Gaussian
// term exp(-r^2/s^2) on r = c.(x,y) gives S (1 + 2 c^T D^-1 c / s^2)^{-3/2}.
inline HamiltonianMatrices hamiltonian_matrices(const GaussianBasis& basis, const ThreeBodySystem& sys)
{
    const int n = static_cast<int>(basis.size());
    HamiltonianMatrices m;
    m.S.resize(n, n);
    m.T.resize(n, n);
    for (auto& v : m.V) v.resize(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b) {
            const Matrix2d& A = basis.elements[a].A;
            const Matrix2d& B = basis.elements[b].A;
            const Matrix2d D = A + B;
            const double det = D.determinant();
            if (!(det > 0.0) || !(D.trace() > 0.0))
                throw NumericalError("hamiltonian_matrices: combined exponent not SPD for elements " + std::to_string(a) +
                                     "," + std::to_string(b));
            const Matrix2d C = D.inverse();
            const double s = std::pow(4.0 * M_PI * M_PI / det, 1.5);
            const double t = 3.0 * (A * C * B).trace() * s;
            m.S(a, b) = m.S(b, a) = s;
            m.T(a, b) = m.T(b, a) = t;
            for (int k = 0; k < 3; ++k) {
                const Vector2d& c = sys.sep(k);
                const double q = c.dot(C * c);
                double v = 0.0;
                for (const auto& term : sys.v[k].terms)
                    v -= term.depth * std::pow(1.0 + 2.0 * q / (term.range * term.range), -1.5);
                m.V[k](a, b) = m.V[k](b, a) = v * s;
            }
        }
    for (int k = 0; k < 3; ++k) m.absV[k] = -m.V[k];
    return m;
}

struct SpectralResult {
    double lambda = 0.0;
    double E = 0.0;
    VectorXd c; // coefficients on the unit-normalized basis functions, c^T S c = 1
    double residual = 0.0;
    BasisDescriptor basis;
    int basis_size = 0, kept = 0;
};

// Overlap-normalized matrices with the filtered orthonormalizing transform X.
struct SolverContext {
    ThreeBodySystem sys;
    GaussianBasis basis;
    VectorXd nrm;
    MatrixXd S, T, V[3];
    MatrixXd X, h, w; // h = X^T (T + V12) X, w = X^T (V13 + V23) X
    double filter = 1e-10;
    mutable std::map<double, MatrixXd> spread_cache;
};

inline SolverContext make_solver_context(const ThreeBodySystem& sys, const GaussianBasis& basis, double filter = 1e-10)
{
    SolverContext ctx;
    ctx.sys = sys;
    ctx.basis = basis;
    ctx.filter = filter;
    HamiltonianMatrices m = hamiltonian_matrices(basis, sys);
    const int n = static_cast<int>(basis.size());
    ctx.nrm = m.S.diagonal().cwiseSqrt().cwiseInverse();
    auto N = ctx.nrm.asDiagonal();
    ctx.S = N * m.S * N;
    ctx.T = N * m.T * N;
    for (int k = 0; k < 3; ++k) ctx.V[k] = N * m.V[k] * N;

    auto [e, U] = sym_eig(ctx.S);
    const double cut = filter * e.maxCoeff();
    std::vector<int> keep;
    for (int i = 0; i < n; ++i)
        if (e(i) > cut) keep.push_back(i);
    if (keep.empty()) throw NumericalError("make_solver_context: basis fully degenerate after filtering");
    ctx.X.resize(n, keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) ctx.X.col(j) = U.col(keep[j]) / std::sqrt(e(keep[j]));
    MatrixXd H0 = ctx.T + ctx.V[0];
    MatrixXd W = ctx.V[1] + ctx.V[2];
    ctx.h = ctx.X.transpose() * H0 * ctx.X;
    ctx.w = ctx.X.transpose() * W * ctx.X;
    ctx.h = 0.5 * (ctx.h + ctx.h.transpose()).eval();
    ctx.w = 0.5 * (ctx.w + ctx.w.transpose()).eval();
    return ctx;
}

inline SpectralResult ground_state(const SolverContext& ctx, double lambda)
{
    auto [E, v] = lowest_eigenpair(ctx.h + lambda * ctx.w);
    SpectralResult r;
    r.lambda = lambda;
    r.E = E;
    r.c = ctx.X * v;
    const double nn = r.c.dot(ctx.S * r.c);
    r.c /= std::sqrt(nn);
    if ((ctx.S * r.c).sum() < 0.0) r.c = -r.c;
    MatrixXd H = ctx.T + ctx.V[0] + lambda * (ctx.V[1] + ctx.V[2]);
    r.residual = (H * r.c - E * (ctx.S * r.c)).norm() / r.c.norm();
    r.basis = ctx.basis.desc;
    r.basis_size = static_cast<int>(ctx.basis.size());
    r.kept = static_cast<int>(ctx.X.cols());
    return r;
}

// Lowest eigenvalue only (bisection and scans).
inline double ground_energy(const SolverContext& ctx, double lambda)
{
    return lowest_eigenvalue(ctx.h + lambda * ctx.w);
}

struct HalfNorms {
    double h13 = 0.0, h23 = 0.0, h12 = 0.0;
};

inline HalfNorms potential_half_norms(const SpectralResult& r, const SolverContext& ctx)
{
    return {-r.c.dot(ctx.V[1] * r.c), -r.c.dot(ctx.V[2] * r.c), -r.c.dot(ctx.V[0] * r.c)};
}

namespace detail {

inline double chi2_3_pdf(double t)
{
    return t <= 0.0 ? 0.0 : std::sqrt(t) * std::exp(-0.5 * t) / std::sqrt(2.0 * M_PI);
}

inline double chi2_3_cdf(double t)
{
    if (t <= 0.0) return 0.0;
    return std::erf(std::sqrt(0.5 * t)) - std::sqrt(2.0 * t / M_PI) * std::exp(-0.5 * t);
}

// Pr(Y1/e1 + Y2/e2 < R^2), Y ~ chi^2_3
inline double gaussian_ball_mass(double e1, double e2, double R, const Rule& unit)
{
    const double umax = std::min(std::sqrt(e1) * R, 13.0);
    double s = 0.0;
    for (std::size_t i = 0; i < unit.size(); ++i) {
        const double u = umax * unit.x[i];
        const double t = u * u;
        s += umax * unit.w[i] * 2.0 * u * chi2_3_pdf(t) * chi2_3_cdf(e2 * (R * R - t / e1));
    }
    return s;
}

} // namespace detail

// Probability inside |x|^2 + |y|^2 < R^2.
inline double spread_probability(const SpectralResult& r, const SolverContext& ctx, double R)
{
    if (!(R > 0.0)) {
        if (R == 0.0) return 0.0;
        throw ValidationError("spread_probability: R must be >= 0");
    }
    auto it = ctx.spread_cache.find(R);
    if (it == ctx.spread_cache.end()) {
        const int n = static_cast<int>(ctx.basis.size());
        const Rule unit = gauss_legendre(64, 0.0, 1.0);
        MatrixXd F(n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b <= a; ++b) {
                Eigen::SelfAdjointEigenSolver<Matrix2d> es(ctx.basis.elements[a].A + ctx.basis.elements[b].A,
                                                           Eigen::EigenvaluesOnly);
                const double e1 = es.eigenvalues()(1), e2 = es.eigenvalues()(0);
                F(a, b) = F(b, a) = ctx.S(a, b) * detail::gaussian_ball_mass(e1, e2, R, unit);
            }
        it = ctx.spread_cache.emplace(R, std::move(F)).first;
    }
    const double p = r.c.dot(it->second * r.c);
    return std::clamp(p, 0.0, 1.0);
}

// |<psi, Phi>| / ||Phi|| for the universal near-threshold profile
// Phi = (|x| sin(k|y|) + |y| cos(k|y|)) e^{-k|x|} / (1 + |x|^3|y| + |y|^3|x|), k = |E|^{1/2}.
inline double universal_overlap(const SpectralResult& r, const SolverContext& ctx, double E, int n_rad = 160)
{
    if (!(E < 0.0)) throw ValidationError("universal_overlap: E must be < 0");
    const double k = std::sqrt(-E);
    auto phi = [k](double r1, double r2) {
        return (r1 * std::sin(k * r2) + r2 * std::cos(k * r2)) * std::exp(-k * r1) /
               (1.0 + r1 * r1 * r1 * r2 + r2 * r2 * r2 * r1);
    };
    const double rmax = std::max(ctx.basis.desc.r_max, 50.0 / k);
    const Rule g = gauss_legendre_log(n_rad, 1e-3, rmax);
    const int n = static_cast<int>(ctx.basis.size());
    double norm2 = 0.0, ov = 0.0;
    std::vector<double> wa(n);
    for (int a = 0; a < n; ++a) wa[a] = r.c(a) * ctx.nrm(a);
    for (std::size_t i = 0; i < g.size(); ++i)
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double r1 = g.x[i], r2 = g.x[j];
            const double meas = g.w[i] * g.w[j] * r1 * r1 * r2 * r2;
            const double f = phi(r1, r2);
            norm2 += 16.0 * M_PI * M_PI * meas * f * f;
            double psi = 0.0;
            for (int a = 0; a < n; ++a) {
                const Matrix2d& A = ctx.basis.elements[a].A;
                const double t = std::abs(A(0, 1)) * r1 * r2;
                const double ex = -0.5 * (A(0, 0) * r1 * r1 + A(1, 1) * r2 * r2) + t;
                if (ex < -700.0) continue;
                const double ang = t > 1e-12 ? -std::expm1(-2.0 * t) / t : 2.0 - 2.0 * t;
                psi += wa[a] * 8.0 * M_PI * M_PI * std::exp(ex) * ang;
            }
            ov += meas * f * psi;
        }
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) throw NumericalError("universal_overlap: profile norm not finite");
    return std::min(1.0, std::abs(ov) / std::sqrt(norm2));
}

} // namespace thr
