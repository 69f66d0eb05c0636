#include <gtest/gtest.h>

#include <Eigen/Sparse>

#include "oracles.hpp"
#include "thr/twobody.hpp"

using namespace thr;

namespace {

PairPotential gauss(double d, double s) { return {{{d, s}}, Pair::p12}; }

oracle::Radial radial(const PairPotential& p)
{
    return [p](double r) { return p(r); };
}

// critical coupling from the zero-energy node test
double shooting_critical_coupling(const PairPotential& p, double R)
{
    double lo = 0.5, hi = 10.0;
    for (int i = 0; i < 60; ++i) {
        const double m = 0.5 * (lo + hi);
        (oracle::binds_at_zero(radial(p), m, R) ? hi : lo) = m;
    }
    return 0.5 * (lo + hi);
}

const ResonantPair& tuned_unit()
{
    static const ResonantPair rp = [] {
        PairPotential p = gauss(1.0, 1.0);
        return tune_resonance(p, default_radial_grid(p));
    }();
    return rp;
}

} // namespace

TEST(RadialGrid, Invariants)
{
    RadialGrid g = make_radial_grid(50, 7.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        EXPECT_GT(g.r[i], 0.0);
        EXPECT_LE(g.r[i], 7.0);
        EXPECT_GT(g.w[i], 0.0);
        if (i) EXPECT_GT(g.r[i], g.r[i - 1]);
    }
    for (int k = 0; k <= 99; k += 11) {
        double s = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) s += g.w[i] * std::pow(g.r[i] / 7.0, k);
        EXPECT_NEAR(s, 7.0 / (k + 1), 1e-10 * 7.0);
    }
    EXPECT_THROW(make_radial_grid(0, 1.0), ValidationError);
}

TEST(BSKernel, BasicInvariants)
{
    PairPotential p = gauss(1.3, 0.8);
    RadialGrid g = default_radial_grid(p, 200);
    BSKernel k = bs_matrix(p, 0.3, g);
    EXPECT_LT((k.K - k.K.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_GE(k.K.minCoeff(), 0.0);
    BSKernel k3 = bs_matrix(p.scaled(3.0), 0.3, g);
    EXPECT_LT((k3.K - 3.0 * k.K).cwiseAbs().maxCoeff(), 1e-12 * k3.K.cwiseAbs().maxCoeff());
    EXPECT_THROW(bs_matrix(p, -1e-3, g), ValidationError);
    EXPECT_THROW(bs_matrix(p, 0.0, RadialGrid{}), ValidationError);
    BSKernel k0 = bs_matrix(gauss(0.0, 1.0), 0.0, g);
    EXPECT_EQ(k0.K.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(top_eigenpair(k0).value, 0.0);
}

TEST(BSKernel, TopEigenvalueDecreasesInZ)
{
    PairPotential p = gauss(1.0, 1.0);
    RadialGrid g = default_radial_grid(p, 200);
    double prev = top_eigenvalue(bs_matrix(p, 0.0, g));
    for (double z : {1e-6, 1e-4, 1e-2, 1e-1, 1.0, 10.0}) {
        const double t = top_eigenvalue(bs_matrix(p, z, g));
        EXPECT_LT(t, prev) << "z=" << z;
        prev = t;
    }
}

TEST(BSKernel, ScalingCovariance)
{
    // V_s(r) = s^2 V(s r) has the same zero-energy spectrum
    const double s = 2.0;
    PairPotential p = gauss(1.0, 1.0), ps = gauss(s * s, 1.0 / s);
    const double t1 = top_eigenvalue(bs_matrix(p, 0.0, make_radial_grid(800, 40.0)));
    const double t2 = top_eigenvalue(bs_matrix(ps, 0.0, make_radial_grid(800, 40.0 / s)));
    EXPECT_NEAR(t1, t2, 1e-6 * t1);
}

TEST(TopEigenpair, ResidualAndPositivity)
{
    PairPotential p = gauss(1.0, 1.0);
    BSKernel k = bs_matrix(p, 0.0, default_radial_grid(p));
    TopEigen te = top_eigenpair(k);
    EXPECT_LE((k.K * te.u - te.value * te.u).norm(), 1e-10 * te.u.norm());
    EXPECT_GE(te.u.minCoeff(), 0.0);
    BSKernel k2 = bs_matrix(p.scaled(2.0), 0.0, default_radial_grid(p));
    EXPECT_NEAR(top_eigenpair(k2).value, 2.0 * te.value, 1e-13 * te.value);
}

TEST(TopEigenpair, MatchesShootingCriticalDepth)
{
    PairPotential p = gauss(1.0, 1.0);
    const double ev = top_eigenpair(bs_matrix(p, 0.0, default_radial_grid(p))).value;
    const double mu_c = shooting_critical_coupling(p, 12.0);
    EXPECT_NEAR(ev * mu_c, 1.0, 1e-3);
}

TEST(TuneResonance, ShootingBracketsTheResonance)
{
    const ResonantPair& rp = tuned_unit();
    PairPotential base = gauss(1.0, 1.0);
    EXPECT_TRUE(oracle::binds_at_zero(radial(base), rp.mu_star * (1.0 + 1e-3), 12.0));
    EXPECT_FALSE(oracle::binds_at_zero(radial(base), rp.mu_star * (1.0 - 1e-3), 12.0));
}

TEST(TuneResonance, Invariants)
{
    const ResonantPair& rp = tuned_unit();
    double n2 = 0.0;
    for (std::size_t j = 0; j < rp.grid.size(); ++j) {
        n2 += rp.grid.w[j] * rp.u0[j] * rp.u0[j];
        EXPECT_GE(rp.u0[j], 0.0);
    }
    EXPECT_NEAR(n2, 1.0, 1e-10);
    EXPECT_GT(rp.a, 0.0);
    EXPECT_GT(rp.R0, 0.0);
    EXPECT_TRUE(std::isfinite(rp.a) && std::isfinite(rp.R0));
    EXPECT_NEAR(top_eigenvalue(bs_matrix(rp.potential, 0.0, rp.grid)), 1.0, 1e-10);
    // idempotence
    EXPECT_NEAR(tune_resonance(rp.potential, rp.grid).mu_star, 1.0, 1e-8);
    // grid refinement
    PairPotential p = gauss(1.0, 1.0);
    const double mu2 = tune_resonance(p, default_radial_grid(p, 800)).mu_star;
    EXPECT_LT(std::abs(mu2 / rp.mu_star - 1.0), 1e-6);
    EXPECT_THROW(tune_resonance(gauss(0.0, 1.0), rp.grid), NumericalError);
}

TEST(TuneResonance, PositiveConstantsForOtherWells)
{
    for (auto p : {gauss(3.0, 0.5), PairPotential{{{1.0, 1.0}, {0.4, 2.5}}, Pair::p12}}) {
        ResonantPair rp = tune_resonance(p, default_radial_grid(p));
        EXPECT_GT(rp.a, 0.0);
        EXPECT_GT(rp.R0, 0.0);
    }
}

TEST(TuneResonance, ConstantsMatchCartesianQuadrature)
{
    // a = (int phi0 |V|^1/2 d^3x)^2 / (4 pi), R0 = int phi0 |V|^1/2 / |x| d^3x, on one
    // octant with x = L t^3 per axis (graded toward the 1/|x| corner)
    const ResonantPair& rp = tuned_unit();
    const double L = 7.0;
    Rule t = gauss_legendre(48, 0.0, 1.0);
    std::vector<double> x(t.size()), w(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        x[i] = L * std::pow(t.x[i], 3);
        w[i] = t.w[i] * 3.0 * L * t.x[i] * t.x[i];
    }
    double I1 = 0.0, I2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j)
            for (std::size_t k = 0; k < x.size(); ++k) {
                const double r = std::sqrt(x[i] * x[i] + x[j] * x[j] + x[k] * x[k]);
                if (r > L) continue;
                const double f = rp.phi0_at(r) * rp.potential.sqrt_abs(r) * w[i] * w[j] * w[k];
                I1 += f;
                I2 += f / r;
            }
    I1 *= 8.0;
    I2 *= 8.0;
    EXPECT_NEAR(I1 * I1 / (4.0 * M_PI), rp.a, 1e-4 * rp.a);
    EXPECT_NEAR(I2, rp.R0, 1e-4 * rp.R0);
}

TEST(BoundState, ResonanceEdges)
{
    const ResonantPair& rp = tuned_unit();
    EXPECT_FALSE(bound_state_energy(rp.potential, 1.0, rp.grid).has_value());
    EXPECT_FALSE(bound_state_energy(rp.potential, 1.0 - 1e-6, rp.grid).has_value());
    auto e = bound_state_energy(rp.potential, 1.0 + 1e-6, rp.grid);
    ASSERT_TRUE(e.has_value());
    EXPECT_LT(*e, 0.0);
    auto e1 = bound_state_energy(rp.potential, 1.01, rp.grid);
    ASSERT_TRUE(e1.has_value());
    EXPECT_NEAR(*e1 / (-1e-4 / (rp.a * rp.a)), 1.0, 0.05);
    EXPECT_THROW(bound_state_energy(rp.potential, 0.0, rp.grid), ValidationError);
}

TEST(BoundState, MonotoneInCoupling)
{
    const ResonantPair& rp = tuned_unit();
    double prev = 0.0;
    for (double mu : {1.001, 1.01, 1.1, 1.5, 3.0}) {
        auto e = bound_state_energy(rp.potential, mu, rp.grid);
        ASSERT_TRUE(e.has_value());
        EXPECT_LT(*e, prev);
        prev = *e;
    }
}

TEST(BoundState, DeepWellMatchesShooting)
{
    PairPotential p = gauss(10.0, 1.0);
    auto e = bound_state_energy(p, 1.0, default_radial_grid(p));
    auto ref = oracle::ground_energy_shooting(radial(p), 1.0, 12.0);
    ASSERT_TRUE(e && ref);
    EXPECT_NEAR(*e / *ref, 1.0, 1e-6);
}

TEST(KlausSimon, ResonantLaw)
{
    const ResonantPair& rp = tuned_unit();
    std::vector<double> mu;
    for (int i = 0; i < 8; ++i) mu.push_back(1.0 + 1e-3 * std::pow(10.0, i / 7.0));
    KlausSimonReport r = klaus_simon_check(rp, mu);
    EXPECT_NEAR(r.exponent, 2.0, 0.05);
    EXPECT_NEAR(r.prefactor * rp.a * rp.a, 1.0, 0.03);
}

TEST(KlausSimon, DeepWellDiverges)
{
    // a potential already holding a deep state: e(mu) is nearly linear in mu - 1
    PairPotential p = gauss(10.0, 1.0);
    ResonantPair deep;
    deep.potential = p;
    deep.grid = default_radial_grid(p);
    std::vector<double> mu;
    for (int i = 0; i < 8; ++i) mu.push_back(1.0 + 1e-3 * std::pow(10.0, i / 7.0));
    KlausSimonReport r = klaus_simon_check(deep, mu);
    EXPECT_LT(r.exponent, 0.5);
}

TEST(KlausSimon, Errors)
{
    const ResonantPair& rp = tuned_unit();
    EXPECT_THROW(klaus_simon_check(rp, {1.01, 1.02}), ValidationError);
    EXPECT_THROW(klaus_simon_check(rp, {1.01, 1.02, 1.03, 1.04, 1.05, 1.2}), ValidationError);
    ResonantPair weak = rp;
    weak.potential = rp.potential.scaled(0.5);
    try {
        klaus_simon_check(weak, {1.01, 1.02, 1.03, 1.04, 1.045, 1.05});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("mu=1.01"), std::string::npos);
    }
}

TEST(FiberResolvent, MatchesDirectInversion)
{
    // |v|^1/2 (G^-1 + v)^-1 |v|^1/2 with G the same weighted Green's matrix
    const ResonantPair& rp = tuned_unit();
    RadialGrid g = make_radial_grid(200, 40.0);
    const double z = 0.05;
    MatrixXd M = fiber_bs_resolvent(rp, z, g);
    MatrixXd G = weighted_green(g, z);
    VectorXd vh(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) vh(i) = rp.potential.sqrt_abs(g.r[i]);
    MatrixXd H = G.inverse();
    H.diagonal() -= vh.cwiseAbs2();
    MatrixXd D = vh.asDiagonal() * H.inverse() * vh.asDiagonal();
    EXPECT_LT((M - D).cwiseAbs().maxCoeff(), 1e-8 * D.cwiseAbs().maxCoeff());
}

TEST(FiberResolvent, MatchesFiniteDifferenceHamiltonian)
{
    // independent discretization: 3-point -D^2 on a uniform grid, compared as a
    // quadratic form on a smooth test function
    const ResonantPair& rp = tuned_unit();
    const double z = 0.05, R = 40.0;
    const int n = 8000;
    const double h = R / (n + 1);
    Eigen::SparseMatrix<double> A(n, n);
    std::vector<Eigen::Triplet<double>> tr;
    VectorXd vh(n), f(n);
    for (int i = 0; i < n; ++i) {
        const double r = (i + 1) * h;
        vh(i) = rp.potential.sqrt_abs(r);
        f(i) = r * std::exp(-r * r / 3.0);
        tr.emplace_back(i, i, 2.0 / (h * h) + z - vh(i) * vh(i));
        if (i) tr.emplace_back(i, i - 1, -1.0 / (h * h));
        if (i + 1 < n) tr.emplace_back(i, i + 1, -1.0 / (h * h));
    }
    A.setFromTriplets(tr.begin(), tr.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    const VectorXd g = ldlt.solve(vh.cwiseProduct(f));
    const double fd = h * vh.cwiseProduct(f).dot(g);

    RadialGrid grid = default_radial_grid(rp.potential);
    MatrixXd M = fiber_bs_resolvent(rp, z, grid);
    VectorXd fw(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) fw(i) = std::sqrt(grid.w[i]) * grid.r[i] * std::exp(-grid.r[i] * grid.r[i] / 3.0);
    const double ny = fw.dot(M * fw);
    EXPECT_NEAR(ny / fd, 1.0, 1e-4);
}

TEST(FiberResolvent, LimitsAndPole)
{
    const ResonantPair& rp = tuned_unit();
    const RadialGrid& g = rp.grid;
    const double z = 1e3;
    MatrixXd K = bs_matrix(rp.potential, z, g).K;
    MatrixXd M = fiber_bs_resolvent(rp, z, g);
    const double nk = K.operatorNorm();
    // Neumann remainder: K^2 (1-K)^-1
    EXPECT_LE((M - K).operatorNorm(), nk * nk / (1.0 - nk) * (1.0 + 1e-9)); // equality up to roundoff
    EXPECT_LT(nk, 1e-2);
    ResonantPair zero = rp;
    zero.potential = rp.potential.scaled(0.0);
    EXPECT_EQ(fiber_bs_resolvent(zero, 0.1, g).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(fiber_bs_resolvent(rp, 0.0, g), ValidationError);

    auto top = [&](double zz) { return top_eigenvalue_sym(fiber_bs_resolvent(rp, zz, g)); };
    const double slope = std::log(top(1e-4) / top(1e-6)) / std::log(1e-4 / 1e-6);
    EXPECT_NEAR(slope, -0.5, 0.05);
}
