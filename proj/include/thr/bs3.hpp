#pragma once

#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "linalg.hpp"
#include "twobody.hpp"

// Matrix Birman-Schwinger operator on L2(R6) + L2(R6), evaluated in momentum
// space. Channel i = 1, 2 lives in the {1,3} resp. {2,3} Jacobi frame; each
// channel function is kept in the pair s-wave and depends on (p, q) = (pair,
// spectator) momentum magnitudes.

namespace thr {

struct ReducedGrid3B {
    Rule p, q, u, x; // p: GL [0,pmax]; q: GL in ln q; u: GL [-1,1]; x: angular rule for frame changes
    double pmax = 0.0, qmin = 0.0, qmax = 0.0;
    int np() const { return static_cast<int>(p.size()); }
    int nq() const { return static_cast<int>(q.size()); }
};

inline ReducedGrid3B make_reduced_grid(int np, int nq, int nx, int nu, double pmax, double qmin, double qmax)
{
    if (np < 2 || nq < 2 || nx < 2 || nu < 2) throw ValidationError("ReducedGrid3B: grid sizes must be >= 2");
    if (!(pmax > 0.0 && qmin > 0.0 && qmax > qmin)) throw ValidationError("ReducedGrid3B: bad ranges");
    ReducedGrid3B g;
    g.p = gauss_legendre(np, 0.0, pmax);
    g.q = gauss_legendre_log(nq, qmin, qmax);
    g.u = gauss_legendre(nu, -1.0, 1.0);
    g.x = gauss_legendre(nx, -1.0, 1.0);
    g.pmax = pmax;
    g.qmin = qmin;
    g.qmax = qmax;
    return g;
}

// Momentum cutoffs from the steepest |v|^1/2 in any frame.
inline ReducedGrid3B default_reduced_grid(const ThreeBodySystem& sys, int np = 48, int nq = 48, int nx = 24, int nu = 16)
{
    double scale = 0.0;
    for (int k = 0; k < 3; ++k)
        for (const auto& t : sys.v[k].terms) scale = std::max(scale, sys.frame.arr[k].pair_scale / t.range);
    return make_reduced_grid(np, nq, nx, nu, 10.0 * scale, 1e-5, 10.0 * scale);
}

// int over R6 of an L=0 function f(|p|, |q|, cos(p,q))
template <class F>
double integrate_l0(const ReducedGrid3B& g, F&& f)
{
    double s = 0.0;
    for (int i = 0; i < g.np(); ++i)
        for (int j = 0; j < g.nq(); ++j)
            for (std::size_t k = 0; k < g.u.size(); ++k)
                s += g.p.w[i] * g.p.x[i] * g.p.x[i] * g.q.w[j] * g.q.x[j] * g.q.x[j] * g.u.w[k] *
                     f(g.p.x[i], g.q.x[j], g.u.x[k]);
    return 8.0 * M_PI * M_PI * s;
}

struct KState {
    MatrixXd f[2]; // (np x nq) on the {1,3} and {2,3} grids
};

// s-wave kernel of |v(alpha r)|^1/2 as a momentum-space operator:
// (2/pi) int r^2 j0(pr) j0(p'r) w(r) dr, closed form for a single Gaussian.
struct SqrtPotKernel {
    std::vector<GaussTerm> terms; // in the Jacobi variable
    Rule r;
    std::vector<double> wr; // quadrature weights * r^2 * w(r) * 2/pi

    SqrtPotKernel() = default;
    explicit SqrtPotKernel(const PairPotential& pj) : terms(pj.terms)
    {
        if (terms.size() > 1) {
            r = gauss_legendre(600, 0.0, 12.0 * pj.max_range());
            for (std::size_t i = 0; i < r.size(); ++i)
                wr.push_back(2.0 / M_PI * r.w[i] * r.x[i] * r.x[i] * pj.sqrt_abs(r.x[i]));
        }
    }
    bool zero() const
    {
        for (const auto& t : terms)
            if (t.depth != 0.0) return false;
        return true;
    }
    double operator()(double p, double pp) const
    {
        if (terms.size() == 1) {
            const double d = terms[0].depth;
            if (d == 0.0) return 0.0;
            const double beta = 1.0 / (2.0 * terms[0].range * terms[0].range);
            const double t = p * pp / (2.0 * beta);
            const double shc = t > 1e-12 ? -std::expm1(-2.0 * t) / (2.0 * t) : 1.0 - t;
            return std::sqrt(d / M_PI) / (2.0 * beta * std::sqrt(beta)) * std::exp(-(p - pp) * (p - pp) / (4.0 * beta)) * shc;
        }
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            const double a = p * r.x[i], b = pp * r.x[i];
            const double ja = a > 1e-8 ? std::sin(a) / a : 1.0, jb = b > 1e-8 ? std::sin(b) / b : 1.0;
            s += wr[i] * ja * jb;
        }
        return s;
    }
    MatrixXd matrix(const std::vector<double>& P, const std::vector<double>& p) const
    {
        MatrixXd m(P.size(), p.size());
        for (std::size_t i = 0; i < P.size(); ++i)
            for (std::size_t j = 0; j < p.size(); ++j) m(i, j) = (*this)(P[i], p[j]);
        return m;
    }
};

class BS3Operator {
public:
    BS3Operator(const ThreeBodySystem& sys, const ReducedGrid3B& g, int n_fine = 2048) : sys_(sys), g_(g)
    {
        if (n_fine < 16) throw ValidationError("BS3Operator: n_fine too small");
        const int np = g.np();
        omega_.resize(np);
        for (int i = 0; i < np; ++i) omega_(i) = g.p.x[i] * g.p.x[i] * g.p.w[i];
        oq_.resize(g.nq());
        for (int j = 0; j < g.nq(); ++j) oq_(j) = g.q.x[j] * g.q.x[j] * g.q.w[j];

        pcut_ = 2.0 * g.pmax;
        hf_ = pcut_ / (n_fine - 1);
        std::vector<double> fine(n_fine);
        for (int i = 0; i < n_fine; ++i) fine[i] = i * hf_;
        for (int k = 0; k < 3; ++k) {
            ker_[k] = SqrtPotKernel(sys.v[k].in_jacobi(sys.frame.arr[k].pair_scale));
            W_[k] = ker_[k].matrix(g.p.x, g.p.x);
            Wf_[k] = ker_[k].matrix(fine, g.p.x);
        }
        const int pairs[6][2] = {{0, 1}, {0, 2}, {1, 2}, {2, 1}, {1, 0}, {2, 0}};
        for (int l = 0; l < 6; ++l) land_[l] = make_landing(pairs[l][0], pairs[l][1]);
    }

    const ReducedGrid3B& grid() const { return g_; }
    const ThreeBodySystem& system() const { return sys_; }
    double z() const { return z_; }
    const std::vector<std::string>& warnings() const { return warnings_; }
    const SqrtPotKernel& kernel(int k) const { return ker_[k]; }
    const Matrix2d& frame_matrix(int k) const { return sys_.frame.arr[k].from_xy; }
    const VectorXd& omega() const { return omega_; }

    void set_z(double z)
    {
        if (!(z > 0.0)) throw ValidationError("BS3Operator: z must be > 0");
        z_ = z;
        warnings_.clear();
        for (auto& L : land_) {
            L.R0.resize(L.Pk2.size());
            for (std::size_t i = 0; i < L.Pk2.size(); ++i) L.R0[i] = 1.0 / (L.Pk2[i] + L.qk2[i] + z);
        }
        const int np = g_.np();
        M_.assign(g_.nq(), MatrixXd());
        if (ker_[0].zero()) return;
        const VectorXd sw = omega_.cwiseSqrt();
        for (int b = 0; b < g_.nq(); ++b) {
            const double q2 = g_.q.x[b] * g_.q.x[b];
            VectorXd r(np);
            for (int i = 0; i < np; ++i) r(i) = omega_(i) / (g_.p.x[i] * g_.p.x[i] + q2 + z);
            MatrixXd K = W_[0] * r.asDiagonal() * W_[0] * omega_.asDiagonal();
            MatrixXd Ks = sw.asDiagonal() * W_[0] * r.asDiagonal() * W_[0] * sw.asDiagonal();
            const double top = top_eigenvalue_sym(0.5 * (Ks + Ks.transpose()));
            if (top >= 1.0)
                throw NumericalError("BS3Operator: 1 - K12 not positive at q=" + std::to_string(g_.q.x[b]) +
                                     " (top eigenvalue " + std::to_string(top) + ")");
            if (1.0 - top < 1e-10)
                warnings_.push_back("conditioning: 1 - K12 = " + std::to_string(1.0 - top) + " at q=" + std::to_string(g_.q.x[b]));
            M_[b] = (MatrixXd::Identity(np, np) - K).partialPivLu().inverse();
        }
    }

    // pair-frame diagonal term |v_i|^1/2 R0 |v_i|^1/2
    MatrixXd diag_term(int i, const MatrixXd& phi) const
    {
        MatrixXd s = W_[i] * (omega_.asDiagonal() * phi);
        for (int b = 0; b < g_.nq(); ++b)
            for (int a = 0; a < g_.np(); ++a)
                s(a, b) *= omega_(a) / (g_.p.x[a] * g_.p.x[a] + g_.q.x[b] * g_.q.x[b] + z_);
        return W_[i] * s;
    }

    // |v_k|^1/2 R0 |v_j|^1/2 phi_j, landed on frame k
    MatrixXd land(int k, int j, const MatrixXd& phi) const
    {
        const MatrixXd S = source(j, phi);
        MatrixXd acc = MatrixXd::Zero(Wf_[k].rows(), g_.nq());
        scatter(landing(k, j), S, acc);
        return Wf_[k].transpose() * acc;
    }

    KState apply(const KState& s) const
    {
        check(s);
        KState o;
        const MatrixXd S1 = source(1, s.f[0]), S2 = source(2, s.f[1]);
        MatrixXd acc1 = MatrixXd::Zero(Wf_[1].rows(), g_.nq()), acc2 = acc1;
        scatter(landing(1, 2), S2, acc1);
        scatter(landing(2, 1), S1, acc2);
        if (!ker_[0].zero()) {
            MatrixXd acc0 = MatrixXd::Zero(Wf_[0].rows(), g_.nq());
            scatter(landing(0, 1), S1, acc0);
            scatter(landing(0, 2), S2, acc0);
            MatrixXd t = Wf_[0].transpose() * acc0;
            MatrixXd u(t.rows(), t.cols());
            for (int b = 0; b < g_.nq(); ++b) u.col(b) = M_[b] * t.col(b);
            const MatrixXd S0 = source(0, u);
            scatter(landing(1, 0), S0, acc1);
            scatter(landing(2, 0), S0, acc2);
        }
        o.f[0] = diag_term(1, s.f[0]) + Wf_[1].transpose() * acc1;
        o.f[1] = diag_term(2, s.f[1]) + Wf_[2].transpose() * acc2;
        return o;
    }

    // (4 pi)^2 sum p^2 w_p q^2 w_q (a1 b1 + a2 b2)
    double inner(const KState& a, const KState& b) const
    {
        double s = 0.0;
        for (int c = 0; c < 2; ++c) s += (omega_.asDiagonal() * a.f[c].cwiseProduct(b.f[c]) * oq_).sum();
        return 16.0 * M_PI * M_PI * s;
    }

    KState ones() const
    {
        KState s;
        s.f[0] = s.f[1] = MatrixXd::Ones(g_.np(), g_.nq());
        return s;
    }

private:
    struct Landing {
        int k = 0, j = 0;
        std::vector<int> ik, ij;       // fine-grid cell of Pk, Pj (-1: beyond cutoff)
        std::vector<double> tk, tj;    // linear interpolation fractions
        std::vector<double> Pk2, qk2, wt, R0;
        std::vector<int> bk, bj;       // q indices
    };

    Landing make_landing(int k, int j) const
    {
        Landing L;
        L.k = k;
        L.j = j;
        const Matrix2d O = frame_matrix(j) * frame_matrix(k).transpose();
        const double c = O(1, 0), d = O(1, 1), o00 = O(0, 0), det = O.determinant();
        if (std::abs(c) < 1e-12) throw NumericalError("BS3Operator: degenerate frame change");
        const int nq = g_.nq();
        const std::size_t nx = g_.x.size();
        for (int bk = 0; bk < nq; ++bk)
            for (int bj = 0; bj < nq; ++bj)
                for (std::size_t ix = 0; ix < nx; ++ix) {
                    const double qk = g_.q.x[bk], qj = g_.q.x[bj], x = g_.x.x[ix];
                    const double Pk2 = std::max(0.0, (qj * qj + d * d * qk * qk - 2.0 * d * qj * qk * x) / (c * c));
                    const double Pj2 = std::max(0.0, (o00 * o00 * qj * qj + qk * qk - 2.0 * o00 * det * qj * qk * x) / (c * c));
                    int ik, ij;
                    double tk, tj;
                    cell(std::sqrt(Pk2), ik, tk);
                    cell(std::sqrt(Pj2), ij, tj);
                    if (ik < 0 || ij < 0) continue;
                    L.ik.push_back(ik);
                    L.tk.push_back(tk);
                    L.ij.push_back(ij);
                    L.tj.push_back(tj);
                    L.Pk2.push_back(Pk2);
                    L.qk2.push_back(qk * qk);
                    L.wt.push_back(qj * qj * g_.q.w[bj] * g_.x.w[ix] / (2.0 * std::abs(c) * c * c));
                    L.bk.push_back(bk);
                    L.bj.push_back(bj);
                }
        return L;
    }

    void cell(double P, int& i, double& t) const
    {
        const double s = P / hf_;
        i = static_cast<int>(s);
        if (i >= static_cast<int>(Wf_[0].rows()) - 1) {
            i = -1;
            t = 0.0;
            return;
        }
        t = s - i;
    }

    const Landing& landing(int k, int j) const
    {
        for (const auto& L : land_)
            if (L.k == k && L.j == j) return L;
        throw ValidationError("BS3Operator: unknown landing");
    }

    MatrixXd source(int j, const MatrixXd& phi) const { return Wf_[j] * (omega_.asDiagonal() * phi); }

    void scatter(const Landing& L, const MatrixXd& S, MatrixXd& acc) const
    {
        for (std::size_t n = 0; n < L.wt.size(); ++n) {
            const double s = (1.0 - L.tj[n]) * S(L.ij[n], L.bj[n]) + L.tj[n] * S(L.ij[n] + 1, L.bj[n]);
            const double v = L.wt[n] * L.R0[n] * s;
            acc(L.ik[n], L.bk[n]) += (1.0 - L.tk[n]) * v;
            acc(L.ik[n] + 1, L.bk[n]) += L.tk[n] * v;
        }
    }

    void check(const KState& s) const
    {
        for (const auto& f : s.f)
            if (f.rows() != g_.np() || f.cols() != g_.nq()) throw ValidationError("BS3Operator: state incompatible with grid");
        if (!(z_ > 0.0)) throw ValidationError("BS3Operator: set_z before apply");
    }

    ThreeBodySystem sys_;
    ReducedGrid3B g_;
    VectorXd omega_, oq_;
    double pcut_ = 0.0, hf_ = 0.0, z_ = 0.0;
    SqrtPotKernel ker_[3];
    MatrixXd W_[3], Wf_[3];
    std::array<Landing, 6> land_;
    std::vector<MatrixXd> M_; // (1 - K12(q^2 + z))^-1 per q
    std::vector<std::string> warnings_;
};

inline KState apply_K(BS3Operator& op, double z, const KState& s)
{
    if (op.z() != z) op.set_z(z);
    return op.apply(s);
}

struct TopK {
    double value = 0.0;
    KState vec; // unit norm
    int iterations = 0;
};

// Power iteration from the all-positive state.
inline TopK k_top_eigenvalue(BS3Operator& op, double z, double tol = 1e-8, int max_iter = 500)
{
    op.set_z(z);
    KState phi = op.ones();
    double n0 = std::sqrt(op.inner(phi, phi));
    for (auto& f : phi.f) f /= n0;
    double prev = 0.0, rq = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        KState o = op.apply(phi);
        rq = op.inner(phi, o);
        const double n = std::sqrt(op.inner(o, o));
        for (int c = 0; c < 2; ++c) phi.f[c] = o.f[c] / n;
        if (it > 1 && std::abs(rq - prev) < tol * std::abs(rq)) return {rq, phi, it};
        prev = rq;
    }
    throw NumericalError("k_top_eigenvalue: no convergence in " + std::to_string(max_iter) + " iterations (last quotients " +
                         std::to_string(prev) + ", " + std::to_string(rq) + ")");
}

struct BS3Estimate {
    std::vector<double> z, norm, inv, extrapolants;
    double lambda_cr = 0.0, uncertainty = 0.0;
    TopK top_smallest_z;
    std::vector<std::string> warnings;
};

// 1/||K(z)|| extrapolated to z = 0, linear in t = z |ln z| between neighbours.
inline BS3Estimate lambda_cr_from_bs(BS3Operator& op, std::vector<double> z_ladder)
{
    if (z_ladder.size() < 4) throw ValidationError("lambda_cr_from_bs: need at least 4 z values");
    for (std::size_t i = 1; i < z_ladder.size(); ++i)
        if (!(z_ladder[i] < z_ladder[i - 1])) throw ValidationError("lambda_cr_from_bs: z ladder must decrease");
    BS3Estimate e;
    for (double z : z_ladder) {
        TopK t = k_top_eigenvalue(op, z);
        e.z.push_back(z);
        e.norm.push_back(t.value);
        e.inv.push_back(1.0 / t.value);
        for (const auto& w : op.warnings()) e.warnings.push_back(w);
        e.top_smallest_z = std::move(t);
    }
    for (std::size_t i = 1; i < e.inv.size(); ++i)
        if (e.inv[i] > e.inv[i - 1] * (1.0 + 1e-6))
            throw NumericalError("lambda_cr_from_bs: non-monotone ladder at z=" + std::to_string(e.z[i]) +
                                 " (grid resolution)");
    for (std::size_t i = 0; i + 1 < e.inv.size(); ++i) {
        const double t0 = e.z[i] * std::abs(std::log(e.z[i])), t1 = e.z[i + 1] * std::abs(std::log(e.z[i + 1]));
        e.extrapolants.push_back((t0 * e.inv[i + 1] - t1 * e.inv[i]) / (t0 - t1));
    }
    const std::size_t n = e.extrapolants.size();
    e.lambda_cr = e.extrapolants[n - 1];
    e.uncertainty = std::abs(e.extrapolants[n - 1] - e.extrapolants[n - 2]);
    return e;
}

struct Remark3Constants {
    double C1 = 0.0;
    double C1_terms[2] = {0.0, 0.0};
    double C0 = 0.0;         // 8 pi^2 a / (lambda_cr^2 C1^2)
    double C0_literal = 0.0; // 4 a^2 / (R0 C1)^2
    double tail_fraction = 0.0;
};

// C1 = sum_j (2 pi)^{3/2} <phi0-hat, t_j>, where t_j is the j -> {1,2} landing
// of the top eigenvector evaluated at zero spectator momentum.
inline Remark3Constants constants_remark3(const BS3Operator& op, const KState& top, const ResonantPair& tuned,
                                          double lambda_cr)
{
    const ReducedGrid3B& g = op.grid();
    const int np = g.np(), nq = g.nq();
    const double z = op.z();
    KState phi = top;
    const double nrm = std::sqrt(op.inner(phi, phi));
    for (auto& f : phi.f) f /= nrm;

    // momentum-space phi0 (3-D normalized)
    VectorXd f0(np);
    for (int m = 0; m < np; ++m) {
        const double p = g.p.x[m];
        double s = 0.0;
        for (std::size_t i = 0; i < tuned.grid.size(); ++i) s += tuned.grid.w[i] * tuned.u0[i] * std::sin(p * tuned.grid.r[i]);
        f0(m) = s / (M_PI * std::sqrt(2.0) * p);
    }
    const VectorXd& om = op.omega();
    Remark3Constants r;
    double g_lo = 0.0, g_hi = 0.0;
    for (int j = 1; j <= 2; ++j) {
        const Matrix2d O = op.frame_matrix(j) * op.frame_matrix(0).transpose();
        const double c = std::abs(O(1, 0)), o00 = std::abs(O(0, 0));
        const VectorXd a = om.cwiseProduct(f0);
        double total = 0.0;
        for (int b = 0; b < nq; ++b) {
            const double qj = g.q.x[b];
            const double Pk = qj / c, Pj = o00 * qj / c;
            double s = 0.0;
            for (int n = 0; n < np; ++n) s += op.kernel(j)(Pj, g.p.x[n]) * om(n) * phi.f[j - 1](n, b);
            const double R0 = 1.0 / (Pk * Pk + z);
            double proj = 0.0;
            for (int m = 0; m < np; ++m) proj += a(m) * op.kernel(0)(g.p.x[m], Pk);
            const double contrib = std::pow(2.0 * M_PI, 1.5) * 4.0 * M_PI * qj * qj * g.q.w[b] / (2.0 * c * c * c) * 2.0 * R0 * s * proj;
            total += contrib;
            if (b == 0) g_lo += contrib * qj / g.q.w[b];
            if (b == nq - 1) g_hi += contrib * qj / g.q.w[b];
        }
        r.C1_terms[j - 1] = total;
    }
    r.C1 = r.C1_terms[0] + r.C1_terms[1];
    if (!(r.C1 > 0.0)) throw NumericalError("constants_remark3: C1 not positive (" + std::to_string(r.C1) + ")");
    r.tail_fraction = (std::abs(g_lo) + std::abs(g_hi)) / r.C1;
    if (r.tail_fraction > 0.05)
        throw NumericalError("constants_remark3: L1 tail estimate " + std::to_string(r.tail_fraction) + " exceeds 5%");
    r.C0 = 8.0 * M_PI * M_PI * tuned.a / (lambda_cr * lambda_cr * r.C1 * r.C1);
    r.C0_literal = 4.0 * tuned.a * tuned.a / (tuned.R0 * tuned.R0 * r.C1 * r.C1);
    return r;
}

} // namespace thr
