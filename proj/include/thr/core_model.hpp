#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace thr {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Eigen::Matrix2d;
using Eigen::Vector2d;

struct MassConfig {
    double m1 = 1.0, m2 = 1.0, m3 = 1.0;

    void validate() const
    {
        for (double m : {m1, m2, m3})
            if (!std::isfinite(m) || m <= 0.0)
                throw ValidationError("MassConfig: masses must be positive and finite");
    }
};

// One Jacobi set (eta, zeta) adapted to a pair. `from_xy` maps (x,y) -> (eta,zeta);
// the pair separation is pair_scale * |eta|.
struct Arrangement {
    Matrix2d from_xy = Matrix2d::Identity();
    double pair_scale = 1.0;
};

struct JacobiFrame {
    double alpha = 1.0;      // {1,2}
    double alphaPrime = 1.0; // {1,3}
    double alpha23 = 1.0;    // {2,3}
    double M12 = 0.0, M13 = 0.0, M23 = 0.0;
    Matrix2d mix;            // (eta,zeta) of {1,3} -> (x,y)
    Vector2d sep12, sep13, sep23; // r_k - r_i = c_x x + c_y y
    Arrangement arr[3];      // 0: {1,2}, 1: {1,3}, 2: {2,3}
};

inline JacobiFrame jacobi_frame(const MassConfig& m)
{
    m.validate();
    const double M = m.m1 + m.m2 + m.m3;
    JacobiFrame f;
    f.alpha = std::sqrt(m.m1 + m.m2) / std::sqrt(2.0 * m.m1 * m.m2);
    f.alphaPrime = std::sqrt(m.m1 + m.m3) / std::sqrt(2.0 * m.m1 * m.m3);
    f.alpha23 = std::sqrt(m.m2 + m.m3) / std::sqrt(2.0 * m.m2 * m.m3);
    f.M12 = (m.m1 + m.m2) * m.m3 / M;
    f.M13 = (m.m1 + m.m3) * m.m2 / M;
    f.M23 = (m.m2 + m.m3) * m.m1 / M;

    // relative coordinates s = r2 - r1, t = r3 - r1
    const double k12 = std::sqrt(2.0 * f.M12), k13 = std::sqrt(2.0 * f.M13), k23 = std::sqrt(2.0 * f.M23);
    Matrix2d P, Q13, Q23;
    P << 1.0 / f.alpha, 0.0,
         -k12 * m.m2 / (m.m1 + m.m2), k12;
    Q13 << 0.0, 1.0 / f.alphaPrime,
           k13, -k13 * m.m3 / (m.m1 + m.m3);
    Q23 << -1.0 / f.alpha23, 1.0 / f.alpha23,
           -k23 * m.m2 / (m.m2 + m.m3), -k23 * m.m3 / (m.m2 + m.m3);
    const Matrix2d Pi = P.inverse();

    f.arr[0].from_xy = Matrix2d::Identity();
    f.arr[0].pair_scale = f.alpha;
    f.arr[1].from_xy = Q13 * Pi;
    f.arr[1].pair_scale = f.alphaPrime;
    f.arr[2].from_xy = Q23 * Pi;
    f.arr[2].pair_scale = f.alpha23;
    f.mix = f.arr[1].from_xy.transpose();

    f.sep12 = Pi.row(0).transpose();
    f.sep13 = Pi.row(1).transpose();
    f.sep23 = (Pi.row(1) - Pi.row(0)).transpose();

    if ((f.mix.transpose() * f.mix - Matrix2d::Identity()).cwiseAbs().maxCoeff() > 1e-12)
        throw NumericalError("jacobi_frame: mix not orthogonal");
    if (f.mix(0, 0) == 0.0 || f.mix(0, 1) == 0.0)
        throw NumericalError("jacobi_frame: degenerate mix");
    return f;
}

enum class Pair { p12 = 0, p13 = 1, p23 = 2 };

inline const char* pair_name(Pair p)
{
    switch (p) {
    case Pair::p12: return "pair12";
    case Pair::p13: return "pair13";
    default: return "pair23";
    }
}

struct GaussTerm {
    double depth = 0.0;
    double range = 1.0;
};

inline constexpr double admissibility_delta = 1.0 / 16.0;

struct Admissibility {
    double int_V2 = 0.0;     // int |V|^2 d^3r
    double int_Vdelta = 0.0; // int |V| (1+r)^{2 delta} d^3r
    double b1 = 0.0, b2 = 0.0;
};

struct PairPotential {
    std::vector<GaussTerm> terms;
    Pair pair = Pair::p12;

    double operator()(double r) const
    {
        double v = 0.0;
        for (const auto& t : terms) v -= t.depth * std::exp(-r * r / (t.range * t.range));
        return v;
    }
    double sqrt_abs(double r) const { return std::sqrt(-(*this)(r)); }

    double max_range() const
    {
        double s = 0.0;
        for (const auto& t : terms) s = std::max(s, t.range);
        return s;
    }
    double total_depth() const
    {
        double d = 0.0;
        for (const auto& t : terms) d += t.depth;
        return d;
    }
    bool is_zero() const { return total_depth() == 0.0; }

    PairPotential scaled(double c) const
    {
        PairPotential p = *this;
        for (auto& t : p.terms) t.depth *= c;
        return p;
    }
    // V(scale * r) as a function of r
    PairPotential in_jacobi(double scale) const
    {
        PairPotential p = *this;
        for (auto& t : p.terms) t.range /= scale;
        return p;
    }

    Admissibility validate() const
    {
        const std::string who = pair_name(pair);
        if (terms.empty()) throw ValidationError(who + ": no terms");
        for (const auto& t : terms) {
            if (!std::isfinite(t.depth) || t.depth < 0.0)
                throw ValidationError(who + ": V(r) <= 0 violated (term depth must be >= 0)");
            if (!std::isfinite(t.range) || t.range <= 0.0)
                throw ValidationError(who + ": term range must be positive");
        }
        for (int i = 0; i <= 1000; ++i)
            if ((*this)(0.05 * i) > 0.0) throw ValidationError(who + ": V(r) <= 0 violated");

        Admissibility a;
        const double rc = 12.0 * max_range();
        Rule q = gauss_legendre(200, 0.0, rc);
        for (std::size_t i = 0; i < q.size(); ++i) {
            double r = q.x[i], v = std::abs((*this)(r));
            double w = 4.0 * M_PI * r * r * q.w[i];
            a.int_V2 += w * v * v;
            a.int_Vdelta += w * v * std::pow(1.0 + r, 2.0 * admissibility_delta);
        }
        if (!std::isfinite(a.int_V2) || !std::isfinite(a.int_Vdelta))
            throw ValidationError(who + ": admissibility integrals not finite");
        if (pair == Pair::p12) {
            a.b2 = 1.0;
            const double smax = max_range();
            a.b1 = std::exp(smax * smax / 4.0) * total_depth();
            for (int i = 0; i <= 5000; ++i) {
                double r = 0.01 * i;
                if ((*this)(r) < -a.b1 * std::exp(-a.b2 * r) * (1.0 + 1e-12))
                    throw ValidationError(who + ": exponential lower bound violated");
            }
        }
        return a;
    }
};

inline double evaluate_potential(const PairPotential& p, double r) { return p(r); }

struct ThreeBodySystem {
    MassConfig masses;
    JacobiFrame frame;
    PairPotential v[3]; // v12, v13, v23 as functions of the physical separation

    const Vector2d& sep(int k) const
    {
        return k == 0 ? frame.sep12 : (k == 1 ? frame.sep13 : frame.sep23);
    }
};

inline ThreeBodySystem make_system(const MassConfig& m, PairPotential v12, PairPotential v13, PairPotential v23)
{
    ThreeBodySystem s;
    s.masses = m;
    s.frame = jacobi_frame(m);
    v12.pair = Pair::p12;
    v13.pair = Pair::p13;
    v23.pair = Pair::p23;
    v12.validate();
    v13.validate();
    v23.validate();
    s.v[0] = std::move(v12);
    s.v[1] = std::move(v13);
    s.v[2] = std::move(v23);
    return s;
}

} // namespace thr
