#pragma once

#include <unsupported/Eigen/LevenbergMarquardt>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "core_model.hpp"
#include "twobody.hpp"
#include "variational.hpp"

namespace thr {

// Critical coupling of one pair, as a two-body problem in its Jacobi variable.
inline double pair_critical_coupling(const PairPotential& v, double alpha)
{
    PairPotential pj = v.in_jacobi(alpha);
    return tune_resonance(pj, default_radial_grid(pj)).mu_star;
}

// lambda-tilde: the smaller of the {1,3} and {2,3} critical couplings.
inline double lambda_tilde(const ThreeBodySystem& sys)
{
    return std::min(pair_critical_coupling(sys.v[1], sys.frame.alphaPrime),
                    pair_critical_coupling(sys.v[2], sys.frame.alpha23));
}

// inf sigma(H0 + v12): the {1,2} ground state energy, or 0.
inline double threshold_energy(const ThreeBodySystem& sys)
{
    if (sys.v[0].is_zero()) return 0.0;
    PairPotential pj = sys.v[0].in_jacobi(sys.frame.alpha);
    auto e = bound_state_energy(pj, 1.0, default_radial_grid(pj));
    return e ? *e : 0.0;
}

struct Bracket {
    double lo = 0.0, hi = 0.0;
    double E_hi = 0.0;
    double eps_num = 1e-6;
    int evaluations = 0;
    std::string caveat;
};

// Bisection on "E(lambda) < E_thr - eps_num". The returned [hi - tol, hi] has
// both ends certified by the (monotone) predicate.
inline Bracket find_lambda_cr_bracket(const SolverContext& ctx, double E_thr, double tol, double lam_max,
                                      double eps_num = 1e-6, double lam_min = 0.0)
{
    if (!(tol > 0.0)) throw ValidationError("find_lambda_cr_bracket: tol must be > 0");
    if (!(lam_max > lam_min)) throw ValidationError("find_lambda_cr_bracket: empty lambda range");
    Bracket b;
    b.eps_num = eps_num;
    auto binds = [&](double lam) {
        ++b.evaluations;
        return ground_energy(ctx, lam) < E_thr - eps_num;
    };
    double lo = lam_min, hi = lam_max * (1.0 - 1e-3);
    if (!binds(hi)) throw NumericalError("find_lambda_cr_bracket: no critical point in range (lambda <= " + std::to_string(hi) + ")");
    if (binds(lo)) throw NumericalError("find_lambda_cr_bracket: already bound at lambda = " + std::to_string(lo));
    while (hi - lo > 0.5 * tol) {
        const double mid = 0.5 * (lo + hi);
        (binds(mid) ? hi : lo) = mid;
    }
    b.hi = hi;
    b.lo = hi - tol;
    b.E_hi = ground_energy(ctx, hi);
    b.caveat = "lo certifies no binding only at the basis resolution; variational lambda_cr is biased high";
    return b;
}

struct EnergySample {
    double lambda = 0.0, E = 0.0;
    HalfNorms hn;
    std::vector<double> spread; // one per R in EnergyCurve::R_list
    double residual = 0.0;
    std::string flag;           // empty when converged
};

struct EnergyCurve {
    std::vector<EnergySample> samples;
    double E_thr = 0.0;
    std::vector<double> R_list;
    BasisDescriptor basis;

    bool ok(std::size_t i) const { return samples[i].flag.empty(); }
};

inline EnergySample evaluate_sample(const SolverContext& ctx, double lam, double E_thr, const std::vector<double>& R_list)
{
    EnergySample s;
    s.lambda = lam;
    try {
        SpectralResult r = ground_state(ctx, lam);
        s.E = r.E;
        s.residual = r.residual;
        s.hn = potential_half_norms(r, ctx);
        for (double R : R_list) s.spread.push_back(spread_probability(r, ctx, R));
        if (!std::isfinite(r.E) || r.residual > 1e-6) s.flag = "unconverged";
        else if (r.E > E_thr + 1e-12) s.flag = "above_threshold";
    } catch (const std::exception& e) {
        s.E = std::numeric_limits<double>::quiet_NaN();
        s.spread.assign(R_list.size(), std::numeric_limits<double>::quiet_NaN());
        s.flag = "unconverged";
    }
    return s;
}

inline EnergyCurve scan_energy_curve(const SolverContext& ctx, std::vector<double> lambdas, double E_thr,
                                     const std::vector<double>& R_list = {10.0})
{
    std::sort(lambdas.begin(), lambdas.end());
    lambdas.erase(std::unique(lambdas.begin(), lambdas.end()), lambdas.end());
    EnergyCurve c;
    c.E_thr = E_thr;
    c.R_list = R_list;
    c.basis = ctx.basis.desc;
    for (double lam : lambdas) c.samples.push_back(evaluate_sample(ctx, lam, E_thr, R_list));
    for (std::size_t i = 1; i < c.samples.size(); ++i)
        if (c.ok(i) && c.ok(i - 1) && c.samples[i].E > c.samples[i - 1].E + 1e-12) c.samples[i].flag = "nonmonotone";
    return c;
}

// Coarse delta ladder above the bracket, then lambdas interpolated to hit a
// geometric ladder of |E - E_thr| from floor/sqrt(10) up to e_top.
inline std::vector<double> auto_lambda_list(const SolverContext& ctx, double E_thr, double lam_hi, double lam_max,
                                            double floor = 1e-5, double e_top = 1e-2, int coarse_per_decade = 8,
                                            int fine_per_decade = 24)
{
    const double dmax = std::min(0.5, 0.9 * (lam_max - lam_hi));
    if (!(dmax > 1e-6)) throw ValidationError("auto_lambda_list: no room between bracket and lambda-tilde");
    std::vector<double> ld, le, lams;
    const int nc = static_cast<int>(std::ceil(coarse_per_decade * std::log10(dmax / 1e-6))) + 1;
    for (int i = 0; i < nc; ++i) {
        const double d = 1e-6 * std::pow(dmax / 1e-6, double(i) / (nc - 1));
        const double E = ground_energy(ctx, lam_hi + d);
        lams.push_back(lam_hi + d);
        if (E < E_thr) {
            ld.push_back(std::log(d));
            le.push_back(std::log(E_thr - E));
        }
    }
    const double t0 = std::log10(floor) - 0.5, t1 = std::log10(e_top);
    const int nf = static_cast<int>(std::round((t1 - t0) * fine_per_decade));
    for (int i = 0; i <= nf; ++i) {
        const double target = std::log(std::pow(10.0, t0 + double(i) / fine_per_decade));
        for (std::size_t j = 1; j < le.size(); ++j)
            if (le[j - 1] <= target && target <= le[j] && le[j] > le[j - 1]) {
                const double t = (target - le[j - 1]) / (le[j] - le[j - 1]);
                lams.push_back(lam_hi + std::exp(ld[j - 1] + t * (ld[j] - ld[j - 1])));
                break;
            }
    }
    std::sort(lams.begin(), lams.end());
    lams.erase(std::unique(lams.begin(), lams.end()), lams.end());
    return lams;
}

enum class Model { A, B, B_log, C, C_free };

inline const char* model_name(Model m)
{
    switch (m) {
    case Model::A: return "A";
    case Model::B: return "B";
    case Model::B_log: return "B_log";
    case Model::C: return "C";
    default: return "C_free";
    }
}

struct FitWindow {
    std::size_t begin = 0, end = 0; // sample indices [begin, end)
    double lo = 0.0, hi = 0.0;      // |E - E_thr| range
};

struct ScalingFit {
    Model model = Model::A;
    double lambda_cr = 0.0;
    double constant = 0.0;
    double exponent = 1.0;
    double ssr = 0.0; // sum of squared relative residuals
    std::vector<double> residuals;
    FitWindow window;
    std::size_t n = 0;
    bool in_bracket = false;
    int iterations = 0;
    double grad_norm = 0.0;
};

// Model value for E - E_thr at offset d = lambda - lambda_cr.
inline double model_value(Model m, double d, double c, double p = 2.0)
{
    switch (m) {
    case Model::A: return -c * d;
    case Model::B: return c * d / std::log(d);
    case Model::C: return -c * d * d;
    case Model::C_free: return -c * std::pow(d, p);
    default: throw ValidationError("model_value: B_log is not an energy model");
    }
}

// Smallest half-decade [floor 10^{j/2 + shift}, floor 10^{(j+1)/2 + shift})
// of |E - E_thr| holding at least min_points converged samples.
inline FitWindow select_window(const EnergyCurve& c, double floor = 1e-5, std::size_t min_points = 8, double shift = 0.0)
{
    for (int j = 0; j < 16; ++j) {
        const double lo = floor * std::pow(10.0, 0.5 * j + shift), hi = lo * std::sqrt(10.0);
        FitWindow w{c.samples.size(), 0, lo, hi};
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < c.samples.size(); ++i) {
            const double y = c.E_thr - c.samples[i].E;
            if (!c.ok(i) || !(y >= lo && y < hi)) continue;
            w.begin = std::min(w.begin, i);
            w.end = std::max(w.end, i + 1);
            ++cnt;
        }
        if (cnt >= min_points) return w;
    }
    throw NumericalError("select_window: no half-decade with " + std::to_string(min_points) + " points above " +
                         std::to_string(floor));
}

namespace detail {

struct FitData {
    std::vector<double> lam, y; // y = E - E_thr
};

inline FitData window_data(const EnergyCurve& c, const FitWindow& w)
{
    FitData d;
    for (std::size_t i = w.begin; i < w.end; ++i) {
        if (!c.ok(i)) continue;
        const double y = c.samples[i].E - c.E_thr;
        if (!(-y >= w.lo && -y < w.hi)) continue;
        d.lam.push_back(c.samples[i].lambda);
        d.y.push_back(y);
    }
    return d;
}

// Weighted straight line v = s*lam + b, weights 1/|v|.
inline std::pair<double, double> line_fit(const std::vector<double>& lam, const std::vector<double>& v)
{
    const int n = static_cast<int>(lam.size());
    Eigen::MatrixXd A(n, 2);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
        const double wt = 1.0 / std::abs(v[i]);
        A(i, 0) = lam[i] * wt;
        A(i, 1) = wt;
        b(i) = v[i] * wt;
    }
    Eigen::Vector2d x = A.colPivHouseholderQr().solve(b);
    return {x(0), x(1)};
}

// theta = (ln(lam_min - lambda_cr), ln c [, p])
struct LawFunctor : Eigen::DenseFunctor<double> {
    Model model;
    const FitData* d;
    double lam_min;
    LawFunctor(Model m, const FitData& data, double lmin, int np)
        : Eigen::DenseFunctor<double>(np, static_cast<int>(data.lam.size())), model(m), d(&data), lam_min(lmin) {}

    int operator()(const Eigen::VectorXd& th, Eigen::VectorXd& f) const
    {
        const double lc = lam_min - std::exp(th(0)), c = std::exp(th(1)), p = th.size() > 2 ? th(2) : 2.0;
        for (std::size_t i = 0; i < d->lam.size(); ++i) {
            const double m = model_value(model, d->lam[i] - lc, c, p);
            f(i) = (m - d->y[i]) / std::abs(d->y[i]);
        }
        return 0;
    }
    int df(const Eigen::VectorXd& th, Eigen::MatrixXd& J) const
    {
        const double e0 = std::exp(th(0)), lc = lam_min - e0, c = std::exp(th(1)), p = th.size() > 2 ? th(2) : 2.0;
        for (std::size_t i = 0; i < d->lam.size(); ++i) {
            const double dl = d->lam[i] - lc, w = 1.0 / std::abs(d->y[i]);
            const double m = model_value(model, dl, c, p);
            double dm;
            switch (model) {
            case Model::A: dm = -c; break;
            case Model::B: {
                const double L = std::log(dl);
                dm = c * (L - 1.0) / (L * L);
                break;
            }
            case Model::C: dm = -2.0 * c * dl; break;
            default: dm = -c * p * std::pow(dl, p - 1.0); break;
            }
            J(i, 0) = dm * e0 * w;
            J(i, 1) = m * w;
            if (th.size() > 2) J(i, 2) = m * std::log(dl) * w;
        }
        return 0;
    }
};

struct LMOutcome {
    Eigen::VectorXd th;
    double ssr = 0.0, grad = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline LMOutcome run_lm(Model m, const FitData& d, double lam_min, Eigen::VectorXd th)
{
    LawFunctor f(m, d, lam_min, static_cast<int>(th.size()));
    Eigen::LevenbergMarquardt<LawFunctor> lm(f);
    lm.setGtol(1e-12);
    lm.setFtol(1e-15);
    lm.setXtol(1e-15);
    lm.setMaxfev(2000);
    LMOutcome o;
    auto st = lm.minimizeInit(th);
    if (st == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) return o;
    st = Eigen::LevenbergMarquardtSpace::Running;
    for (; o.iterations < 200 && st == Eigen::LevenbergMarquardtSpace::Running; ++o.iterations)
        st = lm.minimizeOneStep(th);
    o.converged = st != Eigen::LevenbergMarquardtSpace::Running &&
                  st != Eigen::LevenbergMarquardtSpace::ImproperInputParameters &&
                  st != Eigen::LevenbergMarquardtSpace::TooManyFunctionEvaluation;
    Eigen::VectorXd r(d.lam.size());
    Eigen::MatrixXd J(d.lam.size(), th.size());
    f(th, r);
    f.df(th, J);
    o.th = th;
    o.ssr = r.squaredNorm();
    o.grad = (J.transpose() * r).norm();
    if (!std::isfinite(o.ssr)) o.converged = false;
    return o;
}

} // namespace detail

// Damped least squares over (lambda_cr, constant [, exponent]) on relative
// residuals, started from a linear pre-fit. B_log is the linear fit of
// E ln(-E) - E = C0 (lambda - lambda_cr), used for model B's start.
inline ScalingFit fit_threshold_law(const EnergyCurve& c, Model model, const FitWindow& w,
                                    std::optional<Bracket> bracket = std::nullopt)
{
    detail::FitData d = detail::window_data(c, w);
    const std::size_t np = model == Model::C_free ? 3 : 2;
    if (d.lam.size() < np + 1) throw ValidationError("fit_threshold_law: fewer points than parameters");
    if (model == Model::B || model == Model::B_log) {
        for (double y : d.y)
            if (!(y < 0.0)) throw ValidationError("fit_threshold_law: model B needs E < E_thr");
    }
    const double lam_min = *std::min_element(d.lam.begin(), d.lam.end());
    const double lam_max = *std::max_element(d.lam.begin(), d.lam.end());
    const double span = lam_max - lam_min;

    ScalingFit out;
    out.model = model;
    out.window = w;
    out.n = d.lam.size();

    // linear pre-fit
    double lc0 = lam_min - span, c0 = 1.0;
    {
        std::vector<double> v(d.y.size());
        Model pre = model == Model::C_free ? Model::C : model;
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double y = d.y[i];
            if (pre == Model::A) v[i] = y;
            else if (pre == Model::C) v[i] = std::sqrt(-y);
            else v[i] = y * std::log(-y) - y;
        }
        auto [s, b] = detail::line_fit(d.lam, v);
        double cc = pre == Model::A ? -s : s;
        double lc = -b / s;
        if (pre == Model::C) cc = s * s;
        if (model == Model::B_log) {
            out.lambda_cr = lc;
            out.constant = cc;
            out.exponent = 1.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double r = (s * d.lam[i] + b - v[i]) / std::abs(v[i]);
                out.residuals.push_back(r);
                out.ssr += r * r;
            }
            if (bracket) out.in_bracket = lc >= bracket->lo && lc <= bracket->hi;
            return out;
        }
        if (std::isfinite(lc) && lc < lam_min && cc > 0.0) {
            lc0 = lc;
            c0 = cc;
        }
    }

    std::vector<double> offsets = {lam_min - lc0, 1e-3 * span, 1e-1 * span, span, 10.0 * span};
    detail::LMOutcome best;
    best.ssr = std::numeric_limits<double>::infinity();
    for (double off : offsets) {
        if (!(off > 0.0)) continue;
        Eigen::VectorXd th(np);
        th(0) = std::log(off);
        th(1) = std::log(c0);
        if (np == 3) th(2) = 2.0;
        if (model == Model::B && lam_max - (lam_min - off) >= 1.0) continue;
        auto o = detail::run_lm(model, d, lam_min, th);
        if (o.converged && o.ssr < best.ssr) best = o;
        if (!best.converged && o.th.size() && (best.th.size() == 0 || o.ssr < best.ssr)) best = o;
    }
    if (!best.converged)
        throw NumericalError("fit_threshold_law: no convergence for model " + std::string(model_name(model)) +
                             (best.th.size() ? ", best lambda_cr=" + std::to_string(lam_min - std::exp(best.th(0))) +
                                                   " grad=" + std::to_string(best.grad)
                                             : std::string()));
    out.lambda_cr = lam_min - std::exp(best.th(0));
    out.constant = std::exp(best.th(1));
    out.exponent = model == Model::A ? 1.0 : (model == Model::B ? 1.0 : (np == 3 ? best.th(2) : 2.0));
    out.iterations = best.iterations;
    out.grad_norm = best.grad;
    for (std::size_t i = 0; i < d.lam.size(); ++i) {
        const double m = model_value(model, d.lam[i] - out.lambda_cr, out.constant, out.exponent);
        const double r = (m - d.y[i]) / std::abs(d.y[i]);
        out.residuals.push_back(r);
        out.ssr += r * r;
    }
    if (bracket) out.in_bracket = out.lambda_cr >= bracket->lo && out.lambda_cr <= bracket->hi;
    return out;
}

struct ModelRanking {
    std::vector<ScalingFit> fits; // A, B, C
    std::vector<Model> order;     // best first
    std::vector<double> aic;
    double margin = 0.0;          // ssr(second) / ssr(first)
};

// Fits the three laws on one window and ranks them by AIC on the relative residuals.
inline ModelRanking model_selection(const EnergyCurve& c, const FitWindow& w, std::optional<Bracket> bracket = std::nullopt)
{
    ModelRanking r;
    const std::vector<Model> models = {Model::A, Model::B, Model::C};
    for (Model m : models) {
        try {
            r.fits.push_back(fit_threshold_law(c, m, w, bracket));
        } catch (const NumericalError&) {
            ScalingFit f;
            f.model = m;
            f.ssr = std::numeric_limits<double>::infinity();
            f.window = w;
            r.fits.push_back(f);
        }
    }
    std::vector<std::size_t> idx(r.fits.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        idx[i] = i;
        const double n = static_cast<double>(std::max<std::size_t>(r.fits[i].n, 1));
        r.aic.push_back(n * std::log(r.fits[i].ssr / n) + 4.0);
    }
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return r.aic[a] < r.aic[b]; });
    for (auto i : idx) r.order.push_back(r.fits[i].model);
    r.margin = r.fits[idx[1]].ssr / r.fits[idx[0]].ssr;
    return r;
}

struct Theorem3Entry {
    double lambda = 0.0, log_abs_E = 0.0, product = 0.0, abs_E = 0.0;
};

struct Theorem3Report {
    std::vector<Theorem3Entry> seq;
    double var_last = 0.0, var_prev = 0.0; // relative variation, final and preceding half-decades
    double late_mean = 0.0;                 // mean over the final half-decade
    std::size_t n_last = 0, n_prev = 0;
};

// |ln|E|| (||v13|^1/2 psi||^2 + ||v23|^1/2 psi||^2) along the curve; the final
// half-decade is the one starting at the trust floor.
inline Theorem3Report theorem3_sequence(const EnergyCurve& c, double floor = 1e-5)
{
    Theorem3Report r;
    for (std::size_t i = 0; i < c.samples.size(); ++i) {
        if (!c.ok(i)) continue;
        const auto& s = c.samples[i];
        const double aE = std::abs(s.E - c.E_thr);
        if (!(s.E - c.E_thr < 0.0)) continue;
        r.seq.push_back({s.lambda, std::log(aE), std::abs(std::log(aE)) * (s.hn.h13 + s.hn.h23), aE});
    }
    auto variation = [&](double lo, double hi, std::size_t& n, double* mean) {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn, sum = 0.0;
        n = 0;
        for (const auto& e : r.seq)
            if (e.abs_E >= lo && e.abs_E < hi) {
                mn = std::min(mn, e.product);
                mx = std::max(mx, e.product);
                sum += e.product;
                ++n;
            }
        if (n == 0) return std::numeric_limits<double>::quiet_NaN();
        if (mean) *mean = sum / n;
        return (mx - mn) / (sum / n);
    };
    const double s10 = std::sqrt(10.0);
    r.var_last = variation(floor, floor * s10, r.n_last, &r.late_mean);
    r.var_prev = variation(floor * s10, floor * 10.0, r.n_prev, nullptr);
    return r;
}

} // namespace thr
