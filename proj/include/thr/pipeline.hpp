#pragma once

#include <json.hpp>

#include <chrono>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bs3.hpp"
#include "config.hpp"
#include "threshold_fit.hpp"
#include "twobody.hpp"
#include "variational.hpp"

namespace thr {

namespace fs = std::filesystem;

inline constexpr const char* tool_version = "thr3 1.0.0";

inline std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hash_of(const json& j)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a64(j.dump() + "|" + tool_version));
    return buf;
}

namespace detail {

inline double num(const json& j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline json terms_json(const std::vector<GaussTerm>& t)
{
    json a = json::array();
    for (const auto& g : t) a.push_back({g.depth, g.range});
    return a;
}

inline json window_json(const FitWindow& w)
{
    return {{"begin", w.begin}, {"end", w.end}, {"lo", w.lo}, {"hi", w.hi}};
}

inline json fit_json(const ScalingFit& f)
{
    return {{"model", model_name(f.model)}, {"lambda_cr", f.lambda_cr}, {"constant", f.constant},
            {"exponent", f.exponent}, {"ssr", f.ssr}, {"n", f.n}, {"in_bracket", f.in_bracket},
            {"iterations", f.iterations}, {"grad_norm", f.grad_norm}, {"window", window_json(f.window)},
            {"residuals", f.residuals}};
}

inline json curve_json(const EnergyCurve& c)
{
    json s = json::array();
    for (const auto& e : c.samples)
        s.push_back({{"lambda", e.lambda}, {"E", e.E}, {"h13", e.hn.h13}, {"h23", e.hn.h23}, {"h12", e.hn.h12},
                     {"spread", e.spread}, {"residual", e.residual}, {"flag", e.flag}});
    return {{"E_thr", c.E_thr}, {"R_list", c.R_list}, {"samples", s}};
}

inline EnergyCurve curve_from_json(const json& j)
{
    EnergyCurve c;
    c.E_thr = j.at("E_thr").get<double>();
    c.R_list = j.at("R_list").get<std::vector<double>>();
    for (const auto& e : j.at("samples")) {
        EnergySample s;
        s.lambda = e.at("lambda").get<double>();
        s.E = num(e.at("E"));
        s.hn = {num(e.at("h13")), num(e.at("h23")), num(e.at("h12"))};
        for (const auto& v : e.at("spread")) s.spread.push_back(num(v));
        s.residual = num(e.at("residual"));
        s.flag = e.at("flag").get<std::string>();
        c.samples.push_back(std::move(s));
    }
    return c;
}

inline std::string iso_now()
{
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

inline void write_text(const fs::path& p, const std::string& s)
{
    fs::create_directories(p.parent_path());
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream o(tmp, std::ios::binary);
        if (!o) throw std::runtime_error("cannot write " + tmp.string());
        o << s;
    }
    fs::rename(tmp, p);
}

} // namespace detail

// The {1,2} pair as the stages see it: the tuned profile (always available for
// the two-body checks) and the effective potential entering the three-body system.
struct PairSetup {
    PairPotential shape;     // physical separation, as configured
    PairPotential jacobi;    // in the {1,2} Jacobi variable
    RadialGrid grid;
    std::optional<ResonantPair> tuned;
    double factor = 1.0;     // effective = shape * factor
    PairPotential effective; // physical separation
};

enum class Case { A, B, C };

inline const char* case_name(Case c) { return c == Case::A ? "A" : (c == Case::B ? "B" : "C"); }

inline PairSetup pair_setup(const RunConfig& cfg)
{
    PairSetup s;
    const JacobiFrame f = jacobi_frame(cfg.masses);
    s.shape = {cfg.pot[0].terms, Pair::p12};
    s.jacobi = s.shape.in_jacobi(f.alpha);
    if (!s.shape.is_zero()) {
        s.grid = make_radial_grid(cfg.twobody_n, cfg.twobody_rmax_factor * s.jacobi.max_range());
        s.tuned = tune_resonance(s.jacobi, s.grid);
    }
    s.factor = (cfg.pot[0].tune ? s.tuned->mu_star : 1.0) * cfg.pot[0].scale;
    s.effective = s.shape.scaled(s.factor);
    return s;
}

inline ThreeBodySystem build_system(const RunConfig& cfg, const PairSetup& s)
{
    return make_system(cfg.masses, s.effective, PairPotential{cfg.pot[1].terms, Pair::p13},
                       PairPotential{cfg.pot[2].terms, Pair::p23});
}

// Threshold: exactly 0 at the tuned resonance, otherwise the pair ground energy.
inline double pair_threshold(const RunConfig& cfg, const PairSetup& s)
{
    if (s.shape.is_zero() || (cfg.pot[0].tune && cfg.pot[0].scale == 1.0)) return 0.0;
    auto e = bound_state_energy(s.jacobi, s.factor, s.grid);
    return e ? *e : 0.0;
}

inline Case classify(const RunConfig& cfg, double E_thr)
{
    if (E_thr < 0.0) return Case::C;
    if (cfg.pot[0].tune && cfg.pot[0].scale == 1.0) return Case::B;
    return Case::A;
}

// ---- stages ----

inline json stage_tune2b(const RunConfig& cfg)
{
    PairSetup s = pair_setup(cfg);
    ThreeBodySystem sys = build_system(cfg, s);
    const double E_thr = pair_threshold(cfg, s);
    json p;
    p["E_thr"] = E_thr;
    p["case"] = case_name(classify(cfg, E_thr));
    p["lambda_tilde"] = lambda_tilde(sys);
    p["pair12_effective_terms"] = detail::terms_json(s.effective.terms);
    p["pair12_factor"] = s.factor;
    if (s.tuned) {
        const ResonantPair& rp = *s.tuned;
        auto above = bound_state_energy(rp.potential, 1.0 + 1e-3, s.grid);
        auto below = bound_state_energy(rp.potential, 1.0 - 1e-3, s.grid);
        RadialGrid fine = make_radial_grid(2 * cfg.twobody_n, cfg.twobody_rmax_factor * s.jacobi.max_range());
        const double mu_fine = tune_resonance(s.jacobi, fine).mu_star;
        p["mu_star"] = rp.mu_star;
        p["a"] = rp.a;
        p["R0"] = rp.R0;
        p["resonance_check"] = {{"bound_above", above.has_value()},
                                {"energy_above", above ? json(*above) : json(nullptr)},
                                {"bound_below", below.has_value()},
                                {"ok", above.has_value() && !below.has_value()}};
        p["grid_refinement_rel"] = std::abs(mu_fine - rp.mu_star) / rp.mu_star;
    }
    return p;
}

inline json stage_curve2b(const RunConfig& cfg)
{
    PairSetup s = pair_setup(cfg);
    if (!s.tuned) throw ValidationError("curve2b: pair12 is zero");
    const ResonantPair& rp = *s.tuned;
    json p, pts = json::array();
    for (double mu : cfg.ks_mu) {
        auto e = bound_state_energy(rp.potential, mu, s.grid);
        pts.push_back({{"mu", mu}, {"e", e ? json(*e) : json(nullptr)}});
    }
    p["points"] = pts;
    KlausSimonReport ks = klaus_simon_check(rp, cfg.ks_mu);
    p["exponent"] = ks.exponent;
    p["prefactor"] = ks.prefactor;
    p["a_inv2"] = 1.0 / (rp.a * rp.a);
    p["prefactor_rel"] = std::abs(ks.prefactor * rp.a * rp.a - 1.0);
    p["rms"] = ks.rms;
    return p;
}

inline SolverContext build_context(const RunConfig& cfg, const ThreeBodySystem& sys)
{
    return make_solver_context(sys, generate_basis(sys.frame, cfg.n_scales, cfg.r_min, cfg.r_max, cfg.n_pair12),
                               cfg.filter);
}

inline json stage_scan3b(const RunConfig& cfg, const json& tune)
{
    PairSetup s = pair_setup(cfg);
    ThreeBodySystem sys = build_system(cfg, s);
    const double E_thr = tune.at("E_thr").get<double>();
    const double lt = tune.at("lambda_tilde").get<double>();
    SolverContext ctx = build_context(cfg, sys);
    Bracket br = find_lambda_cr_bracket(ctx, E_thr, cfg.bracket_tol, lt, cfg.eps_num);
    std::vector<double> lams = cfg.lambda_list;
    if (lams.empty()) lams = auto_lambda_list(ctx, E_thr, br.hi, lt, cfg.fit_floor);
    EnergyCurve c = scan_energy_curve(ctx, lams, E_thr, cfg.spread_R);
    json p;
    p["bracket"] = {{"lo", br.lo}, {"hi", br.hi}, {"E_hi", br.E_hi}, {"eps_num", br.eps_num},
                    {"evaluations", br.evaluations}, {"caveat", br.caveat}};
    p["basis_size"] = static_cast<int>(ctx.basis.size());
    p["kept"] = static_cast<int>(ctx.X.cols());
    p["curve"] = detail::curve_json(c);
    std::size_t flagged = 0;
    for (std::size_t i = 0; i < c.samples.size(); ++i) flagged += !c.ok(i);
    p["flagged"] = flagged;
    return p;
}

inline json stage_fit(const RunConfig& cfg, const json& tune, const json& scan)
{
    EnergyCurve c = detail::curve_from_json(scan.at("curve"));
    Bracket br;
    br.lo = scan.at("bracket").at("lo").get<double>();
    br.hi = scan.at("bracket").at("hi").get<double>();
    const std::string cs = tune.at("case").get<std::string>();
    const Model expected = cs == "A" ? Model::A : (cs == "B" ? Model::B : Model::C);

    FitWindow w = select_window(c, cfg.fit_floor);
    ModelRanking rk = model_selection(c, w, br);
    json p;
    p["case"] = cs;
    p["window"] = detail::window_json(w);
    json order = json::array();
    for (Model m : rk.order) order.push_back(model_name(m));
    p["ranking"] = {{"order", order}, {"aic", rk.aic}, {"margin", rk.margin},
                    {"matches_case", rk.order[0] == expected}};
    json fits;
    for (const auto& f : rk.fits) fits[model_name(f.model)] = detail::fit_json(f);
    if (cs == "B") fits["B_log"] = detail::fit_json(fit_threshold_law(c, Model::B_log, w, br));
    if (cs == "C") fits["C_free"] = detail::fit_json(fit_threshold_law(c, Model::C_free, w, br));
    p["fits"] = fits;

    // three overlapping windows, shifted by quarter decades
    json drift = json::array();
    double lmin = std::numeric_limits<double>::infinity(), lmax = -lmin;
    for (double sh : {0.0, 0.25, 0.5}) {
        json d = {{"shift", sh}};
        try {
            FitWindow ws = select_window(c, cfg.fit_floor, 8, sh);
            ScalingFit f = fit_threshold_law(c, expected, ws, br);
            d["window"] = detail::window_json(ws);
            d["lambda_cr"] = f.lambda_cr;
            d["constant"] = f.constant;
            lmin = std::min(lmin, f.lambda_cr);
            lmax = std::max(lmax, f.lambda_cr);
        } catch (const std::exception& e) {
            d["error"] = e.what();
        }
        drift.push_back(d);
    }
    p["drift"] = {{"model", model_name(expected)}, {"windows", drift},
                  {"rel_spread", std::isfinite(lmin) ? json((lmax - lmin) / lmin) : json(nullptr)}};

    if (cs == "A") {
        const auto& s0 = c.samples[w.begin];
        const double hn = s0.hn.h13 + s0.hn.h23, cA = fits["A"]["constant"].get<double>();
        p["case_A_check"] = {{"c", cA}, {"halfnorm_sum", hn}, {"lambda", s0.lambda}, {"rel", std::abs(cA / hn - 1.0)}};
    }
    if (cs == "B") {
        Theorem3Report t3 = theorem3_sequence(c, cfg.fit_floor);
        json seq = json::array();
        for (const auto& e : t3.seq)
            seq.push_back({{"lambda", e.lambda}, {"log_abs_E", e.log_abs_E}, {"product", e.product}});
        p["theorem3"] = {{"seq", seq}, {"var_last", t3.var_last}, {"var_prev", t3.var_prev},
                         {"late_mean", t3.late_mean}, {"n_last", t3.n_last}, {"n_prev", t3.n_prev}};
    }
    return p;
}

inline json stage_bs3(const RunConfig& cfg, const json& tune)
{
    json p;
    const std::string cs = tune.at("case").get<std::string>();
    if (cs == "C") {
        p["status"] = "skipped";
        p["reason"] = "pair {1,2} is bound; the zero-energy operator does not apply";
        return p;
    }
    PairSetup s = pair_setup(cfg);
    ThreeBodySystem sys = build_system(cfg, s);
    ReducedGrid3B g = default_reduced_grid(sys, cfg.bs3_np, cfg.bs3_nq, cfg.bs3_nx, cfg.bs3_nu);
    BS3Operator op(sys, g);
    BS3Estimate est = lambda_cr_from_bs(op, cfg.z_ladder);
    p["status"] = "ok";
    p["z"] = est.z;
    p["norm"] = est.norm;
    p["inv"] = est.inv;
    p["extrapolants"] = est.extrapolants;
    p["lambda_cr"] = est.lambda_cr;
    p["uncertainty"] = est.uncertainty;
    p["warnings"] = est.warnings;
    double mn = std::numeric_limits<double>::infinity();
    for (const auto& f : est.top_smallest_z.vec.f) mn = std::min(mn, f.minCoeff());
    p["top_vector_min"] = mn;
    if (cs == "B") {
        Remark3Constants r = constants_remark3(op, est.top_smallest_z.vec, *s.tuned, est.lambda_cr);
        p["remark3"] = {{"C1", r.C1}, {"C1_terms", {r.C1_terms[0], r.C1_terms[1]}}, {"C0", r.C0},
                        {"C0_literal", r.C0_literal}, {"tail_fraction", r.tail_fraction}};
    }
    return p;
}

// Tier-2 comparison of the two routes to lambda_cr and C0.
inline json cross_check(const json& scan, const json& fit, const json& bs3)
{
    json p;
    if (bs3.value("status", "") != "ok") {
        p["status"] = "skipped";
        return p;
    }
    const double lo = scan.at("bracket").at("lo").get<double>(), hi = scan.at("bracket").at("hi").get<double>();
    const double mid = 0.5 * (lo + hi), lb = bs3.at("lambda_cr").get<double>();
    p["status"] = "ok";
    p["lambda_cr_bs"] = lb;
    p["lambda_cr_bracket_mid"] = mid;
    p["lambda_rel"] = std::abs(lb / mid - 1.0);
    p["lambda_ok"] = std::abs(lb / mid - 1.0) < 0.05;
    if (bs3.contains("remark3") && fit.contains("fits") && fit["fits"].contains("B")) {
        const double cf = fit["fits"]["B"]["constant"].get<double>(), cr = bs3["remark3"]["C0"].get<double>();
        p["C0_fit"] = cf;
        p["C0_remark3"] = cr;
        p["C0_rel"] = std::abs(cr / cf - 1.0);
        p["C0_ok"] = std::abs(cr / cf - 1.0) < 0.30;
    }
    return p;
}

// ---- orchestration ----

struct StageInfo {
    std::string name, hash;
    bool cached = false;
    double seconds = 0.0;
};

class Pipeline {
public:
    Pipeline(RunConfig cfg, fs::path out, bool force) : cfg_(std::move(cfg)), out_(std::move(out)), force_(force) {}

    const std::vector<StageInfo>& log() const { return log_; }
    const fs::path& out_dir() const { return out_; }

    // Runs the stages a mode needs; always writes report.json and run_log.json.
    json run(const std::string& mode)
    {
        const std::string started = detail::iso_now();
        json report = {{"tool_version", tool_version}, {"config_hash", hash_of(cfg_.raw)}, {"mode", mode}};
        json stages = json::object();
        std::string current;
        int status = 0;
        try {
            auto need = [&](const char* m) {
                return mode == m || mode == "full" || (mode == "fit" && std::string(m) == "scan3b");
            };
            current = "tune2b";
            const json tin = {{"masses", cfg_.raw["masses"]}, {"potentials", cfg_.raw["potentials"]},
                              {"n_grid", cfg_.twobody_n}, {"r_max_factor", cfg_.twobody_rmax_factor}};
            json tune = stage("tune2b", tin, [&] { return stage_tune2b(cfg_); });
            const std::string th = hash_of(tin);
            stages["tune2b"] = tune;
            if (need("curve2b")) {
                current = "curve2b";
                stages["curve2b"] = stage("curve2b", {{"up", th}, {"ks_mu", cfg_.ks_mu}},
                                          [&] { return stage_curve2b(cfg_); });
            }
            json scan, fit, bs;
            const json sin = {{"up", th}, {"basis", cfg_.raw["basis"]}, {"lambda", cfg_.raw["lambda"]},
                              {"spread_R", cfg_.spread_R}};
            if (need("scan3b")) {
                current = "scan3b";
                scan = stage("scan3b", sin, [&] { return stage_scan3b(cfg_, tune); });
                stages["scan3b"] = scan;
            }
            if (need("fit")) {
                current = "fit";
                fit = stage("fit", {{"up", hash_of(sin)}, {"fit_floor", cfg_.fit_floor}},
                            [&] { return stage_fit(cfg_, tune, scan); });
                stages["fit"] = fit;
            }
            if (need("bs3")) {
                current = "bs3";
                bs = stage("bs3", {{"up", th}, {"bs3", cfg_.raw["bs3"]}}, [&] { return stage_bs3(cfg_, tune); });
                stages["bs3"] = bs;
            }
            if (mode == "full") stages["cross_check"] = cross_check(scan, fit, bs);
        } catch (const ValidationError& e) {
            report["failed_stage"] = current;
            report["error"] = e.what();
            status = 2;
        } catch (const std::exception& e) {
            report["failed_stage"] = current;
            report["error"] = e.what();
            status = 3;
        }
        report["stages"] = stages;
        status_ = status;
        detail::write_text(out_ / "report.json", report.dump(2) + "\n");
        json rl = {{"tool_version", tool_version}, {"config_hash", report["config_hash"]}, {"mode", mode},
                   {"started", started}, {"finished", detail::iso_now()}, {"exit_status", status}};
        json st = json::array();
        for (const auto& s : log_)
            st.push_back({{"stage", s.name}, {"hash", s.hash}, {"cached", s.cached}, {"seconds", s.seconds}});
        rl["stages"] = st;
        detail::write_text(out_ / "run_log.json", rl.dump(2) + "\n");
        return report;
    }

    int status() const { return status_; }

private:
    json stage(const std::string& name, const json& inputs, const std::function<json()>& compute)
    {
        StageInfo info{name, hash_of(inputs)};
        const fs::path file = out_ / "cache" / (name + "-" + info.hash + ".json");
        auto t0 = std::chrono::steady_clock::now();
        json payload;
        if (!force_ && fs::exists(file)) {
            std::ifstream in(file);
            payload = json::parse(in);
            info.cached = true;
        } else {
            // round trip so fresh and cached payloads are the same doubles
            payload = json::parse(compute().dump());
            detail::write_text(file, payload.dump() + "\n");
        }
        info.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log_.push_back(info);
        return payload;
    }

    RunConfig cfg_;
    fs::path out_;
    bool force_ = false;
    int status_ = 0;
    std::vector<StageInfo> log_;
};

// ---- CSV emission ----

inline std::string fmt(double v)
{
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline const std::vector<std::string>& plot_quantities()
{
    static const std::vector<std::string> q = {"energy_curve", "theorem3", "fit_overlay_A", "fit_overlay_B",
                                               "fit_overlay_C", "curve2b", "bs3_ladder"};
    return q;
}

inline std::string emit_plotdata(const json& report, const std::string& quantity)
{
    auto missing = [&](const std::string& what) {
        return ValidationError("emit: report has no " + what + " (run the stage first)");
    };
    const json& st = report.at("stages");
    std::ostringstream o;
    if (quantity == "energy_curve") {
        if (!st.contains("scan3b")) throw missing("scan3b stage");
        const json& c = st["scan3b"]["curve"];
        const auto R = c["R_list"].get<std::vector<double>>();
        o << "lambda,energy,halfnorm13,halfnorm23,halfnorm12";
        for (double r : R) o << ",spread_R" << fmt(r);
        o << ",flag\n";
        for (const auto& s : c["samples"]) {
            o << fmt(detail::num(s["lambda"])) << ',' << fmt(detail::num(s["E"])) << ',' << fmt(detail::num(s["h13"]))
              << ',' << fmt(detail::num(s["h23"])) << ',' << fmt(detail::num(s["h12"]));
            for (const auto& v : s["spread"]) o << ',' << fmt(detail::num(v));
            o << ',' << s["flag"].get<std::string>() << '\n';
        }
    } else if (quantity == "theorem3") {
        if (!st.contains("fit") || !st["fit"].contains("theorem3")) throw missing("theorem3 sequence");
        o << "lambda,log_abs_E,product\n";
        for (const auto& e : st["fit"]["theorem3"]["seq"])
            o << fmt(e["lambda"].get<double>()) << ',' << fmt(e["log_abs_E"].get<double>()) << ','
              << fmt(e["product"].get<double>()) << '\n';
    } else if (quantity.rfind("fit_overlay_", 0) == 0 && quantity.size() == 13) {
        const std::string m = quantity.substr(12);
        if (!st.contains("fit") || !st.contains("scan3b") || !st["fit"]["fits"].contains(m))
            throw missing("fit for model " + m);
        const json& f = st["fit"]["fits"].at(m);
        const EnergyCurve c = detail::curve_from_json(st["scan3b"]["curve"]);
        const json& w = f["window"];
        const std::size_t b = w["begin"].get<std::size_t>(), e = w["end"].get<std::size_t>();
        const double lo = w["lo"].get<double>(), hi = w["hi"].get<double>();
        o << "lambda,energy\n";
        double l0 = std::numeric_limits<double>::infinity(), l1 = -l0;
        for (std::size_t i = b; i < e && i < c.samples.size(); ++i) {
            const double y = c.E_thr - c.samples[i].E;
            if (!c.ok(i) || !(y >= lo && y < hi)) continue;
            o << fmt(c.samples[i].lambda) << ',' << fmt(c.samples[i].E) << '\n';
            l0 = std::min(l0, c.samples[i].lambda);
            l1 = std::max(l1, c.samples[i].lambda);
        }
        o << "\nlambda,model_energy\n";
        const Model mm = m == "A" ? Model::A : (m == "B" ? Model::B : Model::C);
        const double lc = detail::num(f.at("lambda_cr")), cc = detail::num(f.at("constant"));
        if (std::isfinite(l0) && lc > 0.0) {
            const int n = 200;
            for (int i = 0; i < n; ++i) {
                const double lam = l0 + (l1 - l0) * i / (n - 1);
                if (lam <= lc) continue;
                o << fmt(lam) << ',' << fmt(c.E_thr + model_value(mm, lam - lc, cc)) << '\n';
            }
        }
    } else if (quantity == "curve2b") {
        if (!st.contains("curve2b")) throw missing("curve2b stage");
        const json& c = st["curve2b"];
        const double pf = c["prefactor"].get<double>(), ex = c["exponent"].get<double>();
        o << "mu,energy,fit_energy\n";
        for (const auto& p : c["points"]) {
            const double mu = p["mu"].get<double>();
            o << fmt(mu) << ',' << fmt(detail::num(p["e"])) << ',' << fmt(-pf * std::pow(mu - 1.0, ex)) << '\n';
        }
    } else if (quantity == "bs3_ladder") {
        if (!st.contains("bs3") || st["bs3"].value("status", "") != "ok") throw missing("bs3 ladder");
        const json& b = st["bs3"];
        o << "z,norm,inv_norm\n";
        for (std::size_t i = 0; i < b["z"].size(); ++i)
            o << fmt(b["z"][i].get<double>()) << ',' << fmt(b["norm"][i].get<double>()) << ','
              << fmt(b["inv"][i].get<double>()) << '\n';
    } else {
        std::string avail;
        for (const auto& q : plot_quantities()) avail += (avail.empty() ? "" : ", ") + q;
        throw ValidationError("emit: unknown quantity '" + quantity + "'; available: " + avail);
    }
    return o.str();
}

// Writes every CSV the report can supply; returns the file names written.
inline std::vector<std::string> emit_all(const json& report, const fs::path& dir)
{
    std::vector<std::string> written;
    for (const auto& q : plot_quantities()) {
        try {
            detail::write_text(dir / (q + ".csv"), emit_plotdata(report, q));
            written.push_back(q + ".csv");
        } catch (const ValidationError&) {
        } catch (const json::exception&) {
        }
    }
    return written;
}

} // namespace thr
