#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "core_model.hpp"

namespace thr {

using nlohmann::json;

struct PotentialSpec {
    std::vector<GaussTerm> terms;
    bool tune = false;  // rescale to the zero-energy resonance first
    double scale = 1.0; // applied after tuning
};

struct RunConfig {
    MassConfig masses;
    PotentialSpec pot[3];
    std::string mode = "full";

    int twobody_n = 400;
    double twobody_rmax_factor = 40.0;
    std::vector<double> ks_mu;

    int n_scales = 16, n_pair12 = 32;
    double r_min = 0.1, r_max = 2000.0, filter = 1e-10;

    std::vector<double> lambda_list; // empty: automatic two-stage ladder
    double bracket_tol = 1e-3, eps_num = 1e-6, fit_floor = 1e-5;
    std::vector<double> spread_R = {10.0};

    int bs3_np = 48, bs3_nq = 48, bs3_nx = 24, bs3_nu = 16;
    std::vector<double> z_ladder = {1e-2, 1e-3, 1e-4, 1e-5, 1e-6};

    std::string output = "out";
    json raw; // canonical form, used for hashing
};

inline const std::vector<std::string>& run_modes()
{
    static const std::vector<std::string> m = {"tune2b", "curve2b", "scan3b", "fit", "bs3", "full"};
    return m;
}

inline std::vector<double> default_ks_mu()
{
    std::vector<double> v;
    for (int i = 0; i < 8; ++i) v.push_back(1.0 + 1e-3 * std::pow(10.0, i / 7.0));
    return v;
}

// Documented defaults; "init" writes this.
inline json config_template()
{
    return json::parse(R"({
  "masses": {"m1": 1.0, "m2": 1.0, "m3": 1.0},
  "potentials": {
    "pair12": {"terms": [[1.0, 1.0]], "tune": true, "scale": 1.0},
    "pair13": {"terms": [[1.0, 1.0]]},
    "pair23": {"terms": [[1.0, 1.0]]}
  },
  "mode": "full",
  "twobody": {"n_grid": 400, "r_max_factor": 40.0,
              "ks_mu": [1.001, 1.0013895, 1.0019307, 1.0026827, 1.0037276, 1.0051795, 1.0071969, 1.01]},
  "basis": {"n_scales": 16, "n_pair12": 32, "r_min": 0.1, "r_max": 2000.0, "filter": 1e-10},
  "lambda": {"list": [], "bracket_tol": 1e-3, "eps_num": 1e-6, "fit_floor": 1e-5},
  "spread_R": [10.0],
  "bs3": {"np": 48, "nq": 48, "nx": 24, "nu": 16, "z_ladder": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]},
  "output": "out"
})");
}

inline std::string config_template_text()
{
    std::ostringstream s;
    s << "// thr3 run configuration. Comments are allowed; all keys optional.\n"
         "// masses: particle masses (hbar = 1, H0 = -Lap_x - Lap_y).\n"
         "// potentials.pairIJ.terms: list of [depth >= 0, range > 0], V(r) = -sum depth exp(-r^2/range^2).\n"
         "// potentials.pair12.tune: rescale pair12 to its zero-energy resonance, then multiply by scale\n"
         "//   (scale < 1: unbound pair, case A; 1: resonance, case B; > 1: bound pair, case C).\n"
         "// twobody: radial Nystrom grid (n_grid nodes on (0, r_max_factor * range]); ks_mu: couplings for e(mu).\n"
         "// basis: correlated Gaussian width ladders (n_scales per direction, n_pair12 along x in the {1,2}\n"
         "//   arrangement), widths in [r_min, r_max]; filter: relative overlap-eigenvalue cutoff.\n"
         "// lambda.list: explicit lambdas (empty: automatic ladder above the bisection bracket);\n"
         "//   bracket_tol: bracket width; eps_num: binding margin; fit_floor: smallest trusted |E - E_thr|.\n"
         "// spread_R: radii for the hyperradial probability P(R).\n"
         "// bs3: momentum grids (np pair, nq spectator, nx frame-change angles, nu test angles) and z ladder.\n"
         "// mode: tune2b | curve2b | scan3b | fit | bs3 | full.\n";
    s << config_template().dump(2) << "\n";
    return s.str();
}

namespace detail {

inline std::vector<GaussTerm> parse_terms(const json& j, const std::string& who)
{
    std::vector<GaussTerm> t;
    if (!j.is_array()) throw ValidationError(who + ".terms must be a list of [depth, range]");
    for (const auto& e : j) {
        if (!e.is_array() || e.size() != 2) throw ValidationError(who + ".terms entries must be [depth, range]");
        t.push_back({e[0].get<double>(), e[1].get<double>()});
    }
    return t;
}

template <class T>
void get_if(const json& j, const char* key, T& v)
{
    if (j.contains(key)) v = j.at(key).get<T>();
}

} // namespace detail

inline RunConfig parse_config(const json& user)
{
    json j = config_template();
    j.merge_patch(user);
    RunConfig c;
    try {
        const json& m = j.at("masses");
        c.masses = {m.at("m1").get<double>(), m.at("m2").get<double>(), m.at("m3").get<double>()};
        const char* names[3] = {"pair12", "pair13", "pair23"};
        for (int k = 0; k < 3; ++k) {
            const json& p = j.at("potentials").at(names[k]);
            c.pot[k].terms = detail::parse_terms(p.at("terms"), names[k]);
            detail::get_if(p, "tune", c.pot[k].tune);
            detail::get_if(p, "scale", c.pot[k].scale);
        }
        c.mode = j.at("mode").get<std::string>();
        const json& tb = j.at("twobody");
        detail::get_if(tb, "n_grid", c.twobody_n);
        detail::get_if(tb, "r_max_factor", c.twobody_rmax_factor);
        detail::get_if(tb, "ks_mu", c.ks_mu);
        const json& b = j.at("basis");
        detail::get_if(b, "n_scales", c.n_scales);
        detail::get_if(b, "n_pair12", c.n_pair12);
        detail::get_if(b, "r_min", c.r_min);
        detail::get_if(b, "r_max", c.r_max);
        detail::get_if(b, "filter", c.filter);
        const json& l = j.at("lambda");
        detail::get_if(l, "list", c.lambda_list);
        detail::get_if(l, "bracket_tol", c.bracket_tol);
        detail::get_if(l, "eps_num", c.eps_num);
        detail::get_if(l, "fit_floor", c.fit_floor);
        detail::get_if(j, "spread_R", c.spread_R);
        const json& s = j.at("bs3");
        detail::get_if(s, "np", c.bs3_np);
        detail::get_if(s, "nq", c.bs3_nq);
        detail::get_if(s, "nx", c.bs3_nx);
        detail::get_if(s, "nu", c.bs3_nu);
        detail::get_if(s, "z_ladder", c.z_ladder);
        detail::get_if(j, "output", c.output);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }

    c.masses.validate();
    const char* names[3] = {"pair12", "pair13", "pair23"};
    for (int k = 0; k < 3; ++k) {
        PairPotential p{c.pot[k].terms, static_cast<Pair>(k)};
        p.validate();
        if (!(c.pot[k].scale >= 0.0)) throw ValidationError(std::string(names[k]) + ": scale must be >= 0");
        if (c.pot[k].tune && p.is_zero()) throw ValidationError(std::string(names[k]) + ": cannot tune a zero potential");
    }
    if (std::find(run_modes().begin(), run_modes().end(), c.mode) == run_modes().end())
        throw ValidationError("config: unknown mode '" + c.mode + "'");
    for (std::size_t i = 0; i < c.lambda_list.size(); ++i) {
        if (!(c.lambda_list[i] > 0.0)) throw ValidationError("lambda.list: values must be positive");
        if (i && !(c.lambda_list[i] > c.lambda_list[i - 1])) throw ValidationError("lambda.list: values must be increasing");
    }
    if (c.twobody_n < 8 || !(c.twobody_rmax_factor > 0.0)) throw ValidationError("twobody: bad grid");
    if (c.ks_mu.empty()) c.ks_mu = default_ks_mu();
    if (c.n_scales < 1 || c.n_pair12 < 1 || !(c.r_min > 0.0) || !(c.r_max > c.r_min))
        throw ValidationError("basis: need n_scales, n_pair12 >= 1 and 0 < r_min < r_max");
    if (!(c.bracket_tol > 0.0) || !(c.eps_num > 0.0) || !(c.fit_floor > 0.0))
        throw ValidationError("lambda: tolerances must be positive");
    for (double R : c.spread_R)
        if (!(R > 0.0)) throw ValidationError("spread_R: radii must be positive");
    c.raw = j;
    return c;
}

// Accepts // line comments (the "init" template has them).
inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str(), nullptr, true, true);
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config: ") + e.what());
    }
    return parse_config(j);
}

} // namespace thr
