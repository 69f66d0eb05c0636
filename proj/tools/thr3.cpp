#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "thr/config.hpp"
#include "thr/pipeline.hpp"

namespace {

void print_summary(const thr::json& report)
{
    const auto& st = report.at("stages");
    if (st.contains("tune2b")) {
        const auto& t = st["tune2b"];
        std::printf("tune2b   case %s  E_thr %.10g  lambda~ %.8f", t["case"].get<std::string>().c_str(),
                    t["E_thr"].get<double>(), t["lambda_tilde"].get<double>());
        if (t.contains("mu_star"))
            std::printf("  mu* %.10f  a %.6f  R0 %.6f  check %s", t["mu_star"].get<double>(), t["a"].get<double>(),
                        t["R0"].get<double>(), t["resonance_check"]["ok"].get<bool>() ? "ok" : "FAILED");
        std::printf("\n");
    }
    if (st.contains("curve2b")) {
        const auto& c = st["curve2b"];
        std::printf("curve2b  exponent %.4f  prefactor %.6g (a^-2 %.6g)\n", c["exponent"].get<double>(),
                    c["prefactor"].get<double>(), c["a_inv2"].get<double>());
    }
    if (st.contains("scan3b")) {
        const auto& s = st["scan3b"];
        std::printf("scan3b   bracket [%.8f, %.8f]  %zu samples, %zu flagged, basis %d\n",
                    s["bracket"]["lo"].get<double>(), s["bracket"]["hi"].get<double>(),
                    s["curve"]["samples"].size(), s["flagged"].get<std::size_t>(), s["basis_size"].get<int>());
    }
    if (st.contains("fit")) {
        const auto& f = st["fit"];
        const std::string best = f["ranking"]["order"][0].get<std::string>();
        const auto& bf = f["fits"][best];
        std::printf("fit      best %s (margin %.3g)  lambda_cr %.8f  constant %.6g\n", best.c_str(),
                    f["ranking"]["margin"].get<double>(), bf["lambda_cr"].get<double>(),
                    bf["constant"].get<double>());
    }
    if (st.contains("bs3")) {
        const auto& b = st["bs3"];
        if (b["status"] == "ok")
            std::printf("bs3      lambda_cr %.6f +- %.2g\n", b["lambda_cr"].get<double>(),
                        b["uncertainty"].get<double>());
        else
            std::printf("bs3      skipped: %s\n", b["reason"].get<std::string>().c_str());
    }
    if (st.contains("cross_check") && st["cross_check"]["status"] == "ok") {
        const auto& x = st["cross_check"];
        std::printf("cross    lambda rel %.3g", x["lambda_rel"].get<double>());
        if (x.contains("C0_rel")) std::printf("  C0 rel %.3g", x["C0_rel"].get<double>());
        std::printf("\n");
    }
    if (report.contains("error"))
        std::fprintf(stderr, "stage %s failed: %s\n", report["failed_stage"].get<std::string>().c_str(),
                     report["error"].get<std::string>().c_str());
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"thr3: three-body threshold laws"};
    app.require_subcommand(1);
    std::string config_path, out_dir;
    int threads = 0;
    bool force = false;
    app.add_option("--config", config_path, "run configuration (JSON, // comments allowed)");
    app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", threads, "Eigen threads (0: library default)")->check(CLI::NonNegativeNumber);
    app.add_flag("--force", force, "ignore the stage cache");

    std::string init_path = "thr3.json";
    auto* init = app.add_subcommand("init", "write a documented configuration template");
    init->add_option("path", init_path, "destination");

    std::vector<CLI::App*> runs;
    for (const auto& m : thr::run_modes()) runs.push_back(app.add_subcommand(m, "run mode " + m));

    std::string quantity;
    auto* emit = app.add_subcommand("emit", "write one CSV from an existing report");
    emit->add_option("quantity", quantity, "energy_curve | theorem3 | fit_overlay_A|B|C | curve2b | bs3_ladder")
        ->required();

    CLI11_PARSE(app, argc, argv);
    if (threads > 0) Eigen::setNbThreads(threads);

    try {
        if (init->parsed()) {
            std::ofstream o(init_path);
            if (!o) throw thr::ValidationError("init: cannot write " + init_path);
            o << thr::config_template_text();
            std::printf("wrote %s\n", init_path.c_str());
            return 0;
        }

        thr::RunConfig cfg = config_path.empty() ? thr::parse_config(thr::json::object()) : thr::load_config(config_path);
        const thr::fs::path out = out_dir.empty() ? thr::fs::path(cfg.output) : thr::fs::path(out_dir);

        if (emit->parsed()) {
            std::ifstream in(out / "report.json");
            if (!in) throw thr::ValidationError("emit: no report.json in " + out.string());
            const thr::json report = thr::json::parse(in);
            const thr::fs::path dst = out / (quantity + ".csv");
            thr::detail::write_text(dst, thr::emit_plotdata(report, quantity));
            std::printf("wrote %s\n", dst.string().c_str());
            return 0;
        }

        std::string mode;
        for (auto* r : runs)
            if (r->parsed()) mode = r->get_name();
        thr::Pipeline p(cfg, out, force);
        const thr::json report = p.run(mode);
        for (const auto& s : p.log())
            std::printf("[%s] %s %.1fs\n", s.cached ? "cache" : "run", s.name.c_str(), s.seconds);
        print_summary(report);
        for (const auto& f : thr::emit_all(report, out)) std::printf("wrote %s\n", (out / f).string().c_str());
        return p.status();
    } catch (const thr::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
