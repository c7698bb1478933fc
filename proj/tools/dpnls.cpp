// Command-line entry point: solve, sweep, verify, spectrum, talenti, singular, fold.

#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dpnls/commands.hpp"

namespace {

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::size_t used = 0;
        const double v = std::stod(item, &used);
        if (used != item.size()) throw dpnls::ConfigurationError("not a number: " + item);
        out.push_back(v);
    }
    return out;
}

std::pair<double, double> parse_pair(const std::string& s, const char* what) {
    const auto v = parse_list(s);
    if (v.size() != 2) throw dpnls::ConfigurationError(std::string(what) + " needs two comma-separated values");
    return {v[0], v[1]};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Positive radial solutions of -Δu + ωu - u^p - u^5 = 0 in R^3"};
    app.require_subcommand(1);

    std::string config_file, omega_list, m_range, fold_window, formats;
    std::optional<double> p, omega, tol_ode_rel, tol_ode_abs, tol_bisect_rel, tol_quad_rel, spec_R, spec_tol_zero;
    std::optional<int> spec_n, spec_k;
    std::optional<unsigned> jobs;
    std::optional<std::string> out_dir;
    std::vector<double> qs;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_file, "JSON configuration file");
        sub->add_option("--p", p, "exponent p in (1, 5)");
        sub->add_option("--omega", omega, "frequency ω > 0");
        sub->add_option("--omega-list", omega_list, "decreasing comma-separated ω values");
        sub->add_option("--m-range", m_range, "amplitude scan range lo,hi");
        sub->add_option("--tol-ode-rel", tol_ode_rel);
        sub->add_option("--tol-ode-abs", tol_ode_abs);
        sub->add_option("--tol-bisect-rel", tol_bisect_rel);
        sub->add_option("--tol-quad-rel", tol_quad_rel);
        sub->add_option("--spec-R", spec_R, "normalized truncation radius (0 = 40/sqrt(alpha))");
        sub->add_option("--spec-n", spec_n, "spectral degrees of freedom");
        sub->add_option("--spec-k", spec_k, "eigenvalues to report (<= 8)");
        sub->add_option("--spec-tol-zero", spec_tol_zero, "zero threshold relative to ω");
        sub->add_option("--jobs", jobs, "worker threads");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--format", formats, "csv, json or csv,json");
    };
    auto* solve = app.add_subcommand("solve", "all positive solutions at one ω");
    auto* sweep = app.add_subcommand("sweep", "both branches over an ω list");
    auto* verify = app.add_subcommand("verify", "sweep plus asymptotic laws, slopes, barriers");
    auto* spectrum = app.add_subcommand("spectrum", "solutions and linearized spectra at one ω");
    auto* fold = app.add_subcommand("fold", "bracket the fold frequency");
    for (auto* s : {solve, sweep, verify, spectrum, fold}) common(s);
    fold->add_option("--omega-window", fold_window, "lo,hi with solutions at lo and none at hi");
    auto* talenti = app.add_subcommand("talenti", "closed-form L^q norms of W");
    talenti->add_option("q", qs, "exponents q > 3")->required();
    auto* singular = app.add_subcommand("singular", "V(0) and theta0 of the singular limit equation");
    singular->add_option("--p", p, "exponent p in (1, 2)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : dpnls::ConfigError;
    }

    try {
        if (talenti->parsed()) return dpnls::cmd_talenti(qs, std::cout);
        if (singular->parsed()) return dpnls::cmd_singular(*p, std::cout);

        dpnls::RunConfig cfg = config_file.empty() ? dpnls::RunConfig{} : dpnls::load_config(config_file);
        if (p) cfg.p = *p;
        if (omega) cfg.omega = *omega;
        if (!omega_list.empty()) cfg.omega_list = parse_list(omega_list);
        if (!m_range.empty()) cfg.M_range = parse_pair(m_range, "--m-range");
        if (tol_ode_rel) cfg.tol.ode_rel = *tol_ode_rel;
        if (tol_ode_abs) cfg.tol.ode_abs = *tol_ode_abs;
        if (tol_bisect_rel) cfg.tol.bisect_rel = *tol_bisect_rel;
        if (tol_quad_rel) cfg.tol.quad_rel = *tol_quad_rel;
        if (spec_R) cfg.spectral.R = *spec_R;
        if (spec_n) cfg.spectral.n = *spec_n;
        if (spec_k) cfg.spectral.k = *spec_k;
        if (spec_tol_zero) cfg.spectral.tol_zero = *spec_tol_zero;
        if (jobs) cfg.jobs = *jobs;
        if (out_dir) cfg.out_dir = *out_dir;
        if (!formats.empty()) {
            cfg.formats.clear();
            std::stringstream ss(formats);
            std::string f;
            while (std::getline(ss, f, ',')) cfg.formats.push_back(f);
        }

        if (solve->parsed()) return dpnls::cmd_solve(cfg, std::cout);
        if (spectrum->parsed()) return dpnls::cmd_spectrum(cfg, std::cout);
        if (sweep->parsed()) return dpnls::cmd_sweep(cfg, std::cout);
        if (verify->parsed()) return dpnls::cmd_verify(cfg, std::cout);
        if (fold->parsed()) {
            std::optional<std::pair<double, double>> window;
            if (!fold_window.empty()) window = parse_pair(fold_window, "--omega-window");
            return dpnls::cmd_fold(cfg, window, std::cout);
        }
    } catch (const dpnls::ConfigurationError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return dpnls::ConfigError;
    } catch (const std::invalid_argument& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return dpnls::ConfigError;
    }
    return dpnls::ConfigError;
}
