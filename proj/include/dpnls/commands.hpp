#pragma once

// Command implementations shared by the CLI and the tests. Each writes into cfg.out_dir (with a
// MANIFEST.json) and returns the process exit code.

#include <ostream>
#include <sstream>

#include "dpnls/branch.hpp"
#include "dpnls/reference.hpp"
#include "dpnls/report.hpp"
#include "dpnls/spectral.hpp"

namespace dpnls {

/// Final-error tolerance per law: 10% for power laws, generous for the logarithmic ones.
inline double law_tolerance(Law l) { return (l == Law::B || l == Law::E) ? 0.5 : 0.1; }

namespace detail {

inline int worse(int a, int b) {
    // 1 (failure) outranks 2 (undecided), which outranks 0.
    auto rank = [](int c) { return c == 1 ? 2 : (c == 2 ? 1 : 0); };
    return rank(a) >= rank(b) ? a : b;
}

inline std::vector<double> omega_list_or_default(const RunConfig& cfg) {
    if (!cfg.omega_list.empty()) return cfg.omega_list;
    return geometric_omegas(1e-2, 1e-6);
}

struct SolvedSet {
    SolveResult res;
    std::vector<std::optional<SpectrumSummary>> spectra;
    std::vector<std::string> spectral_errors;
};

inline SolvedSet solve_with_spectra(const RunConfig& cfg, double omega) {
    SolvedSet s;
    s.res = find_solutions(cfg.p, omega, cfg.solve_options());
    s.spectra.resize(s.res.records.size());
    s.spectral_errors.resize(s.res.records.size());
    const SpectralOptions so = cfg.spectral_options();
    parallel_for(s.res.records.size(), cfg.jobs, [&](std::size_t i) {
        try {
            s.spectra[i] = analyze_spectrum(s.res.records[i], so);
        } catch (const Error& e) {
            s.spectral_errors[i] = e.what();
        }
    });
    return s;
}

inline int write_solved(OutputDir& out, const RunConfig& cfg, const SolvedSet& s, std::ostream& log) {
    int code = Success;
    std::ostringstream summary;
    summary << "p = " << fmt17(cfg.p) << ", omega = " << fmt17(*cfg.omega) << "\n";
    if (s.res.records.empty() && s.res.failures.empty()) summary << "no positive solutions\n";
    if (s.res.scan.has_undecided()) {
        summary << "undecided scan points: " << s.res.scan.undecided.size() << "\n";
        code = worse(code, Undecided);
    }
    for (const auto& f : s.res.failures) {
        summary << "bracket failure: " << f << "\n";
        code = worse(code, VerificationFailure);
    }
    nlohmann::json spectra = nlohmann::json::array();
    for (std::size_t i = 0; i < s.res.records.size(); ++i) {
        const SolutionRecord& r = s.res.records[i];
        const double worst = r.residuals.worst();
        summary << to_string(r.branch) << ": M = " << fmt17(r.M) << ", worst residual = " << fmt17(worst);
        if (worst > cfg.residual_tol) {
            summary << " (FAIL)";
            code = worse(code, VerificationFailure);
        }
        if (r.branch == Branch::Unclassified) code = worse(code, Undecided);
        if (s.spectra[i]) {
            summary << ", morse index = " << s.spectra[i]->neg_count;
            if (s.spectra[i]->inconclusive) {
                summary << ", gap Inconclusive";
                code = worse(code, Undecided);
            }
            nlohmann::json j = to_json(*s.spectra[i]);
            j["branch"] = to_string(r.branch);
            j["M"] = r.M;
            spectra.push_back(j);
        } else {
            summary << ", spectrum failed: " << s.spectral_errors[i];
            code = worse(code, VerificationFailure);
        }
        summary << "\n";
        const std::string tag = std::string(to_string(r.branch)) + "_" + std::to_string(i);
        if (cfg.wants("csv")) out.write("profile_" + tag + ".csv", profile_csv(r.profile));
    }
    if (cfg.wants("csv")) out.write("solutions.csv", solutions_csv(s.res.records, s.spectra));
    if (cfg.wants("json")) {
        nlohmann::json recs = nlohmann::json::array();
        for (const auto& r : s.res.records) recs.push_back(to_json(r));
        out.write_json("solutions.json", recs);
        out.write_json("spectra.json", spectra);
    }
    out.write("summary.txt", summary.str());
    log << summary.str();
    return code;
}

template <class F>
int guarded(OutputDir* out, F&& body, std::ostream& log) {
    try {
        const int code = body();
        if (out) out->finish(true, code);
        return code;
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        if (out) out->finish(false, ConfigError);
        return ConfigError;
    } catch (const InvalidArgument& e) {
        log << "invalid argument: " << e.what() << "\n";
        if (out) out->finish(false, ConfigError);
        return ConfigError;
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        if (out) out->finish(false, VerificationFailure);
        return VerificationFailure;
    }
}

}  // namespace detail

/// solutions.csv, profile sidecars, solutions.json and spectra.json for one ω.
inline int cmd_solve(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
        if (!cfg.omega) throw ConfigurationError("solve needs --omega");
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        return ConfigError;
    }
    OutputDir out(cfg.out_dir, cfg, "solve");
    return detail::guarded(&out, [&] { return detail::write_solved(out, cfg, detail::solve_with_spectra(cfg, *cfg.omega), log); }, log);
}

/// Same as solve; spectra are always computed and also printed.
inline int cmd_spectrum(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
        if (!cfg.omega) throw ConfigurationError("spectrum needs --omega");
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        return ConfigError;
    }
    OutputDir out(cfg.out_dir, cfg, "spectrum");
    return detail::guarded(&out, [&] {
        const detail::SolvedSet s = detail::solve_with_spectra(cfg, *cfg.omega);
        for (std::size_t i = 0; i < s.spectra.size(); ++i) {
            if (!s.spectra[i]) continue;
            log << to_string(s.res.records[i].branch) << " lambda:";
            for (double l : s.spectra[i]->lambda) log << " " << fmt17(l);
            log << "\n";
        }
        return detail::write_solved(out, cfg, s, log);
    }, log);
}

inline int write_sweep(OutputDir& out, const RunConfig& cfg, const SweepResult& sw) {
    if (cfg.wants("csv")) {
        out.write("branch_small.csv", branch_csv(sw.small));
        out.write("branch_large.csv", branch_csv(sw.large));
        std::vector<SolutionRecord> all;
        for (const auto* c : {&sw.small, &sw.large}) all.insert(all.end(), c->points.begin(), c->points.end());
        out.write("solutions.csv", solutions_csv(all, {}));
    }
    std::string notes;
    for (const auto& n : sw.notes) notes += n + "\n";
    out.write("sweep_notes.txt", notes);
    int code = Success;
    for (const auto* c : {&sw.small, &sw.large})
        for (const auto& r : c->points)
            if (r.residuals.worst() > cfg.residual_tol) code = VerificationFailure;
    return code;
}

/// Both branch curves over the ω list (continuation).
inline int cmd_sweep(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        return ConfigError;
    }
    OutputDir out(cfg.out_dir, cfg, "sweep");
    return detail::guarded(&out, [&] {
        SweepOptions so;
        so.solve = cfg.solve_options();
        const SweepResult sw = sweep(cfg.p, detail::omega_list_or_default(cfg), so);
        log << "small branch: " << sw.small.points.size() << " points, large branch: " << sw.large.points.size()
            << " points\n";
        return write_sweep(out, cfg, sw);
    }, log);
}

/// Sweep plus the applicable law suite, mass slope, barriers and energy window.
inline int cmd_verify(const RunConfig& cfg, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        return ConfigError;
    }
    OutputDir out(cfg.out_dir, cfg, "verify");
    return detail::guarded(&out, [&] {
        SweepOptions so;
        so.solve = cfg.solve_options();
        SweepResult sw = sweep(cfg.p, detail::omega_list_or_default(cfg), so);
        int code = write_sweep(out, cfg, sw);
        std::ostringstream table;
        table << "law           quantity                         target               final_error          verdict\n";
        nlohmann::json laws = nlohmann::json::array();
        for (Law l : applicable_laws(cfg.p)) {
            if (sw.large.points.size() < 4) {
                table << law_id(l) << ": too few Large-branch points\n";
                code = detail::worse(code, Undecided);
                continue;
            }
            const AsymptoticsReport rep = verify_law(sw.large, l);
            const Verdict v = triage(rep, law_tolerance(l));
            if (v == Verdict::Fail) code = detail::worse(code, VerificationFailure);
            char line[256];
            std::snprintf(line, sizeof line, "%-13s %-32s %-20.12g %-20.6g %s%s\n", rep.law.c_str(), rep.quantity.c_str(),
                          rep.target, rep.final_error, to_string(v), rep.trend ? "" : " (no trend)");
            table << line;
            laws.push_back(to_json(rep, law_tolerance(l)));
        }
        nlohmann::json extra;
        if (sw.large.points.size() >= 3) {
            nlohmann::json slopes = nlohmann::json::array();
            for (const auto& s : mass_slope(sw.large)) slopes.push_back({{"omega", s.omega}, {"slope", s.slope}});
            extra["large_mass_slope"] = slopes;
        }
        nlohmann::json barriers = nlohmann::json::array();
        const double e_cap = std::pow(sigma_constant(), 1.5) / 3.0;
        for (const auto* c : {&sw.small, &sw.large})
            for (const auto& r : c->points) {
                nlohmann::json b = to_json(check_barriers(r));
                b["omega"] = r.omega;
                b["E"] = r.functionals.E;
                b["E_cap"] = e_cap;
                barriers.push_back(b);
            }
        extra["barriers"] = barriers;
        out.write_json("laws.json", laws);
        out.write_json("checks.json", extra);
        out.write("verify_summary.txt", table.str());
        log << table.str();
        return code;
    }, log);
}

/// ‖W‖_q^q by the Beta closed form, with the quadrature cross-check.
inline int cmd_talenti(const std::vector<double>& qs, std::ostream& log) {
    return detail::guarded(nullptr, [&] {
        for (double q : qs) {
            const double v = talenti_lq_norm(q);
            char line[256];
            std::snprintf(line, sizeof line, "q = %g: |W|_q^q = 4pi*3sqrt(3)*B(3/2,(q-3)/2)/2 = %.15g (quadrature %.15g)\n",
                          q, v, talenti_lq_norm_quadrature(q));
            log << line;
        }
        return static_cast<int>(Success);
    }, log);
}

/// V(0), θ₀ and the start-radius stability of V(0).
inline int cmd_singular(double p, std::ostream& log) {
    return detail::guarded(nullptr, [&] {
        const auto v = solve_singular_v(p);
        ReferenceOptions half;
        half.start_radius = 0.5 * start_radius(OdeSpec{SingularVEq{p}}, v->central_value);
        const auto vh = solve_singular_v(p, half);
        char line[256];
        std::snprintf(line, sizeof line, "p = %g: V(0) = %.15g, theta0 = %.15g, V(0) with halved start radius = %.15g (rel change %.2e)\n",
                      p, v->central_value, theta0(p), vh->central_value,
                      std::abs(vh->central_value / v->central_value - 1.0));
        log << line;
        return static_cast<int>(Success);
    }, log);
}

/// Smallest decade ω above omega_lo without solutions, then bisection to 1%.
inline int cmd_fold(const RunConfig& cfg, std::optional<std::pair<double, double>> window, std::ostream& log) {
    try {
        cfg.validate();
    } catch (const ConfigurationError& e) {
        log << "configuration error: " << e.what() << "\n";
        return ConfigError;
    }
    OutputDir out(cfg.out_dir, cfg, "fold");
    return detail::guarded(&out, [&] {
        ScanOptions so = cfg.solve_options().scan;
        double lo = 1e-3, hi = 1.0;
        if (window) {
            std::tie(lo, hi) = *window;
        } else {
            while (!scan_amplitudes(cfg.p, hi, so).brackets.empty()) {
                lo = hi;
                hi *= 10.0;
                if (hi > 1e8) throw ConvergenceFailure("solutions persist up to omega = 1e8");
            }
        }
        const FoldBracket f = detect_fold(cfg.p, lo, hi, so);
        char line[256];
        std::snprintf(line, sizeof line, "fold bracket: [%.10g, %.10g], relative width %.4f, counts %d below and %d above\n",
                      f.omega_lo, f.omega_hi, f.omega_hi / f.omega_lo - 1.0, f.count_lo, f.count_hi);
        log << line;
        out.write_json("fold.json", to_json(f));
        return f.undecided_inner ? static_cast<int>(Undecided) : static_cast<int>(Success);
    }, log);
}

}  // namespace dpnls
