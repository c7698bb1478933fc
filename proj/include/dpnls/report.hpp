#pragma once

// Run configuration, bit-stable CSV/JSON emission and output manifests.
// Requires OpenSSL (libcrypto) for SHA-256 checksums.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include <openssl/evp.h>

#include "dpnls/branch.hpp"
#include "dpnls/errors.hpp"
#include "dpnls/spectral.hpp"

namespace dpnls {

inline constexpr const char* tool_version = "dpnls 1.0.0";
inline constexpr const char* solutions_schema = "solutions/1";
inline constexpr const char* branch_schema = "branch/1";

enum ExitCode : int { Success = 0, VerificationFailure = 1, Undecided = 2, ConfigError = 3 };

class ConfigurationError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct Tolerances {
    double ode_rel = 1e-12;
    double ode_abs = 1e-300;  ///< floor on the integrator's error scale (kept for the config schema)
    double bisect_rel = 1e-12;
    double quad_rel = 1e-8;
};

struct SpectralConfig {
    double R = 0.0;  ///< normalized truncation radius; 0 = 40/√α
    int n = 512;
    int k = 4;
    double tol_zero = 1e-6;  ///< relative to ω
};

struct RunConfig {
    double p = 2.5;
    std::optional<double> omega;
    std::vector<double> omega_list;
    std::optional<std::pair<double, double>> M_range;
    Tolerances tol;
    SpectralConfig spectral;
    std::string out_dir = "out";
    std::vector<std::string> formats{"csv", "json"};
    unsigned jobs = 1;
    double residual_tol = 1e-6;

    void validate() const {
        if (!(p > 1.0 && p < 5.0)) throw ConfigurationError("p must lie in (1, 5)");
        for (double t : {tol.ode_rel, tol.ode_abs, tol.bisect_rel, tol.quad_rel})
            if (!(t > 0.0 && t <= 1e-2)) throw ConfigurationError("tolerances must lie in (0, 1e-2]");
        if (omega && !(*omega > 0.0 && std::isfinite(*omega))) throw ConfigurationError("omega must be positive");
        for (std::size_t i = 0; i < omega_list.size(); ++i) {
            if (!(omega_list[i] > 0.0)) throw ConfigurationError("omega_list values must be positive");
            if (i > 0 && !(omega_list[i] < omega_list[i - 1])) throw ConfigurationError("omega_list must be decreasing");
        }
        if (M_range && !(M_range->first > 0.0 && M_range->second > M_range->first))
            throw ConfigurationError("M_range must be positive and ordered");
        if (spectral.n < 16 || spectral.k < 1 || spectral.k > 8 || spectral.R < 0.0 || !(spectral.tol_zero > 0.0))
            throw ConfigurationError("invalid spectral settings");
        for (const auto& f : formats)
            if (f != "csv" && f != "json") throw ConfigurationError("format must be csv or json");
        if (jobs < 1) throw ConfigurationError("jobs must be at least 1");
    }

    bool wants(const std::string& f) const { return std::find(formats.begin(), formats.end(), f) != formats.end(); }

    SolveOptions solve_options() const {
        SolveOptions o;
        o.scan.ode.rtol = tol.ode_rel;
        o.scan.jobs = jobs;
        if (M_range) {
            o.scan.M_min = M_range->first;
            o.scan.M_max = M_range->second;
        }
        o.bisect_rel = tol.bisect_rel;
        o.quad.rel_target = tol.quad_rel;
        return o;
    }

    SpectralOptions spectral_options() const {
        SpectralOptions s;
        s.n = spectral.n;
        s.k = spectral.k;
        s.tol_zero_rel = spectral.tol_zero;
        s.R = spectral.R;
        return s;
    }
};

inline nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["p"] = c.p;
    if (c.omega) j["omega"] = *c.omega;
    if (!c.omega_list.empty()) j["omega_list"] = c.omega_list;
    if (c.M_range) j["M_range"] = {c.M_range->first, c.M_range->second};
    j["tolerances"] = {{"ode_rel", c.tol.ode_rel}, {"ode_abs", c.tol.ode_abs}, {"bisect_rel", c.tol.bisect_rel},
                       {"quad_rel", c.tol.quad_rel}};
    j["spectral"] = {{"R", c.spectral.R}, {"n", c.spectral.n}, {"k", c.spectral.k}, {"tol_zero", c.spectral.tol_zero}};
    j["output"] = {{"dir", c.out_dir}, {"formats", c.formats}};
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig c;
    try {
        if (j.contains("p")) c.p = j.at("p").get<double>();
        if (j.contains("omega")) c.omega = j.at("omega").get<double>();
        if (j.contains("omega_list")) c.omega_list = j.at("omega_list").get<std::vector<double>>();
        if (j.contains("M_range")) {
            const auto v = j.at("M_range").get<std::vector<double>>();
            if (v.size() != 2) throw ConfigurationError("M_range needs two values");
            c.M_range = std::make_pair(v[0], v[1]);
        }
        if (j.contains("tolerances")) {
            const auto& t = j.at("tolerances");
            c.tol.ode_rel = t.value("ode_rel", c.tol.ode_rel);
            c.tol.ode_abs = t.value("ode_abs", c.tol.ode_abs);
            c.tol.bisect_rel = t.value("bisect_rel", c.tol.bisect_rel);
            c.tol.quad_rel = t.value("quad_rel", c.tol.quad_rel);
        }
        if (j.contains("spectral")) {
            const auto& s = j.at("spectral");
            c.spectral.R = s.value("R", c.spectral.R);
            c.spectral.n = s.value("n", c.spectral.n);
            c.spectral.k = s.value("k", c.spectral.k);
            c.spectral.tol_zero = s.value("tol_zero", c.spectral.tol_zero);
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            c.out_dir = o.value("dir", c.out_dir);
            if (o.contains("formats")) c.formats = o.at("formats").get<std::vector<std::string>>();
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigurationError(std::string("malformed configuration: ") + e.what());
    }
    return c;
}

inline RunConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigurationError("cannot read configuration " + file.string());
    try {
        return config_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigurationError(std::string("configuration is not valid JSON: ") + e.what());
    }
}

/// %.17g, the round-trip format for every floating value written to disk.
inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
    std::ostringstream os;
    for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
    return os.str();
}

inline std::string read_file(const std::filesystem::path& f) {
    std::ifstream in(f, std::ios::binary);
    if (!in) throw Error("cannot read " + f.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

/// Canonical config hash: SHA-256 of the compact JSON dump (keys sorted by nlohmann::json).
inline std::string config_hash(const RunConfig& c) { return sha256_hex(to_json(c).dump()); }

// ---------------------------------------------------------------------------------------------
// CSV

inline const std::vector<std::string>& solutions_columns() {
    static const std::vector<std::string> cols{
        "p",    "omega", "branch",  "M",       "alpha",      "beta",         "l2sq",  "lp1",       "l6",      "grad_l2sq", "E",
        "K",    "S_omega", "N_omega", "res_nehari", "res_pohozaev", "res_k", "morse_index", "lambda1", "lambda2", "gap0"};
    return cols;
}

template <class T>
std::string join(const std::vector<T>& v, const std::string& sep = ",") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += v[i];
    }
    return out;
}

/// One solutions.csv row. Spectral columns are empty when no spectrum was computed.
inline std::string solutions_row(const SolutionRecord& r, const std::optional<SpectrumSummary>& s) {
    const FunctionalSet& f = r.functionals;
    std::vector<std::string> v{fmt17(r.p),       fmt17(r.omega),   to_string(r.branch), fmt17(r.M),
                               fmt17(r.alpha),   fmt17(r.beta),    fmt17(f.l2sq),       fmt17(f.lp1),
                               fmt17(f.l6),      fmt17(f.grad_l2sq), fmt17(f.E),        fmt17(f.K),
                               fmt17(f.S_omega), fmt17(f.N_omega), fmt17(r.residuals.nehari),
                               fmt17(r.residuals.pohozaev), fmt17(r.residuals.kfun)};
    if (s) {
        v.push_back(std::to_string(s->neg_count));
        v.push_back(s->lambda.size() > 0 ? fmt17(s->lambda[0]) : "");
        v.push_back(s->lambda.size() > 1 ? fmt17(s->lambda[1]) : "");
        v.push_back(s->inconclusive ? "Inconclusive" : fmt17(s->gap0));
    } else {
        v.insert(v.end(), {"", "", "", ""});
    }
    return join(v);
}

inline std::string solutions_csv(const std::vector<SolutionRecord>& recs,
                                 const std::vector<std::optional<SpectrumSummary>>& spectra) {
    std::string out = join(solutions_columns()) + "\n";
    for (std::size_t i = 0; i < recs.size(); ++i)
        out += solutions_row(recs[i], i < spectra.size() ? spectra[i] : std::nullopt) + "\n";
    return out;
}

inline std::string branch_csv(const BranchCurve& c) {
    std::string out =
        "p,omega,branch,M,alpha,beta,l2sq,E,beta_over_sqrt_alpha,beta_log_over_sqrt_alpha,beta_over_alpha_pow,"
        "m_Mp1,omega_over_M2p6,omega_over_m_pow,omega_M2_over_logM2,omega_pow_M,slope_mass,dist_ustar,dist_talenti\n";
    for (std::size_t i = 0; i < c.points.size(); ++i) {
        const auto& r = c.points[i];
        const auto& q = c.ratios[i];
        auto opt = [](double x) { return std::isnan(x) ? std::string() : fmt17(x); };
        out += join(std::vector<std::string>{fmt17(r.p), fmt17(r.omega), to_string(c.branch), fmt17(r.M), fmt17(r.alpha),
                                             fmt17(r.beta), fmt17(r.functionals.l2sq), fmt17(r.functionals.E),
                                             fmt17(q.beta_over_sqrt_alpha), fmt17(q.beta_log_over_sqrt_alpha),
                                             fmt17(q.beta_over_alpha_pow), fmt17(q.m_Mp1), fmt17(q.omega_over_M2p6),
                                             fmt17(q.omega_over_m_pow), fmt17(q.omega_M2_over_logM2), fmt17(q.omega_pow_M),
                                             opt(q.slope_mass), opt(r.dist_ustar), opt(r.dist_talenti)}) +
               "\n";
    }
    return out;
}

/// Normalized profile sidecar: r, w, w', w'' at the nodes.
inline std::string profile_csv(const Profile& prof) {
    std::string out = "r,w,dw,ddw\n";
    for (std::size_t i = 0; i < prof.size(); ++i)
        out += fmt17(prof.r[i]) + "," + fmt17(prof.u[i]) + "," + fmt17(prof.du[i]) + "," + fmt17(prof.ddu[i]) + "\n";
    return out;
}

// ---------------------------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const SolutionRecord& r) {
    const FunctionalSet& f = r.functionals;
    nlohmann::json j{{"p", r.p},
                     {"omega", r.omega},
                     {"branch", to_string(r.branch)},
                     {"M", r.M},
                     {"M_bracket", {r.M_lo, r.M_hi}},
                     {"alpha", r.alpha},
                     {"beta", r.beta},
                     {"functionals",
                      {{"E", f.E}, {"K", f.K}, {"S_omega", f.S_omega}, {"N_omega", f.N_omega}, {"l2sq", f.l2sq},
                       {"lp1", f.lp1}, {"l6", f.l6}, {"grad_l2sq", f.grad_l2sq}}},
                     {"residuals",
                      {{"nehari", r.residuals.nehari}, {"pohozaev", r.residuals.pohozaev}, {"kfun", r.residuals.kfun},
                       {"mass_law", r.residuals.mass_law}}},
                     {"r_split", r.r_split},
                     {"tail_mismatch", r.tail_mismatch},
                     {"nodes", r.profile.size()}};
    if (r.profile.tail)
        j["tail"] = {{"c", r.profile.tail->c}, {"kappa", r.profile.tail->kappa}, {"power", r.profile.tail->power}};
    if (!std::isnan(r.dist_ustar)) j["dist_ustar"] = r.dist_ustar;
    if (!std::isnan(r.dist_talenti)) j["dist_talenti"] = r.dist_talenti;
    return j;
}

inline nlohmann::json to_json(const SpectrumSummary& s) {
    return {{"neg_count", s.neg_count},
            {"counters", {{"oscillation", s.oscillation_count}, {"inertia", s.inertia_count}}},
            {"lambda", s.lambda},
            {"gap0", s.gap0},
            {"gap_certified", s.gap_certified},
            {"inconclusive", s.inconclusive},
            {"domain", {{"R", s.R}, {"n", s.n}}},
            {"refinement", {{"lambda1", s.refinement_l1}, {"lambda2", s.refinement_l2}}},
            {"rayleigh_rel", s.rayleigh_rel},
            {"tables",
             {{"base", s.gap.lambda},
              {"doubled_grid", s.gap.lambda_fine},
              {"wider_domain", s.gap.lambda_wide},
              {"gap_change_doubled_grid", s.gap.change_fine},
              {"gap_change_wider_domain", s.gap.change_wide}}}};
}

inline nlohmann::json to_json(const AsymptoticsReport& r, double tol) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : r.samples) samples.push_back({{"omega", s.omega}, {"measured", s.measured}, {"rel_error", s.rel_error}});
    return {{"law", r.law},
            {"quantity", r.quantity},
            {"target", r.target},
            {"provenance", r.provenance},
            {"samples", samples},
            {"final_error", r.final_error},
            {"trend", r.trend},
            {"strictly_decreasing", r.strictly_decreasing},
            {"tolerance", tol},
            {"verdict", to_string(triage(r, tol))}};
}

inline nlohmann::json to_json(const FoldBracket& f) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& [w, n] : f.trace) trace.push_back({{"omega", w}, {"brackets", n}});
    return {{"omega_lo", f.omega_lo}, {"omega_hi", f.omega_hi}, {"count_lo", f.count_lo},
            {"count_hi", f.count_hi}, {"relative_width", f.omega_hi / f.omega_lo - 1.0},
            {"undecided_inner", f.undecided_inner}, {"trace", trace}};
}

inline nlohmann::json to_json(const BarrierReport& b) {
    auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
    return {{"branch", to_string(b.branch)},
            {"gamma", b.gamma},
            {"gamma_lower_bound", b.gamma_lower_bound},
            {"upper_margin", b.upper_margin},
            {"upper_margin_r", b.upper_margin_r},
            {"upper_ok", b.upper_ok()},
            {"lower_R0", b.lower_R0},
            {"lower_margin", b.lower_margin},
            {"lower_margin_r", b.lower_margin_r},
            {"lower_ok", b.lower_ok()},
            {"envelope_eps", b.envelope_eps},
            {"envelope_R", num(b.envelope_R)},
            {"envelope_margin", num(b.envelope_margin)},
            {"half_Y_R2", num(b.half_Y_R2)},
            {"half_Y_min", num(b.half_Y_min)}};
}

// ---------------------------------------------------------------------------------------------
// Output directory with manifest

class OutputDir {
public:
    OutputDir(std::filesystem::path dir, const RunConfig& cfg, std::string command)
        : dir_(std::move(dir)), cfg_(cfg), command_(std::move(command)) {
        std::filesystem::create_directories(dir_);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + (dir_ / name).string());
        out << content;
        out.close();
        files_.push_back({name, sha256_hex(content), content.size()});
    }

    void write_json(const std::string& name, const nlohmann::json& j) { write(name, j.dump(2) + "\n"); }

    /// MANIFEST.json lists every file written so far; `complete` is false for partial output.
    void finish(bool complete, int exit_code) {
        nlohmann::json files = nlohmann::json::array();
        for (const auto& f : files_) files.push_back({{"name", f.name}, {"sha256", f.sha}, {"bytes", f.bytes}});
        nlohmann::json m{{"tool_version", tool_version},
                         {"command", command_},
                         {"config", to_json(cfg_)},
                         {"config_hash", config_hash(cfg_)},
                         {"schemas", {{"solutions", solutions_schema}, {"branch", branch_schema}}},
                         {"complete", complete},
                         {"exit_code", exit_code},
                         {"files", files}};
        std::ofstream out(dir_ / "MANIFEST.json", std::ios::binary | std::ios::trunc);
        out << m.dump(2) << "\n";
    }

    const std::filesystem::path& path() const { return dir_; }

private:
    struct Entry {
        std::string name, sha;
        std::size_t bytes;
    };
    std::filesystem::path dir_;
    RunConfig cfg_;
    std::string command_;
    std::vector<Entry> files_;
};

/// Re-hash every file listed in dir/MANIFEST.json; returns the names that do not match.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
    const nlohmann::json m = nlohmann::json::parse(read_file(dir / "MANIFEST.json"));
    std::vector<std::string> bad;
    for (const auto& f : m.at("files")) {
        const std::string name = f.at("name").get<std::string>();
        std::string sha;
        try {
            sha = sha256_hex(read_file(dir / name));
        } catch (const Error&) {
            bad.push_back(name);
            continue;
        }
        if (sha != f.at("sha256").get<std::string>()) bad.push_back(name);
    }
    return bad;
}

}  // namespace dpnls
