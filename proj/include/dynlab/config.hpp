#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dynlab/rng.hpp"

// Experiment configuration: flat key-value text with [section] tables, decimal
// numerics, no environment input. The file is the sole source of parameters;
// the seed is mandatory so every run is reproducible.

namespace dynlab {

struct ExperimentConfig {
    // experiment
    int m = 5;
    double t = 1.0;
    uint64_t seed = 0;
    bool seed_present = false;
    // field
    double c_h = 0.0;
    double alpha_u_inner = 0.25;
    double alpha_eps = 4.0;
    double stream_r_v2 = 0.0;
    double stream_eps = 7.5;
    // integrator
    double h = 1e-3;
    // delta search
    double gamma_hi = 0.03, gamma_lo = 0.008;
    int delta_candidates = 240;
    int oracle_samples = 2000;
    // scan
    double sigma_max = 1.0;
    int scan_samples = 10000;
    double psi_amp = 2.0;
    // slice
    int slice_ell = 3;
    int slice_seeds = 100;
    int slice_steps = 10000;
    double slice_amp = 0.25;
    double slice_freq = 1.25;
    int slice_rounds = 1;
    // flatness
    double flat_c = 8192.0;
    int flat_p = 1;
    int flat_n_max = 3;
    int flat_samples = 300;
    // kac
    double kac_halfwidth = 0.05;
    int kac_samples = 6000;
    // output
    std::string out_dir = "out";

    std::string canonical() const {
        std::ostringstream os;
        os.precision(17);
        os << "m=" << m << ";t=" << t << ";seed=" << seed << ";c_h=" << c_h
           << ";alpha_u_inner=" << alpha_u_inner << ";alpha_eps=" << alpha_eps
           << ";stream_r_v2=" << stream_r_v2 << ";stream_eps=" << stream_eps << ";h=" << h
           << ";gamma_hi=" << gamma_hi << ";gamma_lo=" << gamma_lo
           << ";delta_candidates=" << delta_candidates << ";oracle_samples=" << oracle_samples
           << ";sigma_max=" << sigma_max << ";scan_samples=" << scan_samples
           << ";psi_amp=" << psi_amp << ";slice_ell=" << slice_ell
           << ";slice_seeds=" << slice_seeds << ";slice_steps=" << slice_steps
           << ";slice_amp=" << slice_amp << ";slice_freq=" << slice_freq
           << ";slice_rounds=" << slice_rounds << ";flat_c=" << flat_c << ";flat_p=" << flat_p
           << ";flat_n_max=" << flat_n_max << ";flat_samples=" << flat_samples
           << ";kac_halfwidth=" << kac_halfwidth << ";kac_samples=" << kac_samples;
        return os.str();
    }

    uint64_t hash() const { return fnv1a(canonical()); }

    void validate() const {
        if (m < 5) throw std::invalid_argument("config: m >= 5 required");
        if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("config: t in (0,1]");
        double steps = t / h;
        if (std::fabs(steps - std::round(steps)) > 1e-9 * steps)
            throw std::invalid_argument("config: integrator step must divide t");
        if (!seed_present) throw std::invalid_argument("config: seed is required");
        if (!(sigma_max > 0.0 && sigma_max <= 1.0))
            throw std::invalid_argument("config: sigma_max in (0,1]");
        if (slice_ell < 1) throw std::invalid_argument("config: slice ell >= 1");
    }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

} // namespace config_detail

inline ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        auto t = config_detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[' && t.back() == ']') {
            section = t.substr(1, t.size() - 2);
            continue;
        }
        auto eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: bad line: " + t);
        std::string key = section + "." + config_detail::trim(t.substr(0, eq));
        kv[key] = config_detail::trim(t.substr(eq + 1));
    }
    auto geti = [&](const std::string& k, int& out) {
        if (kv.count(k)) out = std::stoi(kv[k]);
    };
    auto getd = [&](const std::string& k, double& out) {
        if (kv.count(k)) out = std::stod(kv[k]);
    };
    auto gets = [&](const std::string& k, std::string& out) {
        if (kv.count(k)) out = kv[k];
    };
    geti("experiment.m", cfg.m);
    getd("experiment.t", cfg.t);
    if (kv.count("experiment.seed")) {
        cfg.seed = std::stoull(kv["experiment.seed"]);
        cfg.seed_present = true;
    }
    getd("field.c_h", cfg.c_h);
    getd("field.alpha_u_inner", cfg.alpha_u_inner);
    getd("field.alpha_eps", cfg.alpha_eps);
    getd("field.stream_r_v2", cfg.stream_r_v2);
    getd("field.stream_eps", cfg.stream_eps);
    getd("integrator.h", cfg.h);
    getd("delta.gamma_hi", cfg.gamma_hi);
    getd("delta.gamma_lo", cfg.gamma_lo);
    geti("delta.candidates", cfg.delta_candidates);
    geti("delta.oracle_samples", cfg.oracle_samples);
    getd("scan.sigma_max", cfg.sigma_max);
    geti("scan.n_samples", cfg.scan_samples);
    getd("scan.psi_amp", cfg.psi_amp);
    geti("slice.ell", cfg.slice_ell);
    geti("slice.n_seeds", cfg.slice_seeds);
    geti("slice.n_steps", cfg.slice_steps);
    getd("slice.amp", cfg.slice_amp);
    getd("slice.freq", cfg.slice_freq);
    geti("slice.rounds", cfg.slice_rounds);
    getd("flatness.c", cfg.flat_c);
    geti("flatness.p", cfg.flat_p);
    geti("flatness.n_max", cfg.flat_n_max);
    geti("flatness.samples_per_shell", cfg.flat_samples);
    getd("kac.halfwidth", cfg.kac_halfwidth);
    geti("kac.samples", cfg.kac_samples);
    gets("output.dir", cfg.out_dir);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::invalid_argument("config file not found: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

inline std::string default_config_text() {
    return "[experiment]\n"
           "m = 5\n"
           "t = 1.0\n"
           "seed = 20240817\n"
           "\n"
           "[field]\n"
           "c_h = 0.0\n"
           "alpha_u_inner = 0.25\n"
           "alpha_eps = 4.0\n"
           "stream_r_v2 = 0.0\n"
           "stream_eps = 7.5\n"
           "\n"
           "[integrator]\n"
           "h = 1e-3\n"
           "\n"
           "[delta]\n"
           "gamma_hi = 0.03\n"
           "gamma_lo = 0.008\n"
           "candidates = 240\n"
           "oracle_samples = 2000\n"
           "\n"
           "[scan]\n"
           "sigma_max = 1.0\n"
           "n_samples = 10000\n"
           "psi_amp = 2.0\n"
           "\n"
           "[slice]\n"
           "ell = 3\n"
           "n_seeds = 100\n"
           "n_steps = 10000\n"
           "amp = 0.25\n"
           "freq = 1.25\n"
           "rounds = 1\n"
           "\n"
           "[flatness]\n"
           "c = 8192\n"
           "p = 1\n"
           "n_max = 3\n"
           "samples_per_shell = 300\n"
           "\n"
           "[kac]\n"
           "halfwidth = 0.05\n"
           "samples = 6000\n"
           "\n"
           "[output]\n"
           "dir = out\n";
}

} // namespace dynlab
