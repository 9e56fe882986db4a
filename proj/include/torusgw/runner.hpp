#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bohr_sommerfeld.hpp"
#include "trace_formula.hpp"

// Experiment orchestration behind the CLI: config parsing, the per-command
// drivers, and deterministic JSON/CSV emission (17 significant digits, fixed
// ordering, per-cell parallelism only).

namespace torusgw {

struct RunConfig {
    ModelSpec model;
    double ell_x = 2 * pi;
    double ell_xi = 2 * pi;
    std::vector<int> N_list;
    std::vector<double> energies;
    double rho_T = 0; // 0 = not given
    double window_r = 0.3;
    int k_max = 0; // 0 = default repetition cutoff
    bool has_E_window = false;
    std::pair<double, double> E_window{0, 0};
    std::pair<int, int> k_range{0, -1};
    double propagator_t = 0.5;
    int element_m = 0, element_n = 0;
    std::string output = "out";
    int threads = 1;
};

namespace detail_cli {

inline double num_at(const nlohmann::json& j, const char* key) {
    require(j.contains(key) && j.at(key).is_number(), "usage",
            std::string("config: field '") + key + "' must be a number");
    return j.at(key).get<double>();
}

inline const nlohmann::json& obj_at(const nlohmann::json& j, const char* key) {
    require(j.at(key).is_object(), "usage",
            std::string("config: field '") + key + "' must be an object");
    return j.at(key);
}

inline ModelSpec parse_model(const nlohmann::json& j) {
    require(j.contains("kind") && j.at("kind").is_string(), "usage",
            "config: model.kind must be a string");
    const std::string kind = j.at("kind").get<std::string>();
    ModelSpec spec;
    if (kind == "harper") spec.kind = ModelKind::harper;
    else if (kind == "kinetic_cos") spec.kind = ModelKind::kinetic_cos;
    else if (kind == "potential_only") spec.kind = ModelKind::potential_only;
    else if (kind == "shifted_parabola") spec.kind = ModelKind::shifted_parabola;
    else if (kind == "custom") spec.kind = ModelKind::custom;
    else throw Error("usage", "config: unknown model kind '" + kind + "'");

    if (j.contains("coefficients")) {
        require(j.at("coefficients").is_array(), "usage",
                "config: model.coefficients must be an array");
        for (const auto& row : j.at("coefficients")) {
            require(row.is_array() && (row.size() == 3 || row.size() == 4), "usage",
                    "config: each coefficient is [m, n, re] or [m, n, re, im]");
            FourierCoeff c;
            c.m = row.at(0).get<int>();
            c.n = row.at(1).get<int>();
            c.c = cplx(row.at(2).get<double>(),
                       row.size() == 4 ? row.at(3).get<double>() : 0.0);
            spec.coeffs.push_back(c);
        }
    }
    if (j.contains("max_m")) spec.max_m = j.at("max_m").get<int>();
    if (j.contains("max_n")) spec.max_n = j.at("max_n").get<int>();
    const bool needs_coeffs =
        spec.kind == ModelKind::potential_only || spec.kind == ModelKind::custom;
    require(!needs_coeffs || !spec.coeffs.empty(), "usage",
            "config: model kind '" + kind + "' requires coefficients");
    return spec;
}

} // namespace detail_cli

inline RunConfig parse_config(const nlohmann::json& j) {
    require(j.is_object(), "usage", "config: top level must be a JSON object");
    require(j.contains("model"), "usage", "config: missing model field");
    RunConfig cfg;
    cfg.model = detail_cli::parse_model(detail_cli::obj_at(j, "model"));

    if (j.contains("geometry")) {
        const auto& g = detail_cli::obj_at(j, "geometry");
        if (g.contains("ell_x")) cfg.ell_x = detail_cli::num_at(g, "ell_x");
        if (g.contains("ell_xi")) cfg.ell_xi = detail_cli::num_at(g, "ell_xi");
    }
    if (j.contains("N_list")) {
        require(j.at("N_list").is_array(), "usage", "config: N_list must be an array");
        for (const auto& n : j.at("N_list")) {
            require(n.is_number_integer(), "usage", "config: N_list entries must be integers");
            cfg.N_list.push_back(n.get<int>());
            require(cfg.N_list.back() >= 2, "usage", "config: N_list entries must be >= 2");
        }
    }
    if (j.contains("energies")) {
        require(j.at("energies").is_array(), "usage", "config: energies must be an array");
        for (const auto& e : j.at("energies")) {
            require(e.is_number(), "usage", "config: energies entries must be numbers");
            cfg.energies.push_back(e.get<double>());
        }
    }
    if (j.contains("rho")) cfg.rho_T = detail_cli::num_at(detail_cli::obj_at(j, "rho"), "T");
    if (j.contains("windows")) {
        const auto& w = detail_cli::obj_at(j, "windows");
        if (w.contains("r")) cfg.window_r = detail_cli::num_at(w, "r");
        if (w.contains("k_max")) cfg.k_max = w.at("k_max").get<int>();
        if (w.contains("E_window")) {
            const auto& ew = w.at("E_window");
            require(ew.is_array() && ew.size() == 2, "usage",
                    "config: windows.E_window must be [lo, hi]");
            cfg.E_window = {ew.at(0).get<double>(), ew.at(1).get<double>()};
            cfg.has_E_window = true;
        }
        if (w.contains("k_range")) {
            const auto& kr = w.at("k_range");
            require(kr.is_array() && kr.size() == 2, "usage",
                    "config: windows.k_range must be [k_lo, k_hi]");
            cfg.k_range = {kr.at(0).get<int>(), kr.at(1).get<int>()};
        }
    }
    if (j.contains("propagator")) {
        const auto& p = detail_cli::obj_at(j, "propagator");
        if (p.contains("t")) cfg.propagator_t = detail_cli::num_at(p, "t");
        if (p.contains("element")) {
            const auto& el = p.at("element");
            require(el.is_array() && el.size() == 2, "usage",
                    "config: propagator.element must be [m, n]");
            cfg.element_m = el.at(0).get<int>();
            cfg.element_n = el.at(1).get<int>();
        }
    }
    if (j.contains("output")) {
        require(j.at("output").is_string(), "usage", "config: output must be a string");
        cfg.output = j.at("output").get<std::string>();
    }
    if (j.contains("threads")) {
        require(j.at("threads").is_number_integer(), "usage",
                "config: threads must be an integer");
        cfg.threads = j.at("threads").get<int>();
        require(cfg.threads >= 1, "usage", "config: threads must be >= 1");
    }
    return cfg;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "io", "cannot open " + path.string() + " for writing");
    f << content;
    require(f.good(), "io", "write failed for " + path.string());
}

// Run fn(0..n-1) on up to `threads` workers; cells must be independent.
// Results are indexed by cell so output order never depends on scheduling.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::clamp(threads, 1, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (int i; (i = next.fetch_add(1)) < n;) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace detail_cli {

constexpr int grid_res = 128;

inline double opnorm(const Matrix& A) {
    return A.selfadjointView<Eigen::Lower>().operatorNorm();
}

inline int resolved_k_max(const RunConfig& cfg, const OrbitCatalog& cat,
                          const TestFunction& rho) {
    return cfg.k_max > 0 ? cfg.k_max : default_k_max(cat, rho);
}

} // namespace detail_cli

inline void cmd_spectrum(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.N_list.empty(), "usage", "spectrum: N_list required");
    std::vector<Spectrum> spectra(cfg.N_list.size());
    parallel_for(static_cast<int>(cfg.N_list.size()), cfg.threads, [&](int i) {
        const auto g = make_geometry(cfg.N_list[i], cfg.ell_x, cfg.ell_xi);
        spectra[i] = eigendecompose(weyl_op(build_model(cfg.model, g), g));
    });

    auto summary = JsonValue::array();
    for (std::size_t i = 0; i < cfg.N_list.size(); ++i) {
        const auto& s = spectra[i];
        write_text_file(out / ("spectrum_N" + std::to_string(cfg.N_list[i]) + ".csv"),
                        spectrum_csv(s));
        std::map<int, int> histogram;
        for (int gid = 0; gid < s.group_count(); ++gid) ++histogram[s.multiplicity(gid)];
        auto entry = JsonValue::object();
        entry->set("N", cfg.N_list[i]);
        entry->set("hbar", s.geom.hbar);
        entry->set("min", s.eigenvalues.front());
        entry->set("max", s.eigenvalues.back());
        auto hist = JsonValue::object();
        for (const auto& [mult, count] : histogram)
            hist->set(std::to_string(mult), count);
        entry->set("degeneracy_histogram", hist);
        summary->push(entry);
    }
    write_text_file(out / "spectrum_summary.json", summary->dump());
}

inline void cmd_orbits(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.energies.empty(), "usage", "orbits: energies required");
    const int N = cfg.N_list.empty() ? 2 : cfg.N_list.front();
    const auto H = build_model(cfg.model, make_geometry(N, cfg.ell_x, cfg.ell_xi));
    for (std::size_t i = 0; i < cfg.energies.size(); ++i) {
        const double E = cfg.energies[i];
        const auto rep = regular_value_check(H, E, detail_cli::grid_res);
        require(rep.regular, "near-critical",
                "orbits: E = " + fmt17(E) + " is not a regular value (min |grad H| = " +
                    fmt17(rep.min_grad_norm) + ")");
        write_text_file(out / ("orbits_" + std::to_string(i) + ".json"),
                        catalog_json(orbit_catalog(H, E, detail_cli::grid_res)));
    }
}

inline void cmd_trace_check(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.N_list.empty(), "usage", "trace-check: N_list required");
    require(!cfg.energies.empty(), "usage", "trace-check: energies required");
    require(cfg.rho_T > 0, "usage", "trace-check: rho.T required");
    const auto rho = make_test_function(cfg.rho_T);
    const bool potential = cfg.model.kind == ModelKind::potential_only;

    std::vector<Spectrum> spectra(cfg.N_list.size());
    parallel_for(static_cast<int>(cfg.N_list.size()), cfg.threads, [&](int i) {
        const auto g = make_geometry(cfg.N_list[i], cfg.ell_x, cfg.ell_xi);
        spectra[i] = eigendecompose(weyl_op(build_model(cfg.model, g), g));
    });

    const auto H0 =
        build_model(cfg.model, make_geometry(cfg.N_list.front(), cfg.ell_x, cfg.ell_xi));
    std::vector<OrbitCatalog> catalogs;
    for (double E : cfg.energies)
        catalogs.push_back(orbit_catalog(H0, E, detail_cli::grid_res));

    std::string csv = potential ? "E,N,hbar,rel_error,analytic_rel_error\n"
                                : "E,N,hbar,rel_error\n";
    for (std::size_t i = 0; i < cfg.energies.size(); ++i) {
        for (std::size_t jn = 0; jn < cfg.N_list.size(); ++jn) {
            const auto& s = spectra[jn];
            const int k_max = detail_cli::resolved_k_max(cfg, catalogs[i], rho);
            const auto rep = compare(s, catalogs[i], rho, cfg.energies[i], k_max);
            write_text_file(out / ("trace_E" + std::to_string(i) + "_N" +
                                   std::to_string(cfg.N_list[jn]) + ".json"),
                            trace_report_json(rep));
            csv += fmt17(rep.E) + ',' + std::to_string(rep.N) + ',' + fmt17(rep.hbar) +
                   ',' + fmt17(rep.rel_error);
            if (potential) {
                const auto Hn = build_model(
                    cfg.model, make_geometry(cfg.N_list[jn], cfg.ell_x, cfg.ell_xi));
                const double rhs = potential_case_rhs(Hn, rho, cfg.energies[i], k_max);
                csv += ',' + fmt17(std::abs(rep.lhs - rhs) /
                                   std::max(std::abs(rep.lhs), 1e-300));
            }
            csv += '\n';
        }
    }
    write_text_file(out / "trace_convergence.csv", csv);
}

inline void cmd_bs_check(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.N_list.empty(), "usage", "bs-check: N_list required");
    const auto H0 =
        build_model(cfg.model, make_geometry(cfg.N_list.front(), cfg.ell_x, cfg.ell_xi));

    if (!cfg.energies.empty()) {
        std::vector<OrbitCatalog> catalogs;
        for (double E : cfg.energies)
            catalogs.push_back(orbit_catalog(H0, E, detail_cli::grid_res));
        for (int N : cfg.N_list) {
            const auto g = make_geometry(N, cfg.ell_x, cfg.ell_xi);
            const auto s = eigendecompose(weyl_op(build_model(cfg.model, g), g));
            std::vector<QuantisationReport> reports;
            for (std::size_t i = 0; i < cfg.energies.size(); ++i)
                reports.push_back(bracketing_check(s, catalogs[i], cfg.energies[i],
                                                   g.hbar, cfg.window_r));
            write_text_file(out / ("bs_sweep_N" + std::to_string(N) + ".csv"),
                            sweep_csv(reports));
        }
    }

    if (cfg.has_E_window) {
        auto all = JsonValue::array();
        for (int N : cfg.N_list) {
            const auto g = make_geometry(N, cfg.ell_x, cfg.ell_xi);
            const auto H = build_model(cfg.model, g);
            const auto pred = bs_predict(H, cfg.E_window, g, cfg.k_range);
            const auto s = eigendecompose(weyl_op(H, g));
            auto entry = JsonValue::object();
            entry->set("N", N);
            entry->set("hbar", g.hbar);
            auto list = JsonValue::array();
            for (double E : pred) {
                double nearest = s.eigenvalues.front();
                for (double ev : s.eigenvalues)
                    if (std::abs(ev - E) < std::abs(nearest - E)) nearest = ev;
                auto p = JsonValue::object();
                p->set("E", E);
                p->set("nearest_eigenvalue", nearest);
                p->set("distance", std::abs(nearest - E));
                list->push(p);
            }
            entry->set("predictions", list);
            all->push(entry);
        }
        write_text_file(out / "bs_predictions.json", all->dump());
    }
}

inline void cmd_antiwick_compare(const RunConfig& cfg, const std::filesystem::path& out) {
    require(cfg.model.kind == ModelKind::harper, "usage",
            "antiwick-compare: closed forms are for the harper model");
    require(!cfg.N_list.empty(), "usage", "antiwick-compare: N_list required");

    std::string csv = "N,hbar,rel_diff\n";
    for (int N : cfg.N_list) {
        const auto g = make_geometry(N, cfg.ell_x, cfg.ell_xi);
        const auto W = weyl_op(build_model(cfg.model, g), g);
        const auto spx = anti_wick_special({{1, 0.5}, {-1, 0.5}}, Axis::x, g);
        const auto spxi = anti_wick_special({{1, 0.5}, {-1, 0.5}}, Axis::xi, g);
        const Matrix AW = spx.entries + spxi.entries;
        const double rel =
            detail_cli::opnorm(AW - W.entries) / detail_cli::opnorm(W.entries);
        csv += std::to_string(N) + ',' + fmt17(g.hbar) + ',' + fmt17(rel) + '\n';

        if (N == *std::min_element(cfg.N_list.begin(), cfg.N_list.end())) {
            if (N <= 64) {
                write_text_file(out / "harper_weyl.json", matrix_json(W));
                write_text_file(out / "harper_antiwick.json",
                                matrix_json({g, AW, "anti_wick_special"}));
            }
            if (N <= 32) {
                const auto quad = anti_wick_op(
                    [&](double x, double xi) {
                        return std::cos(2 * pi * x / g.ell_x) +
                               std::cos(2 * pi * xi / g.ell_xi);
                    },
                    g, 3, std::max(256, 8 * N));
                auto summary = JsonValue::object();
                summary->set("N", N);
                summary->set("quad_vs_special",
                             (quad.entries - AW).cwiseAbs().maxCoeff());
                write_text_file(out / "antiwick_summary.json", summary->dump());
            }
        }
    }
    write_text_file(out / "antiwick_table.csv", csv);
}

inline void cmd_poisson_check(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.N_list.empty(), "usage", "poisson-check: N_list required");
    std::string csv = "N,hbar,discrete_re,discrete_im,integral_re,integral_im,abs_error\n";
    for (int N : cfg.N_list) {
        const auto g = make_geometry(N, cfg.ell_x, cfg.ell_xi);
        const GridBump bump{g.ell_x, 4.0};
        const auto phi = [&](double t) {
            return g.ell_xi * (t + 0.3 * std::sin(2 * pi * t / g.ell_x));
        };
        const auto pc = poisson_check(bump, phi, 1, g, Axis::x);
        csv += std::to_string(N) + ',' + fmt17(g.hbar) + ',' +
               fmt17(pc.discrete_sum.real()) + ',' + fmt17(pc.discrete_sum.imag()) + ',' +
               fmt17(pc.integral.real()) + ',' + fmt17(pc.integral.imag()) + ',' +
               fmt17(pc.error) + '\n';
    }
    write_text_file(out / "poisson.csv", csv);
}

inline void cmd_propagator(const RunConfig& cfg, const std::filesystem::path& out) {
    require(!cfg.N_list.empty(), "usage", "propagator: N_list required");
    std::string csv = "N,hbar,exact_re,exact_im,semi_re,semi_im,abs_error,trace_re,trace_im\n";
    for (int N : cfg.N_list) {
        const auto g = make_geometry(N, cfg.ell_x, cfg.ell_xi);
        const auto H = build_model(cfg.model, g);
        const auto vv = van_vleck_element(H, cfg.propagator_t, cfg.element_m, cfg.element_n);
        const auto s = eigendecompose(weyl_op(H, g));
        const auto tr = propagator_trace(s, cfg.propagator_t);
        csv += std::to_string(N) + ',' + fmt17(g.hbar) + ',' + fmt17(vv.exact.real()) +
               ',' + fmt17(vv.exact.imag()) + ',' + fmt17(vv.semiclassical.real()) + ',' +
               fmt17(vv.semiclassical.imag()) + ',' + fmt17(vv.error) + ',' +
               fmt17(tr.real()) + ',' + fmt17(tr.imag()) + '\n';
    }
    write_text_file(out / "propagator.csv", csv);
}

inline void run_command(const std::string& cmd, const RunConfig& cfg,
                        const std::filesystem::path& out) {
    if (cmd == "spectrum") cmd_spectrum(cfg, out);
    else if (cmd == "orbits") cmd_orbits(cfg, out);
    else if (cmd == "trace-check") cmd_trace_check(cfg, out);
    else if (cmd == "bs-check") cmd_bs_check(cfg, out);
    else if (cmd == "antiwick-compare") cmd_antiwick_compare(cfg, out);
    else if (cmd == "poisson-check") cmd_poisson_check(cfg, out);
    else if (cmd == "propagator") cmd_propagator(cfg, out);
    else throw Error("usage", "unknown command '" + cmd + "'");
}

} // namespace torusgw
