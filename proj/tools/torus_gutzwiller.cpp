#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "torusgw/runner.hpp"

namespace {

void print_error_json(const std::string& kind, std::string message) {
    const std::string prefix = kind + ": ";
    if (message.rfind(prefix, 0) == 0) message = message.substr(prefix.size());
    auto root = torusgw::JsonValue::object();
    auto err = torusgw::JsonValue::object();
    err->set("kind", kind);
    err->set("message", message);
    root->set("error", err);
    std::fputs((root->dump() + "\n").c_str(), stdout);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Weyl quantisation on the 2-torus: spectra, periodic orbits, "
                 "trace-formula and Bohr-Sommerfeld checks"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads_flag = 0;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"spectrum", "eigenvalue CSV per N plus a degeneracy summary"},
        {"orbits", "periodic-orbit catalog JSON per energy"},
        {"trace-check", "trace formula lhs vs rhs over the N list"},
        {"bs-check", "bracketing sweep and Bohr-Sommerfeld predictions"},
        {"antiwick-compare", "anti-Wick vs Weyl operator distance per N"},
        {"poisson-check", "Poisson summation residual on the quantisation grid"},
        {"propagator", "van Vleck propagator element and trace per N"},
    };
    for (const auto& [name, desc] : commands) {
        auto* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "JSON run configuration")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--threads", threads_flag, "worker threads (overrides TG_THREADS)")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        if (code != 0) print_error_json("usage", e.what());
        return code;
    }

    try {
        std::ifstream f(config_path);
        torusgw::require(f.good(), "io", "cannot read config file " + config_path);
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(f);
        } catch (const nlohmann::json::exception& e) {
            throw torusgw::Error("usage", std::string("config: ") + e.what());
        }
        auto cfg = torusgw::parse_config(parsed);

        if (const char* env = std::getenv("TG_THREADS")) {
            char* end = nullptr;
            const long v = std::strtol(env, &end, 10);
            torusgw::require(end != env && *end == '\0' && v >= 1, "usage",
                             "TG_THREADS must be a positive integer");
            cfg.threads = static_cast<int>(v);
        }
        if (threads_flag > 0) cfg.threads = threads_flag;

        const std::string out = out_dir.empty() ? cfg.output : out_dir;
        torusgw::require(!out.empty(), "usage", "no output directory given");
        torusgw::run_command(app.get_subcommands().front()->get_name(), cfg, out);
    } catch (const torusgw::Error& e) {
        print_error_json(e.kind(), e.what());
        return 1;
    } catch (const std::exception& e) {
        print_error_json("internal", e.what());
        return 1;
    }
    return 0;
}
