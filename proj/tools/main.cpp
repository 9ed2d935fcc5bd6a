#include "commands.hpp"
#include "output.hpp"

#include "kpo/error.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <map>
#include <optional>

#ifndef KPO_VERSION
#define KPO_VERSION "0.0.0"
#endif

namespace {

using kpo::cli::Context;
using json = nlohmann::ordered_json;

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int report_error(const Context* ctx, const std::string& command, const std::string& code, const std::string& message,
                 int exit_code) {
    json err{{"command", command}, {"error", code}, {"message", message}, {"exit_code", exit_code}};
    std::cerr << err.dump() << '\n';
    if (ctx) {
        try {
            kpo::cli::write_atomic(ctx->out_dir / "error.json", err.dump(2) + "\n");
        } catch (...) {
        }
    }
    return exit_code;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kerr parametric oscillator transducer simulations"};
    app.set_version_flag("--version", KPO_VERSION);
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    Context ctx;
    std::optional<std::uint64_t> seed;
    std::optional<int> fock_dim;
    std::optional<int> threads;
    std::string out_dir = "out";

    const std::vector<std::pair<std::string, kpo::cli::Command>> commands = {
        {"steady", kpo::cli::cmd_steady},       {"gap", kpo::cli::cmd_gap},
        {"sweep", kpo::cli::cmd_sweep},         {"trajectory", kpo::cli::cmd_trajectory},
        {"transduce", kpo::cli::cmd_transduce}, {"qfi", kpo::cli::cmd_qfi},
        {"husimi", kpo::cli::cmd_husimi},       {"calibrate", kpo::cli::cmd_calibrate},
    };
    const std::map<std::string, std::string> help = {
        {"steady", "steady-state observables over a detuning grid"},
        {"gap", "Liouvillian gap over detuning x two-photon drive phase"},
        {"sweep", "deterministic up/down detuning sweeps"},
        {"trajectory", "heterodyne quantum trajectories"},
        {"transduce", "full F-estimation protocol over many shots"},
        {"qfi", "steady-state quantum Fisher information"},
        {"husimi", "steady-state Husimi Q functions"},
        {"calibrate", "delta*(F) calibration from deterministic sweeps"},
    };
    std::string chosen;
    for (const auto& [name, fn] : commands) {
        CLI::App* sub = app.add_subcommand(name, help.at(name));
        sub->add_option("--config", config_path, "key = value configuration file");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
        sub->add_option("--fock-dim", fock_dim, "Fock-space truncation");
        sub->add_option("--threads", threads, "worker threads");
        sub->add_option("--set", overrides, "override a config value (key=value), repeatable");
        sub->callback([&chosen, n = name] { chosen = n; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return report_error(nullptr, chosen, "usage", e.what(), kExitConfig);
    }

    const auto start = std::chrono::steady_clock::now();
    try {
        ctx.out_dir = out_dir;
        if (!config_path.empty()) ctx.config = kpo::cli::RunConfig::load(config_path);
        for (const std::string& o : overrides) ctx.config.set_assignment(o);
        // Flags override file values; the file may also carry them.
        ctx.seed = seed ? *seed : static_cast<std::uint64_t>(ctx.config.integer("seed", 0));
        ctx.fock_dim = fock_dim ? *fock_dim : ctx.config.integer("fock_dim", 30);
        ctx.threads = threads ? *threads : ctx.config.integer("threads", 1);
        if (ctx.fock_dim < 2) throw kpo::Error(kpo::ErrorCode::invalid_space, "fock_dim must be >= 2");
        if (ctx.threads < 1) throw kpo::Error(kpo::ErrorCode::invalid_config, "threads must be >= 1");

        kpo::cli::Command fn = nullptr;
        for (const auto& [name, f] : commands) {
            if (name == chosen) fn = f;
        }
        kpo::cli::CommandOutput result = fn(ctx);

        json config = ctx.config.resolved();
        config["seed"] = ctx.seed;
        config["fock_dim"] = ctx.fock_dim;
        config["threads"] = ctx.threads;
        json summary;
        summary["command"] = chosen;
        summary["version"] = KPO_VERSION;
        summary["config"] = config;
        summary["dim_convergence"] = result.dim_convergence;
        summary["results"] = result.results;
        summary["outputs"] = result.files;
        summary["duration_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        kpo::cli::write_atomic(ctx.out_dir / (chosen + ".json"), summary.dump(2) + "\n");
        return 0;
    } catch (const kpo::Error& e) {
        return report_error(&ctx, chosen, kpo::to_string(e.code()), e.what(),
                            kpo::is_config_error(e.code()) ? kExitConfig : kExitNumerical);
    } catch (const std::exception& e) {
        return report_error(&ctx, chosen, "internal", e.what(), kExitNumerical);
    }
}
