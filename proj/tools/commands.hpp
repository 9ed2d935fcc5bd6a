#pragma once

#include "run_config.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace kpo::cli {

struct Context {
    RunConfig config;
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 0;
    int threads = 1;
    int fock_dim = 30;
};

struct CommandOutput {
    nlohmann::ordered_json results = nlohmann::ordered_json::object();
    nlohmann::ordered_json dim_convergence = nlohmann::ordered_json::object();
    std::vector<std::string> files;
};

using Command = CommandOutput (*)(Context&);

CommandOutput cmd_steady(Context& ctx);
CommandOutput cmd_gap(Context& ctx);
CommandOutput cmd_sweep(Context& ctx);
CommandOutput cmd_trajectory(Context& ctx);
CommandOutput cmd_transduce(Context& ctx);
CommandOutput cmd_qfi(Context& ctx);
CommandOutput cmd_husimi(Context& ctx);
CommandOutput cmd_calibrate(Context& ctx);

} // namespace kpo::cli
