#pragma once

#include <stdexcept>
#include <string>

namespace kpo {

enum class ErrorCode {
    invalid_space,
    invalid_config,
    ambiguous_steady_state,
    numerical_failure,
    trace_drift,
    no_switch,
    fit_failed,
    unnormalized_grid,
    calibration_failed,
    extrapolation,
    protocol_degraded,
    purity_violation,
    conditioning,
};

const char* to_string(ErrorCode code);

// Config-type errors map to CLI exit code 2, everything else to 3.
bool is_config_error(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace kpo
