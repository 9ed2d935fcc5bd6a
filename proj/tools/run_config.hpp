#pragma once

// Key = value run configuration. Every value read is recorded with its
// resolved type so the JSON summary can embed exactly what the run used.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace kpo::cli {

class RunConfig {
public:
    static RunConfig load(const std::filesystem::path& path);

    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(const std::string& assignment);
    bool has(const std::string& key) const { return values_.count(key) != 0; }

    double number(const std::string& key, double fallback);
    int integer(const std::string& key, int fallback);
    bool flag(const std::string& key, bool fallback);
    std::string text(const std::string& key, const std::string& fallback);
    std::vector<double> list(const std::string& key, const std::vector<double>& fallback);

    /// Throws ErrorCode::invalid_config naming keys that were set but never read.
    void reject_unused() const;

    const nlohmann::ordered_json& resolved() const { return resolved_; }

private:
    const std::string* raw(const std::string& key);

    std::map<std::string, std::string> values_;
    std::set<std::string> used_;
    nlohmann::ordered_json resolved_ = nlohmann::ordered_json::object();
};

/// Parses a real with optional "pi" factor: "1.5", "-pi/2", "0.25*pi", "2pi".
double parse_real(const std::string& text);

/// Evenly spaced points (inclusive); n = 1 gives {lo}.
std::vector<double> linspace(double lo, double hi, int n);

} // namespace kpo::cli
