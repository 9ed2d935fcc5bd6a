#include "run_config.hpp"

#include "kpo/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace kpo::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double plain_number(const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    if (first != last && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || first == last) {
        throw Error(ErrorCode::invalid_config, "not a number: '" + text + "'");
    }
    return v;
}

} // namespace

double parse_real(const std::string& input) {
    const std::string text = trim(input);
    const auto pos = text.find("pi");
    if (pos == std::string::npos) return plain_number(text);
    std::string coef = text.substr(0, pos);
    if (!coef.empty() && coef.back() == '*') coef.pop_back();
    double scale = 1.0;
    if (coef == "-") scale = -1.0;
    else if (!coef.empty() && coef != "+") scale = plain_number(coef);
    const std::string rest = text.substr(pos + 2);
    double den = 1.0;
    if (!rest.empty()) {
        if (rest.front() != '/') throw Error(ErrorCode::invalid_config, "cannot parse '" + text + "'");
        den = plain_number(rest.substr(1));
    }
    return scale * std::numbers::pi / den;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out;
    if (n <= 0) return out;
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
    return out;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_config, "cannot open config file " + path.string());
    RunConfig cfg;
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            std::ostringstream msg;
            msg << path.string() << ":" << number << ": expected 'key = value'";
            throw Error(ErrorCode::invalid_config, msg.str());
        }
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key.empty()) throw Error(ErrorCode::invalid_config, "empty config key");
    values_[key] = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::invalid_config, "expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string* RunConfig::raw(const std::string& key) {
    used_.insert(key);
    const auto it = values_.find(key);
    return it == values_.end() ? nullptr : &it->second;
}

double RunConfig::number(const std::string& key, double fallback) {
    const std::string* v = raw(key);
    double out = fallback;
    if (v) {
        try {
            out = parse_real(*v);
        } catch (const Error& e) {
            throw Error(ErrorCode::invalid_config, key + ": " + e.what());
        }
    }
    resolved_[key] = out;
    return out;
}

int RunConfig::integer(const std::string& key, int fallback) {
    const std::string* v = raw(key);
    int out = fallback;
    if (v) {
        const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
        if (ec != std::errc() || ptr != v->data() + v->size()) {
            throw Error(ErrorCode::invalid_config, key + ": not an integer: '" + *v + "'");
        }
    }
    resolved_[key] = out;
    return out;
}

bool RunConfig::flag(const std::string& key, bool fallback) {
    const std::string* v = raw(key);
    bool out = fallback;
    if (v) {
        if (*v == "true" || *v == "1" || *v == "yes") out = true;
        else if (*v == "false" || *v == "0" || *v == "no") out = false;
        else throw Error(ErrorCode::invalid_config, key + ": expected true/false, got '" + *v + "'");
    }
    resolved_[key] = out;
    return out;
}

std::string RunConfig::text(const std::string& key, const std::string& fallback) {
    const std::string* v = raw(key);
    const std::string out = v ? *v : fallback;
    resolved_[key] = out;
    return out;
}

std::vector<double> RunConfig::list(const std::string& key, const std::vector<double>& fallback) {
    const std::string* v = raw(key);
    std::vector<double> out = fallback;
    if (v) {
        out.clear();
        std::stringstream ss(*v);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (trim(item).empty()) continue;
            try {
                out.push_back(parse_real(item));
            } catch (const Error& e) {
                throw Error(ErrorCode::invalid_config, key + ": " + e.what());
            }
        }
    }
    resolved_[key] = out;
    return out;
}

void RunConfig::reject_unused() const {
    std::string unknown;
    for (const auto& [key, value] : values_) {
        if (!used_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    }
    if (!unknown.empty()) throw Error(ErrorCode::invalid_config, "unknown config keys for this command: " + unknown);
}

} // namespace kpo::cli
