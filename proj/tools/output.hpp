#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

namespace kpo::cli {

/// Shortest round-trip decimal, independent of the locale; "nan"/"inf" for
/// non-finite values.
std::string format_number(double v);

/// Writes via a temporary file in the same directory and renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);

class CsvTable {
public:
    using Cell = std::variant<double, long long, std::string>;

    explicit CsvTable(std::vector<std::string> headers) : headers_(std::move(headers)) {}

    void add(std::vector<Cell> row);
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;

private:
    std::vector<std::string> headers_;
    std::vector<std::vector<Cell>> rows_;
};

/// NaN and infinities become null.
nlohmann::ordered_json json_number(double v);

} // namespace kpo::cli
