#pragma once

#include <optional>
#include <string>
#include <vector>

namespace sph {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const; // -1 when absent
};

// Reads a comma-separated UTF-8 file with a header row. Quoted fields with
// embedded commas/quotes are handled; no type coercion happens here.
CsvTable read_csv(const std::string& path);

void write_csv(const std::string& path, const CsvTable& table);

// Locale-independent numeric parse; empty/NA/NaN-ish cells yield nullopt.
std::optional<double> parse_numeric(const std::string& cell);

// Shortest-ish fixed formatting helpers used by all report writers so output
// bytes are stable across runs.
std::string format_double(double v, int significant = 12);

} // namespace sph
