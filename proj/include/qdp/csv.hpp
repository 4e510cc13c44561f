#pragma once

#include <string>
#include <vector>

namespace qdp {

/// Flat table of strings with a header row. Fields containing separators,
/// quotes or line breaks are quoted RFC-4180 style.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    void add_row(std::vector<std::string> row);
    /// Column index by name, -1 when absent.
    int column(const std::string& name) const;
    bool operator==(const CsvTable&) const = default;
};

std::string to_csv(const CsvTable& table);
/// Parses text produced by to_csv (or any RFC-4180 file). Throws ConfigError when a
/// row's width differs from the header.
CsvTable parse_csv(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

/// Shortest representation that round-trips.
std::string fmt_double(double v);
double parse_double(const std::string& s);

} // namespace qdp
