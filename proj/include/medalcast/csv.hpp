#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace medalcast {

// Minimal strict CSV: UTF-8, comma separator, one header row, optional RFC-4180
// double-quote escaping. Ragged rows are schema violations.
struct CsvTable {
    std::string file;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by header name; throws SchemaViolation if absent.
    std::size_t column(const std::string& name) const;
    std::optional<std::size_t> find_column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

std::string csv_escape(const std::string& field);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Typed cell parsers; `line` is 1-based (header = line 1) for error messages.
long long parse_int_cell(const std::string& s, const std::string& file, std::size_t line,
                         const std::string& column);
double parse_real_cell(const std::string& s, const std::string& file, std::size_t line,
                       const std::string& column);

// Shortest round-trip formatting, deterministic across runs.
std::string format_double(double v);

// FNV-1a over raw file bytes, hex encoded. Used for provenance digests.
std::string file_digest(const std::filesystem::path& path);
std::string string_digest(const std::string& bytes);

} // namespace medalcast
