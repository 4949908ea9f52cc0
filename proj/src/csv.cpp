#include "medalcast/csv.hpp"

#include "medalcast/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace medalcast {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& file,
                                    std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            if (!cur.empty())
                throw Error(ErrorCode::SchemaViolation,
                            file + ":" + std::to_string(line_no) + ": stray quote");
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (quoted)
        throw Error(ErrorCode::SchemaViolation,
                    file + ":" + std::to_string(line_no) + ": unterminated quote");
    fields.push_back(cur);
    return fields;
}

} // namespace

std::size_t CsvTable::column(const std::string& name) const {
    auto idx = find_column(name);
    if (!idx)
        throw Error(ErrorCode::SchemaViolation, file + ": missing column '" + name + "'");
    return *idx;
}

std::optional<std::size_t> CsvTable::find_column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    return std::nullopt;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.filename().string());

    CsvTable table;
    table.file = path.filename().string();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF)
            line.erase(0, 3); // UTF-8 BOM
        if (line.empty()) continue;
        auto fields = split_line(line, table.file, line_no);
        if (line_no == 1) {
            table.header = std::move(fields);
        } else {
            if (fields.size() != table.header.size())
                throw Error(ErrorCode::SchemaViolation,
                            table.file + ":" + std::to_string(line_no) + ": expected " +
                                std::to_string(table.header.size()) + " fields, got " +
                                std::to_string(fields.size()));
            table.rows.push_back(std::move(fields));
        }
    }
    if (table.header.empty())
        throw Error(ErrorCode::SchemaViolation, table.file + ": empty file");
    return table;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error(ErrorCode::MissingFile, "cannot open for writing: " + path.string());
    auto emit = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out << ',';
            out << csv_escape(fields[i]);
        }
        out << '\n';
    };
    emit(header);
    for (const auto& row : rows) emit(row);
}

long long parse_int_cell(const std::string& s, const std::string& file, std::size_t line,
                         const std::string& column) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(ErrorCode::SchemaViolation,
                    file + ":" + std::to_string(line) + ": bad integer '" + s + "' in " + column);
    return v;
}

double parse_real_cell(const std::string& s, const std::string& file, std::size_t line,
                       const std::string& column) {
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error(ErrorCode::SchemaViolation,
                    file + ":" + std::to_string(line) + ": bad number '" + s + "' in " + column);
    return v;
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

std::string string_digest(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::MissingFile, path.filename().string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return string_digest(ss.str());
}

} // namespace medalcast
