#pragma once

#include <map>
#include <string>
#include <vector>

namespace feederplan {

std::string trim(const std::string& s);
std::vector<std::string> split(const std::string& s, char delim);
std::vector<std::string> split_ws(const std::string& s);
std::string to_lower(std::string s);

// Exact-round-trip formatting for doubles ("%.17g"), used everywhere a value
// is written to a report or data file so that emitted files are byte-stable.
std::string fmt_double(double v);

bool parse_double(const std::string& s, double& out);
bool parse_int(const std::string& s, long long& out);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// Line-oriented `key = value` config with `[section]` headers and `#`
// comments. Keys are returned as "section.key" (keys before any header get
// no prefix). Duplicate keys: last one wins.
std::map<std::string, std::string> parse_ini(const std::string& text);

// Minimal CSV: comma-separated, no quoting (none of our formats need it).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    int column(const std::string& name) const; // -1 if absent
};
CsvTable parse_csv(const std::string& text);

} // namespace feederplan
