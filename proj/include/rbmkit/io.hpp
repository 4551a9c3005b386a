#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace rbmkit::io {

using Cell = std::variant<long long, double, std::string>;

/// Column-ordered result table; CSV cells use shortest round-trip decimals and
/// the JSON mirror carries one object per row.
struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    Table() = default;
    explicit Table(std::vector<std::string> cols) : columns(std::move(cols)) {}
    void add_row(std::vector<Cell> row);
};

std::string format_cell(const Cell& c);
std::string to_csv(const Table& t);
std::string to_json(const Table& t);

/// Flat key-value configuration: `key = value` lines, '#' comments.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    void set(const std::string& key, std::string value);
    /// Sets only when absent (flags > file > defaults precedence).
    void set_default(const std::string& key, std::string value);

    std::string get_str(const std::string& key) const;
    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_num(const std::string& key, double fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    unsigned long long get_seed(const std::string& key, unsigned long long fallback) const;
    std::vector<double> get_list(const std::string& key) const;  // comma-separated

    const std::map<std::string, std::string>& entries() const { return kv_; }

    /// Throws listing every key outside the allowed set.
    void reject_unknown(const std::set<std::string>& allowed) const;

private:
    std::map<std::string, std::string> kv_;
};

/// Manifest text: resolved config plus tool version and subcommand, itself a
/// valid config file so a run can be reproduced from it directly.
std::string manifest_text(const std::string& subcommand, const Config& resolved);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

const char* version();

}  // namespace rbmkit::io
