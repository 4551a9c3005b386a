#include "rbmkit/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace rbmkit::io {

const char* version() { return "0.1.0"; }

void Table::add_row(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw std::invalid_argument("row width does not match column count");
    rows.push_back(std::move(row));
}

std::string format_cell(const Cell& c) {
    if (std::holds_alternative<long long>(c)) return fmt::format("{}", std::get<long long>(c));
    if (std::holds_alternative<double>(c)) return fmt::format("{}", std::get<double>(c));
    return std::get<std::string>(c);
}

std::string to_csv(const Table& t) {
    std::string out;
    for (std::size_t j = 0; j < t.columns.size(); ++j)
        out += (j ? "," : "") + t.columns[j];
    out += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t j = 0; j < row.size(); ++j)
            out += (j ? "," : "") + format_cell(row[j]);
        out += "\n";
    }
    return out;
}

std::string to_json(const Table& t) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& row : t.rows) {
        nlohmann::ordered_json obj;
        for (std::size_t j = 0; j < row.size(); ++j) {
            const auto& c = row[j];
            if (std::holds_alternative<long long>(c))
                obj[t.columns[j]] = std::get<long long>(c);
            else if (std::holds_alternative<double>(c))
                obj[t.columns[j]] = std::get<double>(c);
            else
                obj[t.columns[j]] = std::get<std::string>(c);
        }
        arr.push_back(std::move(obj));
    }
    return arr.dump(2) + "\n";
}

namespace {
std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(
                fmt::format("config line {} is not 'key = value'", lineno));
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty())
            throw std::runtime_error(fmt::format("empty key at config line {}", lineno));
        cfg.kv_[key] = val;
    }
    return cfg;
}

Config Config::parse_file(const std::string& path) {
    return parse_string(read_text_file(path));
}

void Config::set(const std::string& key, std::string value) { kv_[key] = std::move(value); }

void Config::set_default(const std::string& key, std::string value) {
    kv_.emplace(key, std::move(value));
}

std::string Config::get_str(const std::string& key) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) throw std::runtime_error("missing required key: " + key);
    return it->second;
}

std::string Config::get_str(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double Config::get_num(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(fmt::format("key {} is not a number: {}", key, it->second));
    }
}

long long Config::get_int(const std::string& key, long long fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error(
            fmt::format("key {} is not an integer: {}", key, it->second));
    }
}

unsigned long long Config::get_seed(const std::string& key,
                                    unsigned long long fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    return std::stoull(it->second);
}

std::vector<double> Config::get_list(const std::string& key) const {
    std::vector<double> out;
    std::stringstream ss(get_str(key));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(std::stod(tok));
    }
    if (out.empty()) throw std::runtime_error("empty list for key " + key);
    return out;
}

void Config::reject_unknown(const std::set<std::string>& allowed) const {
    std::string bad;
    for (const auto& [k, v] : kv_)
        if (!allowed.count(k)) bad += (bad.empty() ? "" : ", ") + k;
    if (!bad.empty()) throw std::runtime_error("unknown config keys: " + bad);
}

std::string manifest_text(const std::string& subcommand, const Config& resolved) {
    std::string out = "# rbmkit run manifest\n";
    out += fmt::format("version = {}\n", version());
    out += fmt::format("subcommand = {}\n", subcommand);
    for (const auto& [k, v] : resolved.entries()) {
        if (k == "version" || k == "subcommand") continue;
        out += fmt::format("{} = {}\n", k, v);
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << text;
}

std::string read_text_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace rbmkit::io
