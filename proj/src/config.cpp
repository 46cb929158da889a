#include "epi/config.hpp"

#include "epi/types.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace epi {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_text(const std::string& text) {
    Config c;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw DataError("config line " + std::to_string(lineno) + ": empty key");
        c.items_[key] = value;  // later keys override earlier ones
    }
    return c;
}

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": " + std::strerror(errno));
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_text(buf.str());
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

bool Config::has(const std::string& key) const { return items_.count(key) > 0; }

std::string Config::get(const std::string& key, const std::string& fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    return it->second;
}

int Config::get_int(const std::string& key, int fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    try {
        size_t pos = 0;
        int v = std::stoi(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': '" + it->second + "' is not an integer");
    }
}

double Config::get_double(const std::string& key, double fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("");
        return v;
    } catch (const std::exception&) {
        throw DataError("config key '" + key + "': '" + it->second + "' is not a number");
    }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw DataError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<double> Config::get_doubles(const std::string& key,
                                        const std::vector<double>& fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    std::vector<double> out;
    std::istringstream is(it->second);
    std::string piece;
    while (std::getline(is, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) continue;
        try {
            size_t pos = 0;
            out.push_back(std::stod(piece, &pos));
            if (pos != piece.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw DataError("config key '" + key + "': '" + piece + "' is not a number");
        }
    }
    if (out.empty())
        throw DataError("config key '" + key + "': empty list");
    return out;
}

std::vector<int> Config::get_ints(const std::string& key,
                                  const std::vector<int>& fallback) const {
    auto it = items_.find(key);
    if (it == items_.end()) return fallback;
    touched_[key] = true;
    std::vector<int> out;
    std::istringstream is(it->second);
    std::string piece;
    while (std::getline(is, piece, ',')) {
        piece = trim(piece);
        if (piece.empty()) continue;
        try {
            size_t pos = 0;
            out.push_back(std::stoi(piece, &pos));
            if (pos != piece.size()) throw std::invalid_argument("");
        } catch (const std::exception&) {
            throw DataError("config key '" + key + "': '" + piece + "' is not an integer");
        }
    }
    if (out.empty())
        throw DataError("config key '" + key + "': empty list");
    return out;
}

std::vector<std::string> Config::unused_keys() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : items_)
        if (!touched_.count(k)) out.push_back(k);
    return out;
}

}  // namespace epi
