#pragma once

#include <map>
#include <string>
#include <vector>

namespace epi {

// key = value config files: one pair per line, '#' comments, blank lines
// ignored, later keys override earlier ones. Values keep internal whitespace
// but are trimmed at both ends.
class Config {
public:
    static Config parse_file(const std::string& path);
    static Config parse_text(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    int get_int(const std::string& key, int fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    // Comma-separated list of doubles.
    std::vector<double> get_doubles(const std::string& key,
                                    const std::vector<double>& fallback) const;
    std::vector<int> get_ints(const std::string& key,
                              const std::vector<int>& fallback) const;

    const std::map<std::string, std::string>& items() const { return items_; }
    // Keys read so far; lets the CLI warn about unused keys.
    std::vector<std::string> unused_keys() const;

private:
    std::map<std::string, std::string> items_;
    mutable std::map<std::string, bool> touched_;
};

}  // namespace epi
