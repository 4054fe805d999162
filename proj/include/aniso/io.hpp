#pragma once

#include "aniso/errors.hpp"
#include "aniso/grid.hpp"
#include "aniso/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace aniso {

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Strict decimal parse; the whole string must be consumed.
inline std::optional<double> parse_double(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty())
        return std::nullopt;
    const char* first = t.data();
    if (*first == '+')
        ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), v, std::chars_format::general);
    if (ec != std::errc() || ptr != t.data() + t.size())
        return std::nullopt;
    return v;
}

inline std::optional<long> parse_long(const std::string& s) {
    const std::string t = trim(s);
    if (t.empty())
        return std::nullopt;
    long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size())
        return std::nullopt;
    return v;
}

/// Shortest round-trip formatting, locale independent.
inline std::string fmt(double v) {
    char buf[40];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

} // namespace detail

/**
 * Flat "key = value" configuration. Lines starting with '#' are comments.
 * Later assignments (and command-line overrides) replace earlier ones.
 */
class KeyValueConfig {
  public:
    KeyValueConfig() = default;

    static KeyValueConfig from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in)
            throw IoError("cannot open config file: " + path);
        KeyValueConfig c;
        c.base_dir_ = std::filesystem::absolute(path).parent_path().string();
        std::string line;
        long lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string t = detail::trim(line);
            if (t.empty() || t.front() == '#')
                continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
            const std::string key = detail::trim(t.substr(0, eq));
            if (key.empty())
                throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
            c.values_[key] = detail::trim(t.substr(eq + 1));
        }
        return c;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = detail::trim(value); }

    /// Applies "key=value".
    void apply_override(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || detail::trim(kv.substr(0, eq)).empty())
            throw ConfigError("override must have the form key=value: " + kv);
        set(detail::trim(kv.substr(0, eq)), kv.substr(eq + 1));
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return values_; }
    const std::string& base_dir() const { return base_dir_; }
    void set_base_dir(std::string d) { base_dir_ = std::move(d); }

    std::string get_string(const std::string& key, const std::string& def) const {
        const auto it = values_.find(key);
        return it == values_.end() ? def : it->second;
    }

    double get_double(const std::string& key, double def) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return def;
        const auto v = detail::parse_double(it->second);
        if (!v)
            throw ConfigError("key '" + key + "': not a decimal number: " + it->second);
        return *v;
    }

    long get_long(const std::string& key, long def) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return def;
        const auto v = detail::parse_long(it->second);
        if (!v)
            throw ConfigError("key '" + key + "': not an integer: " + it->second);
        return *v;
    }

    int get_int(const std::string& key, int def) const {
        const long v = get_long(key, def);
        if (v < -2147483647L || v > 2147483647L)
            throw ConfigError("key '" + key + "': integer out of range");
        return static_cast<int>(v);
    }

    bool get_bool(const std::string& key, bool def) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return def;
        const std::string& v = it->second;
        if (v == "1" || v == "true" || v == "yes" || v == "on")
            return true;
        if (v == "0" || v == "false" || v == "no" || v == "off")
            return false;
        throw ConfigError("key '" + key + "': not a boolean: " + v);
    }

    /// Comma-separated list of decimals.
    std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) const {
        const auto it = values_.find(key);
        if (it == values_.end())
            return def;
        std::vector<double> out;
        std::string item;
        std::istringstream ss(it->second);
        while (std::getline(ss, item, ',')) {
            const auto v = detail::parse_double(item);
            if (!v)
                throw ConfigError("key '" + key + "': not a decimal number: " + item);
            out.push_back(*v);
        }
        if (out.empty())
            throw ConfigError("key '" + key + "': empty list");
        return out;
    }

    /// Relative paths resolve against the directory of the config file.
    std::string get_path(const std::string& key, const std::string& def) const {
        const std::string p = get_string(key, def);
        if (p.empty())
            return p;
        return resolve(p);
    }

    std::string resolve(const std::string& p) const {
        const std::filesystem::path fp(p);
        if (fp.is_absolute() || base_dir_.empty())
            return fp.string();
        return (std::filesystem::path(base_dir_) / fp).lexically_normal().string();
    }

    /// Rejects keys outside `allowed`.
    void check_known(const std::set<std::string>& allowed) const {
        for (const auto& [k, v] : values_)
            if (!allowed.count(k))
                throw ConfigError("unknown config key: " + k);
    }

  private:
    std::map<std::string, std::string> values_;
    std::string base_dir_;
};

/// Text file writer that throws IoError on any failure.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::string& header) : path_(path), out_(path) {
        if (!out_)
            throw IoError("cannot write file: " + path);
        out_ << header << '\n';
    }

    template <class... T>
    void row(const T&... cols) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_)
            throw IoError("failed writing file: " + path_);
    }

    ~CsvWriter() {
        if (out_.is_open())
            out_.close();
    }

  private:
    static std::string cell(double v) { return detail::fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(long v) { return std::to_string(v); }
    static std::string cell(std::size_t v) { return std::to_string(v); }

    std::string path_;
    std::ofstream out_;
};

inline void ensure_directory(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory " + dir + ": " + ec.message());
}

/// "i,j,x_center,y_center,rho" in row-major (i outer) order.
inline void write_density_csv(const std::string& path, const DensityField& rho) {
    CsvWriter w(path, "i,j,x_center,y_center,rho");
    const Grid2D& g = rho.grid;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j)
            w.row(i, j, g.x_center(i), g.y_center(j), rho(i, j));
    w.close();
}

/// Row j = ny/2 as "x,rho".
inline void write_cross_section_csv(const std::string& path, const DensityField& rho) {
    CsvWriter w(path, "x,rho");
    const int j = rho.grid.ny / 2;
    for (int i = 0; i < rho.grid.nx; ++i)
        w.row(rho.grid.x_center(i), rho(i, j));
    w.close();
}

/// Plain PGM (P2), 255 gray levels scaled to [0, max rho]; top image row is y = +0.5.
inline void write_pgm(const std::string& path, const DensityField& rho) {
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write file: " + path);
    const Grid2D& g = rho.grid;
    const double mx = rho.max();
    out << "P2\n" << g.nx << ' ' << g.ny << "\n255\n";
    for (int j = g.ny - 1; j >= 0; --j) {
        for (int i = 0; i < g.nx; ++i) {
            const int v = mx > 0 ? static_cast<int>(std::lround(255.0 * rho(i, j) / mx)) : 0;
            out << std::clamp(v, 0, 255) << (i + 1 == g.nx ? '\n' : ' ');
        }
    }
    out.close();
    if (!out)
        throw IoError("failed writing file: " + path);
}

inline void write_positions_csv(const std::string& path, const std::vector<Vec2>& x) {
    CsvWriter w(path, "j,x,y");
    for (std::size_t j = 0; j < x.size(); ++j)
        w.row(j, x[j].x, x[j].y);
    w.close();
}

/**
 * Run manifest in the config syntax: every effective setting as key = value,
 * followed by result lines prefixed with '#', so the file can be fed back as a config.
 */
class Manifest {
  public:
    void setting(const std::string& key, const std::string& value) { settings_.emplace_back(key, value); }
    void setting(const std::string& key, double value) { settings_.emplace_back(key, detail::fmt(value)); }
    void setting(const std::string& key, long value) { settings_.emplace_back(key, std::to_string(value)); }
    void setting(const std::string& key, int value) { settings_.emplace_back(key, std::to_string(value)); }
    void result(const std::string& key, const std::string& value) { results_.emplace_back(key, value); }
    void result(const std::string& key, double value) { results_.emplace_back(key, detail::fmt(value)); }

    void write(const std::string& path) const {
        std::ofstream out(path);
        if (!out)
            throw IoError("cannot write file: " + path);
        for (const auto& [k, v] : settings_)
            out << k << " = " << v << '\n';
        for (const auto& [k, v] : results_)
            out << "# " << k << " = " << v << '\n';
        out.close();
        if (!out)
            throw IoError("failed writing file: " + path);
    }

  private:
    std::vector<std::pair<std::string, std::string>> settings_;
    std::vector<std::pair<std::string, std::string>> results_;
};

} // namespace aniso
