#ifndef PTLOC_IO_HPP
#define PTLOC_IO_HPP

#include <bit>
#include <cerrno>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ptloc/core.hpp"
#include "ptloc/momentum_state.hpp"

namespace ptloc::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------------------------
// Flat key = value configuration

enum class ValueType { integer, real, string, boolean };

inline const char* to_string(ValueType t) {
    switch (t) {
        case ValueType::integer: return "int";
        case ValueType::real: return "float";
        case ValueType::string: return "string";
        case ValueType::boolean: return "bool";
    }
    return "?";
}

struct Key {
    std::string name;
    ValueType type = ValueType::real;
    std::string fallback;
    std::string help;
};

using Schema = std::vector<Key>;

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline bool parse_int(const std::string& s, long long& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty();
}

inline bool parse_real(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && std::isfinite(out);
}

inline bool parse_bool(const std::string& s, bool& out) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return out = true, true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return out = false, true;
    return false;
}

inline bool valid_key(const std::string& k) {
    if (k.empty()) return false;
    for (char c : k)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-')) return false;
    return true;
}

}  // namespace detail

/// Entries from a `key = value` text; later assignments override earlier ones.
class Config {
public:
    static Config parse(std::string_view text, const std::string& origin = "<config>") {
        Config c;
        std::istringstream in{std::string(text)};
        std::string line;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            const auto hash = line.find('#');
            const std::string body = detail::trim(hash == std::string::npos ? line : line.substr(0, hash));
            if (body.empty()) continue;
            const auto eq = body.find('=');
            if (eq == std::string::npos)
                fail(ErrorKind::config, origin + ":" + std::to_string(no) + ": expected 'key = value'");
            c.assign(detail::trim(body.substr(0, eq)), detail::trim(body.substr(eq + 1)),
                     origin + ":" + std::to_string(no));
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream f(path, std::ios::binary);
        if (!f) fail(ErrorKind::config, "cannot read config file " + path.string());
        std::ostringstream ss;
        ss << f.rdbuf();
        return parse(ss.str(), path.string());
    }

    /// `key=value` override as given on a command line.
    void set(std::string_view assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string_view::npos)
            fail(ErrorKind::config, "override '" + std::string(assignment) + "' is not key=value");
        assign(detail::trim(assignment.substr(0, eq)), detail::trim(assignment.substr(eq + 1)), "--set");
    }

    void set(const std::string& key, const std::string& value) { assign(key, value, "api"); }

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    const std::map<std::string, std::string>& entries() const { return values_; }

    /// Fills defaults from the schema, rejects unknown keys and values that do not parse as
    /// their declared type.
    Config resolved(const Schema& schema) const {
        std::map<std::string, const Key*> known;
        for (const auto& k : schema) known[k.name] = &k;
        for (const auto& [k, v] : values_)
            if (!known.count(k)) fail(ErrorKind::config, "unknown key '" + k + "'");
        Config out;
        for (const auto& k : schema) {
            const auto it = values_.find(k.name);
            const std::string v = it == values_.end() ? k.fallback : it->second;
            out.values_[k.name] = v;
            out.types_[k.name] = k.type;
            out.check(k.name);
        }
        return out;
    }

    std::string get_string(const std::string& key) const { return lookup(key); }

    long long get_int(const std::string& key) const {
        long long v = 0;
        if (!detail::parse_int(lookup(key), v)) bad(key, "int");
        return v;
    }

    double get_real(const std::string& key) const {
        double v = 0;
        if (!detail::parse_real(lookup(key), v)) bad(key, "float");
        return v;
    }

    bool get_bool(const std::string& key) const {
        bool v = false;
        if (!detail::parse_bool(lookup(key), v)) bad(key, "bool");
        return v;
    }

    /// Comma-separated reals.
    std::vector<double> get_reals(const std::string& key) const {
        std::vector<double> out;
        std::string item;
        std::istringstream in(lookup(key));
        while (std::getline(in, item, ',')) {
            double v = 0;
            if (!detail::parse_real(detail::trim(item), v)) bad(key, "comma-separated floats");
            out.push_back(v);
        }
        if (out.empty()) bad(key, "a non-empty list");
        return out;
    }

    /// Sorted `key = value` lines; the hashed form.
    std::string canonical() const {
        std::string s;
        for (const auto& [k, v] : values_) s += k + " = " + v + "\n";
        return s;
    }

    std::uint64_t hash() const {
        std::uint64_t h = 0xcbf29ce484222325ull;
        for (unsigned char c : canonical()) {
            h ^= c;
            h *= 0x100000001b3ull;
        }
        return h;
    }

    std::string hash_hex() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
        return buf;
    }

    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, ValueType> types_;

    void assign(const std::string& key, const std::string& value, const std::string& where) {
        if (!detail::valid_key(key)) fail(ErrorKind::config, where + ": invalid key '" + key + "'");
        std::string v = value;
        if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
        values_[key] = v;
    }

    const std::string& lookup(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) fail(ErrorKind::config, "missing key '" + key + "'");
        return it->second;
    }

    [[noreturn]] void bad(const std::string& key, const char* what) const {
        fail(ErrorKind::config, "key '" + key + "' = '" + lookup(key) + "' is not " + what);
    }

    void check(const std::string& key) const {
        switch (types_.at(key)) {
            case ValueType::integer: (void)get_int(key); break;
            case ValueType::real: (void)get_real(key); break;
            case ValueType::boolean: (void)get_bool(key); break;
            case ValueType::string: break;
        }
    }
};

// ---------------------------------------------------------------------------------------------
// Output files

/// Writes to a temporary sibling, then renames over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view data) {
    namespace fs = std::filesystem;
    const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io, "cannot create directory " + dir.string() + ": " + ec.message());
    const fs::path tmp = dir / ("." + path.filename().string() + ".tmp" + std::to_string(::getpid()));
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) fail(ErrorKind::io, "cannot open " + tmp.string() + " for writing");
        f.write(data.data(), static_cast<std::streamsize>(data.size()));
        f.flush();
        if (!f) {
            fs::remove(tmp, ec);
            fail(ErrorKind::io, "write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        fail(ErrorKind::io, "cannot rename onto " + path.string() + ": " + ec.message());
    }
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) fail(ErrorKind::io, "cannot read " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

using Cell = std::variant<std::string, double, long long>;

/// %.17g: round-trips every double.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::string csv_cell(const Cell& c) {
    if (const auto* s = std::get_if<std::string>(&c)) return csv_field(*s);
    if (const auto* d = std::get_if<double>(&c)) return format_real(*d);
    return std::to_string(std::get<long long>(c));
}

/// RFC 4180: CRLF records, quoted fields where needed, header first.
inline std::string to_csv(const std::vector<std::string>& header, const std::vector<std::vector<Cell>>& rows) {
    std::string out;
    auto record = [&](const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += ',';
            out += fields[i];
        }
        out += "\r\n";
    };
    std::vector<std::string> h;
    for (const auto& x : header) h.push_back(csv_field(x));
    record(h);
    for (const auto& r : rows) {
        if (r.size() != header.size()) fail(ErrorKind::invalid_input, "CSV row width differs from header");
        std::vector<std::string> f;
        for (const auto& c : r) f.push_back(csv_cell(c));
        record(f);
    }
    return out;
}

/// Minimal RFC 4180 reader (used to check round trips).
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            any = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
            any = true;
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
            any = true;
        }
    }
    if (quoted) fail(ErrorKind::io, "unterminated quoted CSV field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

/// CSV file plus `<name>.json` sidecar carrying the config hash and metadata.
inline void write_table(const std::filesystem::path& csv_path, const std::vector<std::string>& header,
                        const std::vector<std::vector<Cell>>& rows, const Config& config, json metadata = json::object()) {
    write_atomic(csv_path, to_csv(header, rows));
    json side;
    side["file"] = csv_path.filename().string();
    side["config_hash"] = config.hash_hex();
    side["config"] = config.to_json();
    side["columns"] = header;
    side["rows"] = rows.size();
    side["metadata"] = std::move(metadata);
    std::filesystem::path sp = csv_path;
    sp.replace_extension(".json");
    write_atomic(sp, side.dump(2) + "\n");
}

// ---------------------------------------------------------------------------------------------
// Binary state files
//
// Layout (little endian):
//   "PTLOCST1"                 8 bytes
//   uint32 version (1), uint32 chart, int32 xi, uint32 reserved
//   float64 mass
//   3 x { float64 origin, float64 step, int64 count }
//   uint64 number of amplitudes
//   amplitudes as interleaved float64 (re, im), row-major (axis 0 slowest)

namespace detail {

inline constexpr char state_magic[8] = {'P', 'T', 'L', 'O', 'C', 'S', 'T', '1'};

template <class T>
void put(std::string& out, T v) {
    std::uint64_t bits = 0;
    if constexpr (std::is_floating_point_v<T>)
        bits = std::bit_cast<std::uint64_t>(static_cast<double>(v));
    else
        bits = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

class Reader {
public:
    explicit Reader(std::string_view d) : d_(d) {}

    template <class T>
    T get() {
        if (pos_ + sizeof(T) > d_.size()) fail(ErrorKind::io, "state file truncated");
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i)
            bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(d_[pos_ + i])) << (8 * i);
        pos_ += sizeof(T);
        if constexpr (std::is_same_v<T, double>)
            return std::bit_cast<double>(bits);
        else
            return static_cast<T>(bits);
    }
    std::string_view take(std::size_t n) {
        if (pos_ + n > d_.size()) fail(ErrorKind::io, "state file truncated");
        auto s = d_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return d_.size() - pos_; }

private:
    std::string_view d_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_state(const MomentumState& s) {
    require(s.amp.size() == s.grid.size(), ErrorKind::invalid_input, "amplitude count does not match grid");
    std::string out(detail::state_magic, 8);
    detail::put<std::uint32_t>(out, 1);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(s.grid.chart));
    detail::put<std::int32_t>(out, static_cast<std::int32_t>(s.xi));
    detail::put<std::uint32_t>(out, 0);
    detail::put<double>(out, s.grid.mass);
    for (const auto& a : s.grid.axes) {
        detail::put<double>(out, a.origin);
        detail::put<double>(out, a.step);
        detail::put<std::int64_t>(out, a.count);
    }
    detail::put<std::uint64_t>(out, s.amp.size());
    out.reserve(out.size() + 16 * s.amp.size());
    for (const auto& z : s.amp) {
        detail::put<double>(out, z.real());
        detail::put<double>(out, z.imag());
    }
    return out;
}

inline MomentumState decode_state(std::string_view data) {
    detail::Reader r(data);
    if (r.take(8) != std::string_view(detail::state_magic, 8)) fail(ErrorKind::io, "not a state file (bad magic)");
    if (r.get<std::uint32_t>() != 1) fail(ErrorKind::io, "unsupported state file version");
    const auto chart = r.get<std::uint32_t>();
    const auto xi = r.get<std::int32_t>();
    (void)r.get<std::uint32_t>();
    if (chart > 2) fail(ErrorKind::io, "bad chart tag");
    if (xi != 1 && xi != -1) fail(ErrorKind::io, "bad energy sign");
    MomentumState s;
    s.grid.chart = static_cast<Chart>(chart);
    s.xi = static_cast<EnergySign>(xi);
    s.grid.mass = r.get<double>();
    for (auto& a : s.grid.axes) {
        a.origin = r.get<double>();
        a.step = r.get<double>();
        const auto n = r.get<std::int64_t>();
        if (n < 1 || n > (1 << 20)) fail(ErrorKind::io, "bad axis count");
        a.count = static_cast<int>(n);
        if (!std::isfinite(a.origin) || !(a.step > 0.0)) fail(ErrorKind::io, "bad axis spacing");
    }
    if (!(s.grid.mass > 0.0) || !std::isfinite(s.grid.mass)) fail(ErrorKind::io, "bad mass");
    const auto n = r.get<std::uint64_t>();
    if (n != s.grid.size() || r.remaining() != 16 * n) fail(ErrorKind::io, "payload size does not match grid");
    s.amp.resize(n);
    for (auto& z : s.amp) {
        const double re = r.get<double>();
        const double im = r.get<double>();
        z = {re, im};
    }
    check_finite(s);
    return s;
}

inline json state_descriptor(const MomentumState& s) {
    json d;
    d["format"] = "ptloc-state";
    d["version"] = 1;
    d["byte_order"] = "little";
    d["chart"] = to_string(s.grid.chart);
    d["xi"] = static_cast<int>(s.xi);
    d["mass"] = s.grid.mass;
    json axes = json::array();
    for (const auto& a : s.grid.axes) axes.push_back({{"origin", a.origin}, {"step", a.step}, {"count", a.count}});
    d["axes"] = axes;
    d["payload"] = {{"offset", 8 + 16 + 8 + 3 * 24 + 8}, {"layout", "interleaved re/im float64, row-major"}};
    return d;
}

/// `<path>` binary plus `<path>.json` descriptor.
inline void save_state(const std::filesystem::path& path, const MomentumState& s, const json& extra = json::object()) {
    write_atomic(path, encode_state(s));
    json d = state_descriptor(s);
    for (auto it = extra.begin(); it != extra.end(); ++it) d[it.key()] = it.value();
    write_atomic(path.string() + ".json", d.dump(2) + "\n");
}

inline MomentumState load_state(const std::filesystem::path& path) { return decode_state(read_file(path)); }

}  // namespace ptloc::io

#endif
