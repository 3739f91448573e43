#pragma once

#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "probekit/common.hpp"

namespace probekit {

// Sectioned key/value config, e.g.:
//   [global]
//   seed = 42
//   [sweep]
//   store = runs/store
// Sections and keys live in sorted maps, so serialize() is canonical and
// parse(serialize(c)) == c holds for any config.
struct RunConfig {
    std::map<std::string, std::map<std::string, std::string>> sections;

    bool operator==(const RunConfig&) const = default;

    bool has(const std::string& section, const std::string& key) const {
        const auto s = sections.find(section);
        return s != sections.end() && s->second.count(key) > 0;
    }

    std::string get(const std::string& section, const std::string& key) const {
        const auto s = sections.find(section);
        if (s != sections.end()) {
            const auto k = s->second.find(key);
            if (k != s->second.end()) return k->second;
        }
        throw ConfigParseError("missing config field: [" + section + "] " + key);
    }

    std::string get_or(const std::string& section, const std::string& key,
                       const std::string& fallback) const {
        return has(section, key) ? get(section, key) : fallback;
    }

    int64_t get_int(const std::string& section, const std::string& key) const {
        const std::string raw = get(section, key);
        try {
            size_t used = 0;
            const int64_t value = std::stoll(raw, &used);
            if (used != raw.size()) throw std::invalid_argument(raw);
            return value;
        } catch (const std::exception&) {
            throw ConfigParseError("field [" + section + "] " + key +
                                   " is not an integer: " + raw);
        }
    }

    int64_t get_int_or(const std::string& section, const std::string& key,
                       int64_t fallback) const {
        return has(section, key) ? get_int(section, key) : fallback;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        sections[section][key] = value;
    }
};

inline std::string serialize_config(const RunConfig& config) {
    std::string out;
    for (const auto& [section, entries] : config.sections) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
    }
    return out;
}

inline RunConfig parse_config(const std::string& body) {
    RunConfig config;
    std::string section;
    size_t pos = 0;
    int line_no = 0;
    while (pos <= body.size()) {
        size_t end = body.find('\n', pos);
        if (end == std::string::npos) end = body.size();
        const std::string line = strip(body.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            if (pos > body.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3)
                throw ConfigParseError(strfmt("line %d: malformed section header: %s",
                                              line_no, line.c_str()));
            section = strip(line.substr(1, line.size() - 2));
            config.sections[section];  // keep empty sections through a round trip
        } else {
            const size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigParseError(strfmt("line %d: expected key = value: %s", line_no,
                                              line.c_str()));
            const std::string key = strip(line.substr(0, eq));
            if (key.empty())
                throw ConfigParseError(strfmt("line %d: empty key", line_no));
            config.sections[section][key] = strip(line.substr(eq + 1));
        }
        if (pos > body.size()) break;
    }
    return config;
}

inline RunConfig load_config(const std::string& path) {
    return parse_config(read_text_file(path));
}

inline void save_config(const std::string& path, const RunConfig& config) {
    write_text_file(path, serialize_config(config));
}

// Seed precedence, weakest first: built-in 42, PROBEKIT_SEED, [global] seed
// in the config, then an explicit --seed flag.
inline uint64_t resolve_seed(const RunConfig* config, bool flag_set, uint64_t flag_value) {
    uint64_t seed = 42;
    if (const char* env = std::getenv("PROBEKIT_SEED")) {
        try {
            seed = static_cast<uint64_t>(std::stoull(env));
        } catch (const std::exception&) {
            throw ConfigParseError(std::string("PROBEKIT_SEED is not an integer: ") + env);
        }
    }
    if (config && config->has("global", "seed"))
        seed = static_cast<uint64_t>(config->get_int("global", "seed"));
    if (flag_set) seed = flag_value;
    return seed;
}

}  // namespace probekit
