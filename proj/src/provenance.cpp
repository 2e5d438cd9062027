#include "deduce/provenance.hpp"

#include <cstdio>

namespace deduce {

std::string stable_hash(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

nlohmann::ordered_json to_json(const Provenance& p) {
    nlohmann::ordered_json j;
    j["tool"] = p.tool;
    j["version"] = p.version;
    j["seed"] = p.seed ? nlohmann::ordered_json(*p.seed) : nlohmann::ordered_json(nullptr);
    j["config_hash"] = p.config_hash;
    return j;
}

Provenance provenance_from_json(const nlohmann::ordered_json& j) {
    Provenance p;
    p.tool = j.value("tool", std::string("deduce"));
    p.version = j.value("version", std::string());
    if (j.contains("seed") && !j["seed"].is_null()) {
        p.seed = j["seed"].get<std::uint64_t>();
    }
    p.config_hash = j.value("config_hash", std::string());
    return p;
}

} // namespace deduce
