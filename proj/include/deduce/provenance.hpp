#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace deduce {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Stamped into the header of every file the tools write. Contains nothing
/// time- or host-dependent so identical runs give identical bytes.
struct Provenance {
    std::string tool = "deduce";
    std::string version = std::string(kToolVersion);
    std::optional<std::uint64_t> seed;
    std::string config_hash;

    bool operator==(const Provenance&) const = default;
};

/// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::string stable_hash(std::string_view text);

nlohmann::ordered_json to_json(const Provenance& p);
Provenance provenance_from_json(const nlohmann::ordered_json& j);

} // namespace deduce
