#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "deduce/provenance.hpp"
#include "deduce/types.hpp"

namespace deduce {

inline constexpr std::size_t kDefaultFeatureDim = 512;

struct ManifestHeader {
    ClassSet class_set = ClassSet::home7();
    std::size_t feature_dim = kDefaultFeatureDim;
    std::optional<BlobShape> blob_shape;
    std::optional<Provenance> provenance;
    /// Header keys this reader does not interpret (e.g. a backbone checkpoint
    /// id written by the extractor). Preserved on write.
    nlohmann::ordered_json extras = nlohmann::ordered_json::object();

    bool operator==(const ManifestHeader&) const = default;
};

struct Manifest {
    ManifestHeader header;
    std::vector<FrameRecord> frames;

    bool operator==(const Manifest&) const = default;
};

/// Parses a line-delimited manifest. Every record is validated; the first
/// violation throws SchemaError (line + field) or DataError (naming the
/// frame_id). When `resolve_against` is given, truth labels are resolved
/// against it instead of the header's class set.
Manifest read_manifest(std::istream& in, const std::string& source_name,
                       const ClassSet* resolve_against = nullptr);

Manifest load_manifest(const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path, const ClassSet& class_set);

void write_manifest(std::ostream& out, const Manifest& manifest);
void save_manifest(const std::filesystem::path& path, const Manifest& manifest);

nlohmann::ordered_json frame_to_json(const FrameRecord& frame);

} // namespace deduce
