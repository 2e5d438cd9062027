#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "deduce/coco.hpp"
#include "deduce/types.hpp"

namespace deduce {

inline constexpr double kDefaultMinConfidence = 0.5;

/// Landmark table: each COCO object maps to at most one scene, and the
/// absence of every landmark maps to `absence_label`.
class Codebook {
public:
    using Entry = std::pair<std::string, std::string>; ///< object name, scene name

    /// Throws DataError on unknown objects, scenes outside `classes`, or an
    /// object listed twice.
    Codebook(ClassSet classes, const std::vector<Entry>& entries,
             std::string_view absence_label = "corridor");

    const ClassSet& class_set() const noexcept { return classes_; }
    const std::vector<Entry>& entries() const noexcept { return entries_; }
    const SceneLabel& absence_label() const noexcept { return absence_; }

    std::optional<SceneLabel> lookup(std::string_view object) const;
    std::optional<std::size_t> scene_of(std::size_t object) const { return table_.at(object); }

    /// Flat JSON object {"<object>": "<scene>", ..., "absence": "<scene>"}.
    std::string to_json() const;

private:
    ClassSet classes_;
    std::vector<Entry> entries_;
    std::array<std::optional<std::size_t>, coco::kNumClasses> table_{};
    SceneLabel absence_;
};

/// The seven-scene landmark table over ClassSet::home7().
Codebook default_codebook();

/// Landmark table shipped for the five-scene office set.
Codebook office5_codebook();

/// default_codebook() or office5_codebook() when `classes` is a built-in set.
std::optional<Codebook> builtin_codebook(const ClassSet& classes);

Codebook parse_codebook(std::string_view text, const ClassSet& classes,
                        const std::string& source = "<codebook>");
Codebook load_codebook(const std::filesystem::path& path, const ClassSet& classes);

struct ObjectVote {
    SceneLabel label;
    Posterior posterior;
    bool landmark_found = false;
};

/// Confidence-weighted landmark vote. Detections below `min_conf` are
/// dropped; ties go to the lower scene id; no landmark means absence_label.
ObjectVote classify_objects(std::span<const Detection> detections, const Codebook& codebook,
                            double min_conf = kDefaultMinConfidence);

} // namespace deduce
