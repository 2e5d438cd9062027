#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace deduce::coco {

inline constexpr std::size_t kNumClasses = 80;

/// Canonical COCO-80 detector vocabulary, in detector output order.
const std::array<std::string_view, kNumClasses>& names();

std::optional<std::size_t> index_of(std::string_view name);

/// Throws DataError for names outside the vocabulary.
std::size_t require_index(std::string_view name);

} // namespace deduce::coco
