#include "deduce/coco.hpp"

#include <algorithm>
#include <string>

#include "deduce/error.hpp"

namespace deduce::coco {

const std::array<std::string_view, kNumClasses>& names() {
    static constexpr std::array<std::string_view, kNumClasses> kNames = {
        "person",        "bicycle",      "car",           "motorcycle",    "airplane",
        "bus",           "train",        "truck",         "boat",          "traffic light",
        "fire hydrant",  "stop sign",    "parking meter", "bench",         "bird",
        "cat",           "dog",          "horse",         "sheep",         "cow",
        "elephant",      "bear",         "zebra",         "giraffe",       "backpack",
        "umbrella",      "handbag",      "tie",           "suitcase",      "frisbee",
        "skis",          "snowboard",    "sports ball",   "kite",          "baseball bat",
        "baseball glove", "skateboard",  "surfboard",     "tennis racket", "bottle",
        "wine glass",    "cup",          "fork",          "knife",         "spoon",
        "bowl",          "banana",       "apple",         "sandwich",      "orange",
        "broccoli",      "carrot",       "hot dog",       "pizza",         "donut",
        "cake",          "chair",        "couch",         "potted plant",  "bed",
        "dining table",  "toilet",       "tv",            "laptop",        "mouse",
        "remote",        "keyboard",     "cell phone",    "microwave",     "oven",
        "toaster",       "sink",         "refrigerator",  "book",          "clock",
        "vase",          "scissors",     "teddy bear",    "hair drier",    "toothbrush",
    };
    return kNames;
}

std::optional<std::size_t> index_of(std::string_view name) {
    const auto& all = names();
    const auto it = std::find(all.begin(), all.end(), name);
    if (it == all.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - all.begin());
}

std::size_t require_index(std::string_view name) {
    if (auto idx = index_of(name)) {
        return *idx;
    }
    throw DataError("unknown COCO object class '" + std::string(name) + "'");
}

} // namespace deduce::coco
