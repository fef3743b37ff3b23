#pragma once

#include <nlohmann/json.hpp>

namespace dqa {

inline constexpr const char *version = "1.0.0";

/// Per-module format versions echoed into run manifests.
[[nodiscard]] inline nlohmann::json module_versions() {
    return {{"problem-model", "1.0"},    {"partitioner", "1.0"},   {"quantum-state", "1.0"},
            {"evolution-engine", "1.0"}, {"noise-channel", "1.0"}, {"metrics-bounds", "1.0"},
            {"experiment-harness", "1.0"}, {"cli", "1.0"}};
}

} // namespace dqa
