#pragma once

namespace dialign {

inline constexpr const char* kVersion = "0.1.0";

// Bumped whenever a serialized format (model files, manifests) changes shape.
inline constexpr int kFormatVersion = 1;

}  // namespace dialign
