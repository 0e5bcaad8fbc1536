#pragma once

namespace blbf {

inline constexpr const char* kToolName = "blbf";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace blbf
