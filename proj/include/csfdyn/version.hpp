#pragma once

namespace csfdyn {

inline constexpr const char* kToolName = "csfdyn";
inline constexpr const char* kVersion = "1.0.0";

}  // namespace csfdyn
