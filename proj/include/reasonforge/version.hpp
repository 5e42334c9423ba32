#pragma once

namespace reasonforge {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace reasonforge
