#pragma once

namespace flicker {

inline constexpr const char* kVersion = "flicker-ews 0.1.0";

}  // namespace flicker
