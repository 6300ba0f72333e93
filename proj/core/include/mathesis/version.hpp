#pragma once

namespace mathesis {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mathesis
