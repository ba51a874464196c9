#pragma once

namespace gpsgld {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gpsgld
