#pragma once

namespace peelfield {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace peelfield
