#pragma once

namespace wignerlab {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace wignerlab
