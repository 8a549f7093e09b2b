#pragma once

namespace cccp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace cccp
