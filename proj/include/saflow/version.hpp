#pragma once

namespace saflow {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace saflow
