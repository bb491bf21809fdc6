#pragma once

namespace actflow {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace actflow
