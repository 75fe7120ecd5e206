#pragma once

namespace alf {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace alf
