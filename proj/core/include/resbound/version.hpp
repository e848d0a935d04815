#pragma once

namespace resbound {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace resbound
