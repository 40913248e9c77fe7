#pragma once

namespace alm {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace alm
