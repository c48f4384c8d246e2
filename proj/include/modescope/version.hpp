#pragma once

namespace modescope {

inline constexpr const char* version = "0.1.0";

}  // namespace modescope
