#pragma once

namespace flowvo {

inline constexpr const char* kVersion = "0.1.0";

} // namespace flowvo
