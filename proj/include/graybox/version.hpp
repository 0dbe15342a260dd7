#pragma once

namespace graybox {

inline constexpr const char* version = "0.1.0";

}  // namespace graybox
