#pragma once

#include <string>

namespace graybox {

/// Formats a double with 17 significant digits, enough to round-trip the
/// exact bit pattern through text.
std::string g17(double value);

}  // namespace graybox
