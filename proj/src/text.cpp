#include "graybox/text.hpp"

#include <cstdio>

namespace graybox {

std::string g17(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace graybox
