#pragma once

#include <stdexcept>
#include <string>

namespace ropepp {

inline void require(bool ok, const std::string& msg) {
    if (!ok) {
        throw std::invalid_argument(msg);
    }
}

} // namespace ropepp
