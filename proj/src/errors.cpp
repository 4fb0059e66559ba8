#include "oodkit/errors.hpp"

#include <iostream>

namespace oodkit {

void warn(const std::string& message) {
    std::cerr << "[warn] " << message << "\n";
}

}  // namespace oodkit
