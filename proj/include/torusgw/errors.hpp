#pragma once

#include <stdexcept>
#include <string>

namespace torusgw {

// All library failures derive from Error and carry a short machine-readable
// kind tag ("invalid-geometry", "ambiguous-lift", "resolution", ...) next to
// the human-readable message.  The CLI serializes the tag into error JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }
private:
    std::string kind_;
};

inline void require(bool ok, const char* kind, const std::string& message) {
    if (!ok) throw Error(kind, message);
}

} // namespace torusgw
