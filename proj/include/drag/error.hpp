#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace drag {

// All library failures are reported as Error with a stable kind tag
// (e.g. "TruncatedFile", "ShapeMismatch"). The tag is part of what()
// so CLI error messages stay grep-able.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& message)
        : std::runtime_error(kind + ": " + message), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

[[noreturn]] inline void fail(std::string kind, const std::string& message) {
    throw Error(std::move(kind), message);
}

}  // namespace drag
