#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace srg {

/// Library errors carry a short machine-checkable code plus a human message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& what) {
    throw Error(code, what);
}

} // namespace srg
