#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shmpipe {

/// Error raised by data validation, I/O and pipeline stages. The optional
/// stage tag names the pipeline stage that failed so batch runs can report
/// where an image was rejected.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message)
        : std::runtime_error(message) {}

    Error(std::string_view stage, const std::string& message)
        : std::runtime_error("stage " + std::string(stage) + ": " + message),
          stage_(stage) {}

    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

} // namespace shmpipe
