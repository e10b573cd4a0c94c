#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>

namespace tier {

// Insertion-ordered JSON is used for every document this library reads or
// writes, so emitted files preserve author ordering.
using Json = nlohmann::ordered_json;

/// Domain error carrying a stable machine-readable code (e.g.
/// "DuplicateToolName") alongside the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

} // namespace tier
