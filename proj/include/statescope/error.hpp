#pragma once

#include <stdexcept>
#include <string>

namespace statescope {

enum class ErrorKind {
    Validation,  // bad input or violated precondition
    Io,          // filesystem or transport failure
};

/// Every module reports failures through this type. `code` is the
/// machine-readable name (e.g. "MalformedLine"), `stage` names the
/// module or pipeline stage that raised it.
class Error : public std::runtime_error {
public:
    Error(std::string code, std::string stage, const std::string& detail,
          ErrorKind kind = ErrorKind::Validation)
        : std::runtime_error(code + " [" + stage + "]: " + detail),
          code_(std::move(code)), stage_(std::move(stage)), detail_(detail), kind_(kind) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }
    const std::string& detail() const noexcept { return detail_; }
    ErrorKind kind() const noexcept { return kind_; }

    /// Same error re-attributed to a pipeline stage.
    Error with_stage(std::string stage) const { return Error(code_, std::move(stage), detail_, kind_); }

private:
    std::string code_;
    std::string stage_;
    std::string detail_;
    ErrorKind kind_;
};

}  // namespace statescope
