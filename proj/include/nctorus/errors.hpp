#pragma once

#include <stdexcept>
#include <string>

namespace nctorus {

/// Base class for every error raised by the library. `kind()` is the stable
/// machine-readable name used in CLI error trailers.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define NCTORUS_DEFINE_ERROR(Name)                                            \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(#Name, what) {}        \
    };

NCTORUS_DEFINE_ERROR(DimensionError)
NCTORUS_DEFINE_ERROR(AlgebraMismatch)
NCTORUS_DEFINE_ERROR(WindowError)
NCTORUS_DEFINE_ERROR(DomainError)
NCTORUS_DEFINE_ERROR(InternalError)
NCTORUS_DEFINE_ERROR(ConfigError)
NCTORUS_DEFINE_ERROR(ShapeError)
NCTORUS_DEFINE_ERROR(LevelMismatch)
NCTORUS_DEFINE_ERROR(UnsupportedCandidate)
NCTORUS_DEFINE_ERROR(NumericsError)

#undef NCTORUS_DEFINE_ERROR

} // namespace nctorus
