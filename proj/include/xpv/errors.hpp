#pragma once

#include <stdexcept>
#include <string>

namespace xpv {

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidSubsystem : std::runtime_error {
    explicit InvalidSubsystem(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateInput : std::runtime_error {
    explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

struct ModeError : std::runtime_error {
    explicit ModeError(const std::string& what) : std::runtime_error(what) {}
};

struct ChannelError : std::runtime_error {
    explicit ChannelError(const std::string& what) : std::runtime_error(what) {}
};

struct Unsupported : std::runtime_error {
    explicit Unsupported(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace xpv
