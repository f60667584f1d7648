#pragma once

#include <iosfwd>

namespace intman {

inline constexpr const char* kVersion = "0.1.0";

/// Command line entry point; returns the process exit status.
int cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace intman
