#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "medvqa/error.hpp"

namespace medvqa::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Bad configuration, arguments or input files map to 1; failures while
// running (transport, backend, integrity, filesystem) map to 2.
int exit_code_for(ErrorKind kind) noexcept;

// args excludes the program name. Output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace medvqa::cli
