#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace mapmom::cli {

inline constexpr const char* kVersion = "0.1.0";

// Inclusive start:stop:count grid, parsed locale-independently.
std::vector<double> parse_grid(const std::string& spec);

// Full-precision scientific notation, 17 significant digits.
std::string fmt17(double x);

// Runs one command; returns the process exit code (0 ok, 2 validation
// failure, 3 numeric failure).  Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int main_entry(int argc, char** argv);

}  // namespace mapmom::cli
