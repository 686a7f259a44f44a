#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nael::cli {

// Parses "1.25e6", "fs", "fs/8", "3fs/40" or "3*fs/40" into Hz.
double parse_frequency(std::string_view text, double fs);

// Runs one command line (without the program name) and returns the process
// exit code. Output goes to out, diagnostics to err.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nael::cli
