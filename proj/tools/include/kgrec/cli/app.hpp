#pragma once

namespace kgrec::cli {

// Parses arguments and runs one subcommand. Exit codes: 0 success,
// 2 config error, 3 data error, 4 numeric failure.
int run(int argc, const char* const* argv);

}  // namespace kgrec::cli
