#pragma once

namespace bitglow::cli {

// Entry point behind the bitglow binary. Exit codes: 0 success, 1 runtime
// failure (with an `error: <category>: ...` line on stderr), 2 usage errors.
int run(int argc, const char* const* argv);

} // namespace bitglow::cli
