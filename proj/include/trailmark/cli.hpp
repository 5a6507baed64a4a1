#pragma once

namespace trailmark {

/// Entry point for the `trailmark` command-line tool.
/// Returns 0 on success, 2 on configuration/usage errors, 3 on data errors,
/// 4 on internal invariant violations.
int run_cli(int argc, const char* const* argv);

}  // namespace trailmark
