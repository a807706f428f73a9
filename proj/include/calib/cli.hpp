#pragma once

namespace calib {

/// Parses argv and dispatches to the matching command. Returns the process
/// exit code: 0 success, 2 configuration/usage errors, 3 unreadable or
/// malformed data files, 4 verification failure, 1 anything else.
int run_cli(int argc, const char* const* argv);

}  // namespace calib
