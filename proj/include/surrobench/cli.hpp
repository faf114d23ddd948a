#pragma once

namespace surrobench::cli {

/// Runs one subcommand. Returns 0 on success, 1 on runtime errors, 2 on usage errors;
/// errors are written to stderr as one JSON object per line.
int dispatch(int argc, char** argv);

}  // namespace surrobench::cli
