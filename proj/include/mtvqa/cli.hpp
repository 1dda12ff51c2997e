#pragma once

namespace mtvqa::cli {

/// Entry point of the `mtvqa` tool. Returns 0 on success, 2 on a usage
/// error and 1 on a data or configuration error (reported on stderr as one
/// JSON line: {"error": kind, "module": name, "message": text}).
int run_cli(int argc, char** argv);

}  // namespace mtvqa::cli
