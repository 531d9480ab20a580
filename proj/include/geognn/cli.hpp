#pragma once

namespace geognn {

/// Entry point of the `geognn` command line tool. Returns the process exit
/// code: 0 on success, 2 on usage or validation errors, 3 on numeric failure.
int run_cli(int argc, char** argv);

}  // namespace geognn
