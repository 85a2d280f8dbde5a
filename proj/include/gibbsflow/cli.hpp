#ifndef GIBBSFLOW_CLI_HPP
#define GIBBSFLOW_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace gibbsflow {

enum ExitCode : int { kExitPass = 0, kExitUsage = 1, kExitExperimentFail = 2 };

/// Entry point of the `gibbsflow` tool. Returns 0 on pass, 2 when an
/// experiment fails its checks, 1 on usage or I/O errors.
int cli_main(int argc, const char* const* argv);

/// Same with explicit streams, for tests.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gibbsflow

#endif  // GIBBSFLOW_CLI_HPP
