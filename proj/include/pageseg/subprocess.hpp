#ifndef PAGESEG_SUBPROCESS_HPP
#define PAGESEG_SUBPROCESS_HPP

#include <string>
#include <string_view>
#include <vector>

namespace pageseg {

/// Runs argv[0] with the given arguments (no shell involved) and waits.
/// Returns the exit code; a terminating signal is reported as 128+signo.
/// Throws PredictorError when the process cannot be spawned.
int run_command(const std::vector<std::string>& argv);

/// Splits a predictor command descriptor on whitespace. Descriptors are
/// plain argv lists by design; there is no quoting.
std::vector<std::string> split_command(std::string_view command);

} // namespace pageseg

#endif
