#pragma once

#include <iosfwd>
#include <string>

namespace encor::cli
{

enum ExitCode : int
{
    kOk = 0,
    kUsage = 1,
    kDataError = 2,
    kCheckFailed = 3,
};

/// Entry point shared by the `encor` binary and the tests.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Writes `path` through a sibling temp file and a rename, so readers never see a partial file.
void write_atomic(const std::string& path, const std::string& content);

/// Aligned columns for a header-first CSV without quoted commas.
std::string pretty_csv(const std::string& csv);

}  // namespace encor::cli
