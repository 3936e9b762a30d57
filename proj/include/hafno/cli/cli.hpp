#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hafno::cli {

/// Exit codes: 0 ok, 2 usage, 3 generation, 4 divergence, 5 mismatch, 6 missing file, 1 internal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count from `--threads`, else HAFNO_THREADS, else 1.
std::size_t resolve_threads(int flag_value);

}  // namespace hafno::cli
