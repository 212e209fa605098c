#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dynarisk {

// Full command-line surface, callable in-process for tests. args excludes
// the program name. Returns the exit status: 0 when values were computed
// or the verdict is non-refuting, 1 on REFUTED, 2 on usage or fixture
// errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace dynarisk
