#pragma once

#include <iosfwd>

namespace sdgame {

/// Subcommands validate, solve, penalize, simulate, invariance, converge,
/// martingale and increments. Exit code 0 on success, 1 when a stage fails
/// or its criteria are not met, 2 on usage or configuration errors.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sdgame
