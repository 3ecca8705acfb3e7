#pragma once

namespace surad {

// Command-line entry point: solve | render | gradcheck | optimize | variance.
// Returns 0 on success, 1 on runtime failure, 2 on usage errors.
int dispatch(int argc, const char* const* argv);

}  // namespace surad
