#pragma once

namespace rrnn {

/// Entry point behind the rrnn binary. Exit codes: 0 success, 1
/// operational failure (one-line diagnostic on stderr), 2 bad usage.
int cli_main(int argc, const char* const* argv);

}  // namespace rrnn
