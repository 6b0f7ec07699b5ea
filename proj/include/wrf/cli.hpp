#pragma once

namespace wrf {

// Exit codes: 0 success, 1 verification failure, 2 usage/format error.
int cli_main(int argc, const char* const* argv);

}  // namespace wrf
