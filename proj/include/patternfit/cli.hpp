#pragma once

namespace patternfit
{
	/// Entry point of the `patternfit` tool. Returns the process exit code:
	/// 0 success, 1 validation error, 2 numerical failure, 3 I/O error.
	int run_cli(int argc, char **argv);
} // namespace patternfit
