#pragma once

#include <filesystem>
#include <random>
#include <string>

/// Fresh directory under the system temp path, removed on destruction.
struct TempDir
{
	std::filesystem::path path;

	TempDir()
	{
		std::random_device rd;
		path = std::filesystem::temp_directory_path() / ("patternfit_test_" + std::to_string(rd()) + std::to_string(rd()));
		std::filesystem::create_directories(path);
	}
	~TempDir()
	{
		std::error_code ec;
		std::filesystem::remove_all(path, ec);
	}
	TempDir(const TempDir &) = delete;
	TempDir &operator=(const TempDir &) = delete;
};
