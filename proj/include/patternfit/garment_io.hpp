#pragma once

#include <patternfit/pattern.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>

namespace patternfit
{
	struct LoadReport
	{
		std::vector<SeamResample> resampled;
	};

	/// Parses and validates a garment-spec document. Seam sides with unequal
	/// vertex counts are resampled (and listed in `report`).
	GarmentSpec garment_from_json(const nlohmann::json &doc, LoadReport *report = nullptr);
	nlohmann::json garment_to_json(const GarmentSpec &spec);

	GarmentSpec load_garment_spec(const std::filesystem::path &path, LoadReport *report = nullptr);
	void save_garment_spec(const GarmentSpec &spec, const std::filesystem::path &path);

	/// Writes `text` to `path` through a temporary file and a rename.
	void write_file_atomic(const std::filesystem::path &path, const std::string &text);
	std::string read_file(const std::filesystem::path &path);
} // namespace patternfit
