#pragma once

#include <patternfit/garment_io.hpp>
#include <patternfit/refit.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>

namespace patternfit
{
	struct PinGroup
	{
		std::string panel;
		std::vector<int> vertices; // panel-local
	};

	/// A refit run. Relative paths are resolved against the config file.
	struct RunConfig
	{
		std::filesystem::path source;
		std::filesystem::path garment;
		std::filesystem::path body;
		std::filesystem::path target;
		std::map<std::string, double> target_areas;
		std::vector<PinGroup> pins;
		std::optional<double> body_margin;
		RefitConfig refit;
		nlohmann::json snapshot; // resolved configuration
	};

	RunConfig run_config_from_json(const nlohmann::json &doc, const std::filesystem::path &base_dir);
	RunConfig load_run_config(const std::filesystem::path &path);
	nlohmann::json run_config_to_json(const RunConfig &cfg);

	/// Either a single run or {"runs": [paths]} for batch execution.
	std::vector<std::filesystem::path> batch_entries(const std::filesystem::path &path);

	/// Loaded and cross-checked inputs of a run.
	struct RunInputs
	{
		GarmentSpec spec;
		BodyMesh body;
		TargetDrape target;
		RefitConfig refit; // with pins resolved to simulation indices
		LoadReport load_report;
	};

	RunInputs load_run_inputs(const RunConfig &cfg);
} // namespace patternfit
