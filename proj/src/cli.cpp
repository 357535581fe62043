#include <patternfit/cli.hpp>
#include <patternfit/fixtures.hpp>
#include <patternfit/gradcheck.hpp>
#include <patternfit/mesh_io.hpp>
#include <patternfit/run_config.hpp>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>

#ifndef PATTERNFIT_VERSION
#define PATTERNFIT_VERSION "0.0.0"
#endif

namespace patternfit
{
	using nlohmann::json;
	namespace fs = std::filesystem;

	namespace
	{
		const char *const kHistoryHeader =
			"iteration,total,shape_match,curvature,pattern_match,total_area,grad_norm,step_norm,drape_steps,drape_converged,seconds";
		const std::vector<std::string> kOutputs = {"refitted_garment.json", "drape.obj", "loss_history.csv", "quality_report.json", "manifest.json"};

		using Clock = std::chrono::steady_clock;

		double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

		std::string sha256_hex(const std::string &bytes)
		{
			unsigned char md[EVP_MAX_MD_SIZE];
			unsigned int len = 0;
			if (!EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr))
				throw Error("sha256 failed");
			std::string out;
			for (unsigned i = 0; i < len; ++i)
				out += fmt::format("{:02x}", md[i]);
			return out;
		}

		void setup_logging()
		{
			spdlog::set_pattern("[%l] %v");
			spdlog::set_level(spdlog::level::info);
			if (const char *lvl = std::getenv("PATTERNFIT_LOG_LEVEL"))
				spdlog::set_level(spdlog::level::from_str(lvl));
		}

		std::string status_name(RefitStatus s) { return s == RefitStatus::Converged ? "converged" : "max_iterations"; }

		std::string history_csv(const std::vector<IterationRecord> &history)
		{
			std::ostringstream os;
			os << kHistoryHeader << '\n';
			for (const IterationRecord &r : history)
				os << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{:.6f}\n", r.iteration, r.total, r.shape_match,
								  r.curvature, r.pattern_match, r.total_area, r.grad_norm, r.step_norm, r.drape_steps, int(r.drape_converged), r.seconds);
			return os.str();
		}

		json quality_json(const QualityReport &q) { return {{"min", q.min_quality}, {"mean", q.mean_quality}}; }

		json quality_report(const GarmentSpec &input, const RefitResult &res)
		{
			std::vector<Points2> patterns, rest;
			for (size_t p = 0; p < res.spec.panels.size(); ++p)
			{
				patterns.push_back(res.spec.panels[p].vertices);
				rest.push_back(input.panels[p].vertices);
			}
			json areas = json::array();
			const std::vector<double> errs = panel_area_errors(res.spec, res.target_areas);
			for (size_t p = 0; p < res.spec.panels.size(); ++p)
				areas.push_back({{"panel", res.spec.panels[p].id},
								 {"area", panel_area(res.spec.panels[p])},
								 {"target", res.target_areas[p]},
								 {"relative_error", errs[p]}});
			const double initial = res.history.empty() ? 0.0 : res.history.front().total;
			const LossBreakdown &b = res.best_breakdown;
			return {{"status", status_name(res.status)},
					{"iterations", res.history.size()},
					{"best_iteration", res.best_iteration},
					{"initial_loss", initial},
					{"best_loss", res.best_loss},
					{"loss_reduction", initial > 0.0 ? 1.0 - res.best_loss / initial : 0.0},
					{"global_scale", res.scale},
					{"final_losses",
					 {{"shape_match", b.shape_match}, {"curvature", b.curvature}, {"pattern_match", b.pattern_match}, {"total_area", b.total_area}, {"total", b.total}}},
					{"quality", {{"before", quality_json(res.quality_before)}, {"after", quality_json(res.quality_after)}}},
					{"panel_area", areas},
					{"seam_length_mismatch", max_seam_length_mismatch(res.spec)},
					{"mirror_error", max_mirror_error(res.spec, res.symmetry_pairs)},
					{"curvature_residual", loss_boundary_curvature(res.spec, patterns, rest).value}};
		}

		json digests(const RunConfig &cfg)
		{
			json out;
			for (const fs::path &p : {cfg.source, cfg.garment, cfg.body, cfg.target})
				if (!p.empty())
					out[p.string()] = sha256_hex(read_file(p));
			return out;
		}

		/// Runs one refit and writes every output. Returns an exit code.
		int refit_one(const fs::path &config_path, const fs::path &out_dir, bool dry_run);

		int exit_code_of(const std::function<void()> &body)
		{
			try
			{
				body();
				return 0;
			}
			catch (const ValidationError &e)
			{
				spdlog::error("validation error: {}", e.what());
				return 1;
			}
			catch (const NumericalError &e)
			{
				spdlog::error("numerical failure: {}", e.what());
				return 2;
			}
			catch (const IoError &e)
			{
				spdlog::error("I/O error: {}", e.what());
				return 3;
			}
			catch (const std::exception &e)
			{
				spdlog::error("{}", e.what());
				return 2;
			}
		}

		int refit_one(const fs::path &config_path, const fs::path &out_dir, bool dry_run)
		{
			return exit_code_of([&] {
				json timings;
				auto t0 = Clock::now();
				const RunConfig cfg = load_run_config(config_path);
				RunInputs in = load_run_inputs(cfg);
				std::vector<CagePair> pairs;
				build_cages(in.spec, in.refit, pairs);
				timings["load"] = seconds_since(t0);

				json manifest = {{"tool", "patternfit"}, {"version", PATTERNFIT_VERSION}, {"config", cfg.snapshot}, {"inputs", digests(cfg)}, {"dry_run", dry_run}};
				fs::create_directories(out_dir);
				if (dry_run)
				{
					manifest["timings"] = timings;
					write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
					spdlog::info("{}: inputs valid", config_path.string());
					return;
				}

				t0 = Clock::now();
				const RefitResult res = refit(in.spec, in.body, in.target, in.refit, [&](const IterationRecord &r) {
					spdlog::info("iter {:4d}  loss {:.6e}  |g| {:.3e}  steps {}", r.iteration, r.total, r.grad_norm, r.drape_steps);
				});
				timings["refit"] = seconds_since(t0);

				t0 = Clock::now();
				const SimMesh mesh = assemble_sim_mesh(res.spec);
				save_garment_spec(res.spec, out_dir / "refitted_garment.json");
				write_obj(out_dir / "drape.obj", res.drape, sim_triangles(mesh));
				write_file_atomic(out_dir / "loss_history.csv", history_csv(res.history));
				json report = quality_report(in.spec, res);
				write_file_atomic(out_dir / "quality_report.json", report.dump(2) + "\n");
				timings["write"] = seconds_since(t0);
				manifest["timings"] = timings;
				manifest["outputs"] = kOutputs;
				write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
				spdlog::info("{}: {} after {} iterations, loss {:.6e}", config_path.string(), status_name(res.status), res.history.size(), res.best_loss);
			});
		}

		int cmd_refit(const fs::path &config, const fs::path &out, bool dry_run, int jobs)
		{
			std::vector<fs::path> runs;
			const int code = exit_code_of([&] { runs = batch_entries(config); });
			if (code)
				return code;
			if (runs.size() == 1 && runs.front() == config)
				return refit_one(config, out, dry_run);

			std::vector<int> codes(runs.size(), 0);
			std::vector<std::future<void>> active;
			// One directory per run, named by config stem; repeated stems get an index.
			std::vector<fs::path> dirs;
			std::map<std::string, int> seen;
			for (const fs::path &r : runs)
			{
				const std::string stem = r.stem().string();
				const int n = seen[stem]++;
				dirs.push_back(out / (n == 0 ? stem : fmt::format("{}_{}", stem, n)));
			}
			size_t next = 0;
			auto launch = [&](size_t k) {
				return std::async(std::launch::async, [&, k] { codes[k] = refit_one(runs[k], dirs[k], dry_run); });
			};
			while (next < runs.size() || !active.empty())
			{
				while (next < runs.size() && int(active.size()) < std::max(1, jobs))
					active.push_back(launch(next++));
				active.front().get();
				active.erase(active.begin());
			}
			int worst = 0;
			for (int c : codes)
				worst = std::max(worst, c);
			return worst;
		}

		void print_checks(const std::vector<CheckResult> &checks, bool &ok)
		{
			for (const CheckResult &c : checks)
			{
				std::cout << fmt::format("{:<32} {:12.4e}  tol {:8.1e}  {}\n", c.name, c.error, c.tolerance, c.passed() ? "PASS" : "FAIL");
				ok = ok && c.passed();
			}
		}

		int cmd_gradcheck(const fs::path &config, const std::string &scope, int steps, int samples)
		{
			bool ok = true;
			const int code = exit_code_of([&] {
				const RunConfig cfg = load_run_config(config);
				RunInputs in = load_run_inputs(cfg);
				std::vector<CagePair> pairs;
				std::vector<Cage> cages = build_cages(in.spec, in.refit, pairs);
				if (scope == "cage")
				{
					for (size_t p = 0; p < cages.size(); ++p)
						print_checks(check_cage(in.spec.panels[p], cages[p]), ok);
					return;
				}

				// Check at the first refit iterate: scaled patterns, warm start from the target.
				const double scale = in.refit.global_scale ? initial_global_scale(in.spec, assemble_sim_mesh(in.spec), in.target.positions) : 1.0;
				std::vector<Points2> patterns;
				std::vector<CageCoords> coords;
				for (size_t p = 0; p < cages.size(); ++p)
				{
					const Points2 &rest = in.spec.panels[p].vertices;
					const Vec2 c = rest.colwise().mean().transpose();
					patterns.push_back(scale_about_centroid(rest, c, scale));
					cages[p] = make_cage(cages[p].panel_id, scale_about_centroid(cages[p].vertices, c, scale));
					coords.push_back(compute_green_coords(cages[p], patterns[p]));
				}
				SimConfig sim = in.refit.sim;
				sim.max_steps = steps;
				SimLossProblem problem = make_problem(in.spec, in.body, in.target, sim, in.refit.loss, in.target.positions);
				if (scope == "losses")
				{
					// Evaluate away from the fixed points so every term is active.
					std::vector<Points2> current;
					for (size_t p = 0; p < in.spec.panels.size(); ++p)
					{
						Points2 q = in.spec.panels[p].vertices;
						for (Eigen::Index i = 0; i < q.rows(); ++i)
							q.row(i) = 1.05 * q.row(i) + 0.002 * Eigen::RowVector2d(std::sin(3.1 * i + p), std::cos(1.7 * i + 2.0 * p));
						current.push_back(q);
					}
					print_checks(check_losses(in.spec, current, problem.reference, in.spec.reference_drape3d, in.target, problem.target_areas, in.refit.loss),
								 ok);
				}
				else if (scope == "adjoint")
					print_checks({check_rest_gradient(problem, patterns, samples)}, ok);
				else
					print_checks({check_cage_gradient(problem, cages, coords, samples)}, ok);
			});
			if (code)
				return code;
			return ok ? 0 : 2;
		}

		std::vector<std::vector<double>> read_history(const fs::path &path)
		{
			std::istringstream in(read_file(path));
			std::string line;
			if (!std::getline(in, line) || line != kHistoryHeader)
				throw ValidationError("'" + path.string() + "': missing or unexpected header");
			std::vector<std::vector<double>> rows;
			int line_no = 1;
			while (std::getline(in, line))
			{
				++line_no;
				if (line.empty())
					continue;
				std::vector<double> row;
				std::stringstream ss(line);
				std::string cell;
				while (std::getline(ss, cell, ','))
				{
					char *end = nullptr;
					const double v = std::strtod(cell.c_str(), &end);
					if (cell.empty() || *end != '\0')
						throw ValidationError(fmt::format("'{}':{}: malformed value '{}'", path.string(), line_no, cell));
					row.push_back(v);
				}
				if (row.size() != 11)
					throw ValidationError(fmt::format("'{}':{}: expected 11 columns, found {}", path.string(), line_no, row.size()));
				rows.push_back(std::move(row));
			}
			if (rows.empty())
				throw ValidationError("'" + path.string() + "': no iterations recorded");
			return rows;
		}

		int cmd_report(const fs::path &dir)
		{
			return exit_code_of([&] {
				for (const std::string &name : kOutputs)
					if (!fs::exists(dir / name))
						throw IoError("incomplete result directory: missing '" + (dir / name).string() + "'");
				const auto history = read_history(dir / "loss_history.csv");
				json q;
				const fs::path qpath = dir / "quality_report.json";
				try
				{
					q = json::parse(read_file(qpath));
				}
				catch (const json::exception &e)
				{
					throw ValidationError("'" + qpath.string() + "': " + e.what());
				}
				try
				{
					std::cout << fmt::format("result: {}\n", dir.string());
					std::cout << fmt::format("termination: {} ({} iterations, best at {})\n", q.at("status").get<std::string>(), history.size(),
											 q.at("best_iteration").get<int>());
					std::cout << fmt::format("loss: {:.6e} -> {:.6e} ({:.1f}% reduction)\n", q.at("initial_loss").get<double>(),
											 q.at("best_loss").get<double>(), 100.0 * q.at("loss_reduction").get<double>());
					std::cout << "\ntriangle quality     min        avg\n";
					for (const char *when : {"before", "after"})
					{
						const json &e = q.at("quality").at(when);
						std::cout << fmt::format("  {:<16} {:9.6f}  {:9.6f}\n", when, e.at("min").get<double>(), e.at("mean").get<double>());
					}
					std::cout << "\nfinal loss terms\n";
					for (const auto &[k, v] : q.at("final_losses").items())
						std::cout << fmt::format("  {:<16} {:.6e}\n", k, v.get<double>());
					std::cout << "\npanel area           area       target     rel.err\n";
					for (const json &a : q.at("panel_area"))
						std::cout << fmt::format("  {:<16} {:9.6f}  {:9.6f}  {:9.3e}\n", a.at("panel").get<std::string>(), a.at("area").get<double>(),
												 a.at("target").get<double>(), a.at("relative_error").get<double>());
					std::cout << fmt::format("\nseam length mismatch {:.3e}\nmirror error         {:.3e} m\n", q.at("seam_length_mismatch").get<double>(),
											 q.at("mirror_error").get<double>());
				}
				catch (const json::exception &e)
				{
					throw ValidationError("'" + qpath.string() + "': " + e.what());
				}
			});
		}

		int cmd_validate(const fs::path &config)
		{
			return exit_code_of([&] {
				const RunConfig cfg = load_run_config(config);
				const RunInputs in = load_run_inputs(cfg);
				std::vector<CagePair> pairs;
				const std::vector<Cage> cages = build_cages(in.spec, in.refit, pairs);
				std::cout << fmt::format("{}: {} panels, {} vertices, {} triangles, {} seams, {} symmetry pairs\n", config.string(), in.spec.panels.size(),
										 in.spec.num_vertices(), in.spec.num_triangles(), in.spec.seams.size(), pairs.size());
				for (size_t p = 0; p < cages.size(); ++p)
					std::cout << fmt::format("  panel {:<12} cage {} vertices\n", in.spec.panels[p].id, cages[p].size());
				for (const SeamResample &r : in.load_report.resampled)
					std::cout << fmt::format("  seam {} resampled: +{} on {}\n", r.seam, r.inserted, r.panel);
			});
		}

		int cmd_fixture(const fs::path &out, const TubeSkirtParams &prm)
		{
			return exit_code_of([&] {
				const TubeSkirt t = make_tube_skirt(prm);
				fs::create_directories(out);
				save_garment_spec(t.spec, out / "garment.json");
				write_obj(out / "body.obj", t.target_body.vertices, t.target_body.triangles);
				const SimMesh mesh = assemble_sim_mesh(t.spec);
				write_obj(out / "target.obj", t.target.positions, sim_triangles(mesh));
				json pins = json::array();
				for (const Panel &p : t.spec.panels)
				{
					std::vector<int> top;
					for (int i = 0; i <= prm.nx; ++i)
						top.push_back(i);
					pins.push_back({{"panel", p.id}, {"vertices", top}});
				}
				const json cfg = {{"garment", "garment.json"}, {"body", "body.obj"}, {"target", "target.obj"}, {"sim", {{"pins", pins}}}};
				write_file_atomic(out / "config.json", cfg.dump(2) + "\n");
			});
		}
	} // namespace

	int run_cli(int argc, char **argv)
	{
		setup_logging();
		CLI::App app{"Sewing pattern refitting by differentiable cloth simulation"};
		app.require_subcommand(1);
		app.set_version_flag("--version", PATTERNFIT_VERSION);

		fs::path config, out = "out";
		bool dry_run = false;
		int jobs = 1;
		auto *refit_cmd = app.add_subcommand("refit", "Refit the patterns of a garment to a target drape");
		refit_cmd->add_option("--config", config, "Run or batch config (JSON)")->required();
		refit_cmd->add_option("--out", out, "Output directory");
		refit_cmd->add_flag("--dry-run", dry_run, "Validate inputs and write the manifest only");
		refit_cmd->add_option("--jobs", jobs, "Parallel refits for batch configs")->check(CLI::PositiveNumber);

		std::string scope = "end2end";
		int steps = 10, samples = 16;
		auto *grad_cmd = app.add_subcommand("gradcheck", "Finite-difference checks of analytic gradients");
		grad_cmd->add_option("--config", config, "Run config (JSON)")->required();
		grad_cmd->add_option("--scope", scope, "cage, adjoint, losses or end2end")->check(CLI::IsMember({"cage", "adjoint", "losses", "end2end"}));
		grad_cmd->add_option("--steps", steps, "Simulation steps of the checked trajectory")->check(CLI::PositiveNumber);
		grad_cmd->add_option("--samples", samples, "Coordinates compared (0 = all)")->check(CLI::NonNegativeNumber);

		fs::path result_dir;
		auto *report_cmd = app.add_subcommand("report", "Summarize a refit result directory");
		report_cmd->add_option("dir", result_dir, "Result directory")->required();

		auto *validate_cmd = app.add_subcommand("validate", "Check a run config and its inputs");
		validate_cmd->add_option("--config", config, "Run config (JSON)")->required();

		TubeSkirtParams prm;
		auto *fixture_cmd = app.add_subcommand("fixture", "Write the tube skirt fixture");
		fixture_cmd->add_option("--out", out, "Output directory")->required();
		fixture_cmd->add_option("--nx", prm.nx, "Cells across each panel")->check(CLI::PositiveNumber);
		fixture_cmd->add_option("--ny", prm.ny, "Cells along the tube")->check(CLI::PositiveNumber);

		try
		{
			app.parse(argc, argv);
		}
		catch (const CLI::ParseError &e)
		{
			const int code = app.exit(e);
			return code == 0 ? 0 : 1;
		}

		if (*refit_cmd)
			return cmd_refit(config, out, dry_run, jobs);
		if (*grad_cmd)
			return cmd_gradcheck(config, scope, steps, samples);
		if (*report_cmd)
			return cmd_report(result_dir);
		if (*validate_cmd)
			return cmd_validate(config);
		return cmd_fixture(out, prm);
	}
} // namespace patternfit
