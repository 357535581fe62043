#include <patternfit/mesh_io.hpp>
#include <patternfit/run_config.hpp>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <set>

namespace patternfit
{
	using nlohmann::json;

	namespace
	{
		void check_keys(const json &obj, const std::string &where, std::initializer_list<const char *> allowed)
		{
			if (!obj.is_object())
				throw ValidationError(fmt::format("config: '{}' must be an object", where));
			const std::set<std::string> ok(allowed.begin(), allowed.end());
			for (const auto &[key, value] : obj.items())
				if (!ok.count(key))
					throw ValidationError(fmt::format("config: unknown key '{}' in '{}'", key, where));
		}

		template <class T>
		void read(const json &obj, const char *key, T &out)
		{
			if (obj.contains(key))
				out = obj.at(key).get<T>();
		}

		std::filesystem::path resolve(const std::filesystem::path &base, const std::string &p)
		{
			const std::filesystem::path path(p);
			return path.is_absolute() ? path : base / path;
		}
	} // namespace

	RunConfig run_config_from_json(const json &doc, const std::filesystem::path &base_dir)
	{
		RunConfig cfg;
		try
		{
			check_keys(doc, "config", {"garment", "body", "target", "target_areas", "sim", "loss", "refit"});
			cfg.garment = resolve(base_dir, doc.at("garment").get<std::string>());
			cfg.body = resolve(base_dir, doc.at("body").get<std::string>());
			cfg.target = resolve(base_dir, doc.at("target").get<std::string>());
			read(doc, "target_areas", cfg.target_areas);

			SimConfig &sim = cfg.refit.sim;
			if (doc.contains("sim"))
			{
				const json &s = doc.at("sim");
				check_keys(s, "sim", {"dt", "tau", "iterations", "v_tol", "max_steps", "gravity", "collision_margin", "pins"});
				read(s, "dt", sim.dt);
				read(s, "tau", sim.tau);
				read(s, "iterations", sim.iterations);
				read(s, "v_tol", sim.v_tol);
				read(s, "max_steps", sim.max_steps);
				if (s.contains("gravity"))
				{
					const auto g = s.at("gravity").get<std::vector<double>>();
					if (g.size() != 3)
						throw ValidationError("config: sim.gravity must have 3 components");
					sim.gravity = Vec3(g[0], g[1], g[2]);
				}
				if (s.contains("collision_margin"))
					cfg.body_margin = s.at("collision_margin").get<double>();
				if (s.contains("pins"))
					for (const json &p : s.at("pins"))
					{
						check_keys(p, "sim.pins[]", {"panel", "vertices"});
						cfg.pins.push_back({p.at("panel").get<std::string>(), p.at("vertices").get<std::vector<int>>()});
					}
			}
			sim.collision_margin = cfg.body_margin;

			LossConfig &loss = cfg.refit.loss;
			if (doc.contains("loss"))
			{
				const json &l = doc.at("loss");
				check_keys(l, "loss", {"alpha", "beta", "gamma", "w_curv", "w_pm", "w_ta"});
				read(l, "alpha", loss.alpha);
				read(l, "beta", loss.beta);
				read(l, "gamma", loss.gamma);
				read(l, "w_curv", loss.w_curv);
				read(l, "w_pm", loss.w_pm);
				read(l, "w_ta", loss.w_ta);
			}

			RefitConfig &r = cfg.refit;
			if (doc.contains("refit"))
			{
				const json &j = doc.at("refit");
				check_keys(j, "refit",
						   {"max_iterations", "learning_rate", "optimizer", "adam_beta1", "adam_beta2", "adam_epsilon", "gradient_clip", "rel_tol",
							"patience", "symmetry", "global_scale", "cage", "gradient_perturbation", "perturbation_seed"});
				read(j, "max_iterations", r.max_iterations);
				read(j, "learning_rate", r.learning_rate);
				if (j.contains("optimizer"))
				{
					const std::string kind = j.at("optimizer").get<std::string>();
					if (kind == "adam")
						r.optimizer = OptimizerKind::Adam;
					else if (kind == "gd")
						r.optimizer = OptimizerKind::GradientDescent;
					else
						throw ValidationError("config: refit.optimizer must be 'adam' or 'gd'");
				}
				read(j, "adam_beta1", r.adam_beta1);
				read(j, "adam_beta2", r.adam_beta2);
				read(j, "adam_epsilon", r.adam_epsilon);
				read(j, "gradient_clip", r.gradient_clip);
				read(j, "rel_tol", r.rel_tol);
				read(j, "patience", r.patience);
				read(j, "symmetry", r.symmetry);
				read(j, "global_scale", r.global_scale);
				read(j, "gradient_perturbation", r.gradient_perturbation);
				read(j, "perturbation_seed", r.perturbation_seed);
				if (j.contains("cage"))
				{
					const json &c = j.at("cage");
					check_keys(c, "refit.cage", {"margin_fraction", "max_vertices", "min_vertices"});
					read(c, "margin_fraction", r.cage_margin_fraction);
					read(c, "max_vertices", r.cage_max_vertices);
					read(c, "min_vertices", r.cage_min_vertices);
				}
			}
		}
		catch (const json::exception &e)
		{
			throw ValidationError(std::string("config: ") + e.what());
		}
		cfg.refit.sim.validate();
		cfg.refit.validate();
		cfg.snapshot = run_config_to_json(cfg);
		return cfg;
	}

	RunConfig load_run_config(const std::filesystem::path &path)
	{
		const std::string text = read_file(path);
		json doc;
		try
		{
			doc = json::parse(text);
		}
		catch (const json::parse_error &e)
		{
			throw ValidationError("'" + path.string() + "': " + e.what());
		}
		try
		{
			RunConfig cfg = run_config_from_json(doc, path.parent_path());
			cfg.source = path;
			return cfg;
		}
		catch (const ValidationError &e)
		{
			throw ValidationError("'" + path.string() + "': " + e.what());
		}
	}

	json run_config_to_json(const RunConfig &cfg)
	{
		const RefitConfig &r = cfg.refit;
		const SimConfig &s = r.sim;
		json pins = json::array();
		for (const PinGroup &p : cfg.pins)
			pins.push_back({{"panel", p.panel}, {"vertices", p.vertices}});
		json sim = {{"dt", s.dt},
					{"tau", s.tau},
					{"iterations", s.iterations},
					{"v_tol", s.v_tol},
					{"max_steps", s.max_steps},
					{"gravity", {s.gravity.x(), s.gravity.y(), s.gravity.z()}},
					{"pins", pins}};
		if (cfg.body_margin)
			sim["collision_margin"] = *cfg.body_margin;
		json doc = {
			{"garment", cfg.garment.string()},
			{"body", cfg.body.string()},
			{"target", cfg.target.string()},
			{"sim", sim},
			{"loss",
			 {{"alpha", r.loss.alpha}, {"beta", r.loss.beta}, {"gamma", r.loss.gamma}, {"w_curv", r.loss.w_curv}, {"w_pm", r.loss.w_pm}, {"w_ta", r.loss.w_ta}}},
			{"refit",
			 {{"max_iterations", r.max_iterations},
			  {"learning_rate", r.learning_rate},
			  {"optimizer", r.optimizer == OptimizerKind::Adam ? "adam" : "gd"},
			  {"adam_beta1", r.adam_beta1},
			  {"adam_beta2", r.adam_beta2},
			  {"adam_epsilon", r.adam_epsilon},
			  {"gradient_clip", r.gradient_clip},
			  {"rel_tol", r.rel_tol},
			  {"patience", r.patience},
			  {"symmetry", r.symmetry},
			  {"global_scale", r.global_scale},
			  {"gradient_perturbation", r.gradient_perturbation},
			  {"perturbation_seed", r.perturbation_seed},
			  {"cage", {{"margin_fraction", r.cage_margin_fraction}, {"max_vertices", r.cage_max_vertices}, {"min_vertices", r.cage_min_vertices}}}}}};
		if (!cfg.target_areas.empty())
			doc["target_areas"] = cfg.target_areas;
		return doc;
	}

	std::vector<std::filesystem::path> batch_entries(const std::filesystem::path &path)
	{
		const std::string text = read_file(path);
		json doc;
		try
		{
			doc = json::parse(text);
		}
		catch (const json::parse_error &e)
		{
			throw ValidationError("'" + path.string() + "': " + e.what());
		}
		if (!doc.is_object() || !doc.contains("runs"))
			return {path};
		std::vector<std::filesystem::path> out;
		try
		{
			for (const json &r : doc.at("runs"))
				out.push_back(resolve(path.parent_path(), r.get<std::string>()));
		}
		catch (const json::exception &e)
		{
			throw ValidationError("'" + path.string() + "': runs must be a list of paths: " + e.what());
		}
		return out;
	}

	RunInputs load_run_inputs(const RunConfig &cfg)
	{
		RunInputs in;
		in.spec = load_garment_spec(cfg.garment, &in.load_report);
		for (const SeamResample &r : in.load_report.resampled)
			spdlog::warn("seam '{}': inserted {} vertices on panel '{}'", r.seam, r.inserted, r.panel);

		const ObjMesh body = read_obj(cfg.body);
		in.body.vertices = body.vertices;
		in.body.triangles = body.triangles;
		if (cfg.body_margin)
			in.body.collision_margin = *cfg.body_margin;

		const ObjMesh target = read_obj(cfg.target);
		const int nv = in.spec.num_vertices();
		if (target.vertices.rows() != nv)
			throw ValidationError(fmt::format("'{}': target drape has {} vertices, garment has {}", cfg.target.string(), target.vertices.rows(), nv));
		in.target.positions = target.vertices;
		for (const auto &[panel, area] : cfg.target_areas)
		{
			if (in.spec.panel_index(panel) < 0)
				throw ValidationError("config: target_areas names unknown panel '" + panel + "'");
			if (!(area > 0.0))
				throw ValidationError("config: target area of panel '" + panel + "' must be positive");
		}
		in.target.total_area_per_panel = cfg.target_areas;

		in.refit = cfg.refit;
		const std::vector<int> offsets = in.spec.panel_offsets();
		for (const PinGroup &g : cfg.pins)
		{
			const int p = in.spec.panel_index(g.panel);
			if (p < 0)
				throw ValidationError("config: pins reference unknown panel '" + g.panel + "'");
			for (int v : g.vertices)
			{
				if (v < 0 || v >= in.spec.panels[p].num_vertices())
					throw ValidationError(fmt::format("config: pinned vertex {} out of range on panel '{}'", v, g.panel));
				in.refit.sim.pinned.push_back(offsets[p] + v);
			}
		}
		return in;
	}
} // namespace patternfit
