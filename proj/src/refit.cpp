#include <patternfit/refit.hpp>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <random>

namespace patternfit
{
	namespace
	{
		Vec2 vertex_mean(const Points2 &p) { return p.colwise().mean().transpose(); }

		double polygon_diameter(const Points2 &p)
		{
			double d = 0.0;
			for (Eigen::Index i = 0; i < p.rows(); ++i)
				for (Eigen::Index j = i + 1; j < p.rows(); ++j)
					d = std::max(d, (p.row(i) - p.row(j)).norm());
			return d;
		}

		double global_norm(const std::vector<Points2> &g)
		{
			double s = 0.0;
			for (const Points2 &p : g)
				s += p.squaredNorm();
			return std::sqrt(s);
		}

		Points2 mirrored_cage(const Points2 &a, const Eigen::Matrix2d &r, const Vec2 &t)
		{
			const Eigen::Index n = a.rows();
			Points2 b(n, 2);
			for (Eigen::Index j = 0; j < n; ++j)
				b.row(j) = (r * Vec2(a.row(n - 1 - j)) + t).transpose();
			return b;
		}

		void check_cage(const Points2 &cage_points, const Points2 &pattern, const std::string &panel, int iteration)
		{
			if (!polygon_is_simple(cage_points) || polygon_signed_area(cage_points) <= 0.0)
				throw NumericalError(fmt::format("iteration {}: cage of panel '{}' is no longer a simple counterclockwise polygon", iteration, panel));
			for (Eigen::Index i = 0; i < pattern.rows(); ++i)
				if (winding_number(cage_points, pattern.row(i)) == 0)
					throw NumericalError(fmt::format("iteration {}: cage of panel '{}' no longer encloses pattern vertex {}", iteration, panel, i));
		}
	} // namespace

	void RefitConfig::validate() const
	{
		if (max_iterations < 1)
			throw ValidationError("refit.max_iterations must be at least 1");
		if (!(learning_rate > 0.0))
			throw ValidationError("refit.learning_rate must be positive");
		if (!(rel_tol >= 0.0) || patience < 1)
			throw ValidationError("refit convergence settings must be positive");
		if (!(gradient_clip >= 0.0) || !(gradient_perturbation >= 0.0))
			throw ValidationError("refit.gradient_clip and refit.gradient_perturbation must be non-negative");
		if (!(cage_margin_fraction > 0.0))
			throw ValidationError("refit.cage_margin_fraction must be positive");
		if (cage_max_vertices < 4)
			throw ValidationError("refit.cage_max_vertices must be at least 4");
		if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_epsilon > 0.0))
			throw ValidationError("refit Adam parameters out of range");
		sim.validate();
		loss.validate();
	}

	CageState make_cage_state(const std::vector<Points2> &cage_points)
	{
		CageState s;
		s.cage_points = cage_points;
		for (const Points2 &z : cage_points)
		{
			s.m.push_back(Points2::Zero(z.rows(), 2));
			s.v.push_back(Points2::Zero(z.rows(), 2));
		}
		return s;
	}

	double initial_global_scale(const GarmentSpec &spec, const SimMesh &mesh, const Points3 &target)
	{
		if (target.rows() != mesh.num_vertices)
			throw ValidationError("target drape vertex count does not match the simulation mesh");
		double sum = 0.0;
		for (const SimTriangle &t : mesh.triangles)
		{
			const Points2 &pat = spec.panels[t.panel].vertices;
			const double rest = triangle_area(Vec2(pat.row(t.local[0])), Vec2(pat.row(t.local[1])), Vec2(pat.row(t.local[2])));
			if (!(rest > 0.0))
				throw ValidationError("initial scale: degenerate rest triangle in panel '" + spec.panels[t.panel].id + "'");
			sum += triangle_area(Vec3(target.row(t.v[0])), Vec3(target.row(t.v[1])), Vec3(target.row(t.v[2]))) / rest;
		}
		return std::sqrt(sum / double(mesh.triangles.size()));
	}

	Points2 scale_about_centroid(const Points2 &points, const Vec2 &centroid, double s)
	{
		return ((points.rowwise() - centroid.transpose()) * s).rowwise() + centroid.transpose();
	}

	std::vector<Points2> symmetrize_gradient(const std::vector<Points2> &d_cage, const std::vector<CagePair> &pairs)
	{
		std::vector<Points2> out = d_cage;
		for (const CagePair &pair : pairs)
		{
			const Points2 &ga = d_cage[pair.a], &gb = d_cage[pair.b];
			if (ga.rows() != gb.rows() || Eigen::Index(pair.vertex_map.size()) != ga.rows())
				throw ValidationError(fmt::format("symmetrize_gradient: cages {} and {} do not correspond", pair.a, pair.b));
			const Eigen::Matrix2d &r = pair.reflection;
			for (Eigen::Index i = 0; i < ga.rows(); ++i)
			{
				const int j = pair.vertex_map[i];
				const Vec2 avg = 0.5 * (Vec2(ga.row(i)) + r.transpose() * Vec2(gb.row(j)));
				out[pair.a].row(i) = avg.transpose();
				out[pair.b].row(j) = (r * avg).transpose();
			}
		}
		return out;
	}

	std::vector<Points2> update_step(CageState &state, const std::vector<Points2> &d_cage, const RefitConfig &cfg)
	{
		if (d_cage.size() != state.cage_points.size())
			throw ValidationError("update_step: panel count mismatch");
		for (const Points2 &g : d_cage)
			if (!g.allFinite())
				throw NumericalError("update_step: non-finite cage gradient");
		double clip = 1.0;
		const double norm = global_norm(d_cage);
		if (cfg.gradient_clip > 0.0 && norm > cfg.gradient_clip)
			clip = cfg.gradient_clip / norm;

		state.steps += 1;
		std::vector<Points2> steps;
		for (size_t p = 0; p < d_cage.size(); ++p)
		{
			const Points2 g = clip * d_cage[p];
			Points2 step;
			if (cfg.optimizer == OptimizerKind::GradientDescent)
				step = -cfg.learning_rate * g;
			else
			{
				state.m[p] = cfg.adam_beta1 * state.m[p] + (1.0 - cfg.adam_beta1) * g;
				state.v[p] = cfg.adam_beta2 * state.v[p] + (1.0 - cfg.adam_beta2) * g.cwiseProduct(g);
				const double c1 = 1.0 - std::pow(cfg.adam_beta1, state.steps);
				const double c2 = 1.0 - std::pow(cfg.adam_beta2, state.steps);
				step = -cfg.learning_rate * (state.m[p] / c1).array() / ((state.v[p] / c2).array().sqrt() + cfg.adam_epsilon);
			}
			state.cage_points[p] += step;
			steps.push_back(std::move(step));
		}
		return steps;
	}

	std::vector<Cage> build_cages(const GarmentSpec &spec, const RefitConfig &cfg, std::vector<CagePair> &pairs)
	{
		const size_t np = spec.panels.size();
		std::vector<Cage> cages(np);
		std::vector<char> done(np, 0);
		auto own_cage = [&](int p) {
			const Panel &panel = spec.panels[p];
			for (const CageOverride &o : spec.cages)
				if (o.panel == panel.id)
					return make_cage(panel.id, o.vertices);
			const double margin = cfg.cage_margin_fraction * polygon_diameter(panel.vertices);
			return build_cage(panel, margin, cfg.cage_max_vertices, cfg.cage_min_vertices);
		};

		pairs.clear();
		for (const SymmetryPair &sp : detect_flip_symmetry(spec))
		{
			const int a = spec.panel_index(sp.a), b = spec.panel_index(sp.b);
			if (done[a] || done[b])
				continue;
			cages[a] = own_cage(a);
			for (const CageOverride &o : spec.cages)
				if (o.panel == sp.b)
					spdlog::warn("cage override of panel '{}' ignored: it mirrors panel '{}'", sp.b, sp.a);
			cages[b] = make_cage(sp.b, mirrored_cage(cages[a].vertices, sp.reflection, sp.translation));
			done[a] = done[b] = 1;
			CagePair cp;
			cp.a = a;
			cp.b = b;
			cp.reflection = sp.reflection;
			cp.translation = sp.translation;
			const int n = cages[a].size();
			for (int i = 0; i < n; ++i)
				cp.vertex_map.push_back(n - 1 - i);
			pairs.push_back(std::move(cp));
		}
		for (size_t p = 0; p < np; ++p)
			if (!done[p])
				cages[p] = own_cage(int(p));
		return cages;
	}

	RefitResult refit(const GarmentSpec &spec_in, const BodyMesh &body, const TargetDrape &target, const RefitConfig &cfg,
					  const IterationCallback &on_iteration)
	{
		cfg.validate();
		RefitResult res;
		res.spec = spec_in;
		GarmentSpec &spec = res.spec;
		const size_t np = spec.panels.size();

		SimMesh mesh = assemble_sim_mesh(spec);
		if (target.positions.rows() != mesh.num_vertices)
			throw ValidationError(fmt::format("target drape has {} vertices, simulation mesh has {}", target.positions.rows(), mesh.num_vertices));
		set_pinned(mesh, cfg.sim.pinned);
		const BodyQuery body_query(body);
		const std::vector<VertexClass> classes = classify_vertices(spec);
		res.target_areas = target_panel_areas(spec, mesh, target);
		res.quality_before = pattern_quality_report(spec);

		std::vector<Points2> reference;
		for (const Panel &p : spec.panels)
			reference.push_back(p.vertices);

		res.symmetry_pairs = detect_flip_symmetry(spec);
		std::vector<CagePair> pairs;
		std::vector<Cage> cages = build_cages(spec, cfg, pairs);

		res.scale = cfg.global_scale ? initial_global_scale(spec, mesh, target.positions) : 1.0;
		spdlog::info("initial global scale {:.6f}", res.scale);
		std::vector<CageCoords> coords(np);
		std::vector<Eigen::MatrixXd> jacobians(np);
		std::vector<Points2> initial_cage_points(np);
		for (size_t p = 0; p < np; ++p)
		{
			const Vec2 c = vertex_mean(reference[p]);
			const Points2 pattern = scale_about_centroid(reference[p], c, res.scale);
			cages[p] = make_cage(cages[p].panel_id, scale_about_centroid(cages[p].vertices, c, res.scale));
			coords[p] = compute_green_coords(cages[p], pattern);
			jacobians[p] = cage_jacobian(coords[p], cages[p], cages[p].vertices);
			initial_cage_points[p] = cages[p].vertices;
		}
		res.cages = cages;

		CageState state = make_cage_state(initial_cage_points);
		Points3 warm = target.positions;
		std::vector<double> best_so_far;
		res.best_loss = std::numeric_limits<double>::infinity();
		res.status = RefitStatus::MaxIterations;
		std::vector<Points2> best_patterns;

		for (int it = 0; it < cfg.max_iterations; ++it)
		{
			const auto t0 = std::chrono::steady_clock::now();
			std::vector<Points2> patterns(np);
			for (size_t p = 0; p < np; ++p)
			{
				patterns[p] = deform(coords[p], cages[p], state.cage_points[p]);
				check_cage(state.cage_points[p], patterns[p], spec.panels[p].id, it);
			}
			try
			{
				set_rest_shape(mesh, patterns);
			}
			catch (const NumericalError &e)
			{
				throw NumericalError(fmt::format("iteration {}: {}", it, e.what()));
			}

			SimState s0 = initial_state(mesh, warm);
			auto [final_state, traj] = [&] {
				try
				{
					return drape_to_equilibrium(s0, mesh, body_query, cfg.sim);
				}
				catch (const NumericalError &e)
				{
					throw NumericalError(fmt::format("iteration {}: {}", it, e.what()));
				}
			}();

			const LossBreakdown loss = total_loss(final_state.x, patterns, reference, target, res.target_areas, spec, classes, cfg.loss);
			if (!std::isfinite(loss.total))
				throw NumericalError(fmt::format("iteration {}: non-finite loss", it));

			IterationRecord rec;
			rec.iteration = it;
			rec.total = loss.total;
			rec.shape_match = loss.shape_match;
			rec.curvature = loss.curvature;
			rec.pattern_match = loss.pattern_match;
			rec.total_area = loss.total_area;
			rec.drape_steps = traj.num_steps();
			rec.drape_converged = traj.status == DrapeStatus::Converged;

			if (loss.total < res.best_loss)
			{
				res.best_loss = loss.total;
				res.best_iteration = it;
				res.best_breakdown = loss;
				res.drape = final_state.x;
				res.best_cage_points = state.cage_points;
				best_patterns = patterns;
			}
			best_so_far.push_back(res.best_loss);

			bool converged = false;
			if (it >= cfg.patience)
			{
				const double prev = best_so_far[it - cfg.patience];
				converged = prev - res.best_loss <= cfg.rel_tol * prev;
			}
			if (converged || it + 1 == cfg.max_iterations)
			{
				rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
				res.history.push_back(rec);
				if (on_iteration)
					on_iteration(rec);
				if (converged)
					res.status = RefitStatus::Converged;
				break;
			}

			AdjointResult adj;
			try
			{
				adj = adjoint_sweep(traj, mesh, cfg.sim, loss.grad3);
			}
			catch (const NumericalError &e)
			{
				throw NumericalError(fmt::format("iteration {}: {}", it, e.what()));
			}
			std::vector<Points2> d_rest = rest_shape_pullback(mesh, adj.rest);
			for (size_t p = 0; p < np; ++p)
				d_rest[p] += loss.grad2[p];
			std::vector<Points2> d_cage = chain_to_cage(d_rest, jacobians);

			if (cfg.gradient_perturbation > 0.0)
			{
				std::mt19937_64 rng(cfg.perturbation_seed * 1000003ull + unsigned(it));
				std::normal_distribution<double> normal(0.0, 1.0);
				size_t count = 0;
				for (const Points2 &g : d_cage)
					count += size_t(g.size());
				const double sigma = cfg.gradient_perturbation * global_norm(d_cage) / std::sqrt(double(count));
				for (Points2 &g : d_cage)
					for (Eigen::Index i = 0; i < g.size(); ++i)
						g.data()[i] += sigma * normal(rng);
			}
			if (cfg.symmetry)
				d_cage = symmetrize_gradient(d_cage, pairs);
			rec.grad_norm = global_norm(d_cage);

			const std::vector<Points2> before = state.cage_points;
			std::vector<Points2> step = update_step(state, d_cage, cfg);
			if (cfg.symmetry)
			{
				step = symmetrize_gradient(step, pairs);
				for (size_t p = 0; p < np; ++p)
					state.cage_points[p] = before[p] + step[p];
			}
			rec.step_norm = global_norm(step);
			warm = final_state.x;

			rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
			res.history.push_back(rec);
			if (on_iteration)
				on_iteration(rec);
		}

		for (size_t p = 0; p < np; ++p)
			spec.panels[p].vertices = best_patterns[p];
		// Reference drape of the output is the refitted equilibrium.
		spec.reference_drape3d = res.drape;
		spec.cages.clear();
		res.quality_after = pattern_quality_report(spec);
		return res;
	}

	double max_mirror_error(const GarmentSpec &spec, const std::vector<SymmetryPair> &pairs)
	{
		double err = 0.0;
		for (const SymmetryPair &pair : pairs)
		{
			const int a = spec.panel_index(pair.a), b = spec.panel_index(pair.b);
			if (a < 0 || b < 0)
				continue;
			const Points2 mirrored = mirror_points(pair, spec.panels[a].vertices);
			for (Eigen::Index i = 0; i < mirrored.rows(); ++i)
				err = std::max(err, (mirrored.row(i) - spec.panels[b].vertices.row(pair.correspondence[i])).norm());
		}
		return err;
	}

	double max_seam_length_mismatch(const GarmentSpec &spec)
	{
		double worst = 0.0;
		for (const Seam &seam : spec.seams)
		{
			auto length = [&](const SeamSide &side) {
				const Points2 &v = spec.panels[spec.panel_index(side.panel)].vertices;
				double l = 0.0;
				for (size_t i = 0; i + 1 < side.vertices.size(); ++i)
					l += (v.row(side.vertices[i + 1]) - v.row(side.vertices[i])).norm();
				return l;
			};
			const double la = length(seam.side_a), lb = length(seam.side_b);
			worst = std::max(worst, std::abs(la - lb) / std::max(la, lb));
		}
		return worst;
	}

	std::vector<double> panel_area_errors(const GarmentSpec &spec, const std::vector<double> &target_areas)
	{
		std::vector<double> out;
		for (size_t p = 0; p < spec.panels.size(); ++p)
			out.push_back(std::abs(panel_area(spec.panels[p]) - target_areas[p]) / target_areas[p]);
		return out;
	}
} // namespace patternfit
