#include <patternfit/losses.hpp>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>

namespace patternfit
{
	namespace
	{
		Vec2 perp(const Vec2 &v) { return {-v.y(), v.x()}; }

		std::vector<Points2> zeros_like(const std::vector<Points2> &p)
		{
			std::vector<Points2> out;
			for (const Points2 &q : p)
				out.push_back(Points2::Zero(q.rows(), 2));
			return out;
		}

		void check_patterns(const GarmentSpec &spec, const std::vector<Points2> &pats, const char *what)
		{
			if (pats.size() != spec.panels.size())
				throw ValidationError(fmt::format("{}: expected {} panels, got {}", what, spec.panels.size(), pats.size()));
			for (size_t p = 0; p < pats.size(); ++p)
				if (pats[p].rows() != spec.panels[p].num_vertices())
					throw ValidationError(fmt::format("{}: panel '{}' vertex count mismatch", what, spec.panels[p].id));
		}
	} // namespace

	void LossConfig::validate() const
	{
		for (double w : {alpha, beta, gamma, w_curv, w_pm, w_ta})
			if (!(w >= 0.0))
				throw ValidationError("loss weights must be non-negative");
		if (gamma > 0.1 * std::min(alpha, beta))
			spdlog::warn("loss.gamma = {} exceeds 0.1 * min(alpha, beta); interior matching will dominate", gamma);
	}

	std::vector<VertexClass> classify_vertices(const GarmentSpec &spec)
	{
		const std::vector<int> off = spec.panel_offsets();
		std::vector<VertexClass> cls(off.back(), VertexClass::Interior);
		for (size_t p = 0; p < spec.panels.size(); ++p)
		{
			const Panel &panel = spec.panels[p];
			const auto loops = panel.boundary_loops.empty() ? compute_boundary_loops(panel) : panel.boundary_loops;
			for (const auto &loop : loops)
				for (int v : loop)
					cls[off[p] + v] = VertexClass::Boundary;
		}
		for (const Seam &seam : spec.seams)
			for (const SeamSide *side : {&seam.side_a, &seam.side_b})
			{
				const int p = spec.panel_index(side->panel);
				for (int v : side->vertices)
					cls[off[p] + v] = VertexClass::Seam;
			}
		return cls;
	}

	Loss3 loss_shape_match(const Points3 &x, const Points3 &target, const std::vector<VertexClass> &classes, const LossConfig &cfg)
	{
		if (x.rows() != target.rows() || x.rows() != Eigen::Index(classes.size()))
			throw ValidationError(fmt::format("shape match: drape has {} vertices, target {}, classes {}", x.rows(), target.rows(), classes.size()));
		Loss3 out;
		out.grad = Points3::Zero(x.rows(), 3);
		for (Eigen::Index i = 0; i < x.rows(); ++i)
		{
			const double w = classes[i] == VertexClass::Seam ? cfg.beta : classes[i] == VertexClass::Boundary ? cfg.alpha : cfg.gamma;
			const Vec3 d = x.row(i) - target.row(i);
			out.value += w * d.squaredNorm();
			out.grad.row(i) = 2.0 * w * d.transpose();
		}
		return out;
	}

	Eigen::Matrix2d fit_similarity(const Vec2 &e1, const Vec2 &e2, const Vec2 &e1_rest, const Vec2 &e2_rest)
	{
		const double d = e1_rest.squaredNorm() + e2_rest.squaredNorm();
		if (!(d > 0.0))
			throw ValidationError("fit_similarity: both rest edges have zero length");
		const double a = e1.dot(e1_rest) + e2.dot(e2_rest);
		const double b = cross2(e1_rest, e1) + cross2(e2_rest, e2);
		Eigen::Matrix2d t;
		t << a, -b, b, a;
		return t / d;
	}

	Loss2 loss_boundary_curvature(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<Points2> &rest)
	{
		check_patterns(spec, current, "curvature loss");
		check_patterns(spec, rest, "curvature loss");
		Loss2 out;
		out.grad = zeros_like(current);
		for (size_t p = 0; p < spec.panels.size(); ++p)
		{
			const Panel &panel = spec.panels[p];
			const Points2 &x = current[p], &xr = rest[p];
			Points2 &g = out.grad[p];
			for (const auto &loop : panel.boundary_loops)
			{
				const int n = int(loop.size());
				for (int k = 0; k < n; ++k)
				{
					const int i = loop[k], next = loop[(k + 1) % n], prev = loop[(k + n - 1) % n];
					const Vec2 e1 = x.row(next) - x.row(i), e2 = x.row(prev) - x.row(i);
					const Vec2 r1 = xr.row(next) - xr.row(i), r2 = xr.row(prev) - xr.row(i);
					const double d = r1.squaredNorm() + r2.squaredNorm();
					if (!(d > 0.0))
						throw ValidationError(fmt::format("curvature loss: degenerate rest edges at vertex {} of panel '{}'", i, panel.id));
					const Eigen::Matrix2d t = fit_similarity(e1, e2, r1, r2);
					const Vec2 rs = r1 + r2;
					const Vec2 res = (e1 + e2) - t * rs;
					out.value += res.squaredNorm();

					const double ca = rs.dot(res), cb = perp(rs).dot(res);
					const Vec2 g1 = 2.0 * res - (2.0 / d) * (ca * r1 + cb * Vec2(-r1.y(), r1.x()));
					const Vec2 g2 = 2.0 * res - (2.0 / d) * (ca * r2 + cb * Vec2(-r2.y(), r2.x()));
					g.row(next) += g1.transpose();
					g.row(prev) += g2.transpose();
					g.row(i) -= (g1 + g2).transpose();
				}
			}
		}
		return out;
	}

	Loss2 loss_pattern_match(const GarmentSpec &spec, const std::vector<Points2> &current)
	{
		check_patterns(spec, current, "pattern match loss");
		Loss2 out;
		out.grad = zeros_like(current);
		for (const Seam &seam : spec.seams)
		{
			const int pa = spec.panel_index(seam.side_a.panel), pb = spec.panel_index(seam.side_b.panel);
			const auto &va = seam.side_a.vertices, &vb = seam.side_b.vertices;
			for (size_t i = 0; i + 1 < va.size(); ++i)
			{
				const Vec2 ea = current[pa].row(va[i + 1]) - current[pa].row(va[i]);
				const Vec2 eb = current[pb].row(vb[i + 1]) - current[pb].row(vb[i]);
				const double diff = ea.squaredNorm() - eb.squaredNorm();
				out.value += diff * diff;
				const Vec2 ga = 4.0 * diff * ea, gb = -4.0 * diff * eb;
				out.grad[pa].row(va[i + 1]) += ga.transpose();
				out.grad[pa].row(va[i]) -= ga.transpose();
				out.grad[pb].row(vb[i + 1]) += gb.transpose();
				out.grad[pb].row(vb[i]) -= gb.transpose();
			}
		}
		return out;
	}

	Loss2 loss_total_area(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<double> &target_areas)
	{
		check_patterns(spec, current, "total area loss");
		if (target_areas.size() != spec.panels.size())
			throw ValidationError("total area loss: one target area per panel required");
		Loss2 out;
		out.grad = zeros_like(current);
		for (size_t p = 0; p < spec.panels.size(); ++p)
		{
			const Panel &panel = spec.panels[p];
			const Points2 &x = current[p];
			const double diff = target_areas[p] - panel_area(panel, x);
			out.value += diff * diff;
			const double scale = -2.0 * diff * 0.5;
			for (const Tri &t : panel.triangles)
				for (int k = 0; k < 3; ++k)
				{
					const Vec2 a = x.row(t[(k + 1) % 3]), b = x.row(t[(k + 2) % 3]);
					out.grad[p].row(t[k]) += scale * Vec2(a.y() - b.y(), b.x() - a.x()).transpose();
				}
		}
		return out;
	}

	std::vector<double> target_panel_areas(const GarmentSpec &spec, const SimMesh &mesh, const TargetDrape &target)
	{
		std::vector<double> areas;
		std::vector<double> from_positions;
		if (target.positions.rows() == mesh.num_vertices)
			from_positions = panel_areas_3d(mesh, target.positions);
		for (size_t p = 0; p < spec.panels.size(); ++p)
		{
			auto it = target.total_area_per_panel.find(spec.panels[p].id);
			if (it != target.total_area_per_panel.end())
				areas.push_back(it->second);
			else if (!from_positions.empty())
				areas.push_back(from_positions[p]);
			else
				throw ValidationError("no target area for panel '" + spec.panels[p].id + "'");
		}
		return areas;
	}

	LossBreakdown total_loss(const Points3 &x, const std::vector<Points2> &current, const std::vector<Points2> &rest, const TargetDrape &target,
							 const std::vector<double> &target_areas, const GarmentSpec &spec, const std::vector<VertexClass> &classes,
							 const LossConfig &cfg)
	{
		LossBreakdown out;
		const Loss3 sm = loss_shape_match(x, target.positions, classes, cfg);
		const Loss2 curv = loss_boundary_curvature(spec, current, rest);
		const Loss2 pm = loss_pattern_match(spec, current);
		const Loss2 ta = loss_total_area(spec, current, target_areas);
		out.shape_match = sm.value;
		out.curvature = curv.value;
		out.pattern_match = pm.value;
		out.total_area = ta.value;
		out.total = sm.value + cfg.w_curv * curv.value + cfg.w_pm * pm.value + cfg.w_ta * ta.value;
		out.grad3 = sm.grad;
		out.grad2 = zeros_like(current);
		for (size_t p = 0; p < current.size(); ++p)
			out.grad2[p] = cfg.w_curv * curv.grad[p] + cfg.w_pm * pm.grad[p] + cfg.w_ta * ta.grad[p];
		return out;
	}
} // namespace patternfit
