#include <patternfit/pattern.hpp>

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

namespace patternfit
{
	namespace
	{
		double loop_signed_area(const Points2 &v, const std::vector<int> &loop)
		{
			double a = 0.0;
			for (size_t i = 0; i < loop.size(); ++i)
			{
				const Vec2 p = v.row(loop[i]);
				const Vec2 q = v.row(loop[(i + 1) % loop.size()]);
				a += cross2(p, q);
			}
			return 0.5 * a;
		}

		bool segments_cross(const Vec2 &a, const Vec2 &b, const Vec2 &c, const Vec2 &d)
		{
			const double d1 = cross2(b - a, c - a);
			const double d2 = cross2(b - a, d - a);
			const double d3 = cross2(d - c, a - c);
			const double d4 = cross2(d - c, b - c);
			return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
		}

		double panel_diameter(const Panel &panel)
		{
			if (panel.vertices.rows() == 0)
				return 0.0;
			const Vec2 lo = panel.vertices.colwise().minCoeff();
			const Vec2 hi = panel.vertices.colwise().maxCoeff();
			return (hi - lo).norm();
		}

		std::set<EdgeKey> boundary_edge_set(const Panel &panel)
		{
			std::set<EdgeKey> edges;
			for (const auto &loop : panel.boundary_loops)
				for (size_t i = 0; i < loop.size(); ++i)
					edges.insert(edge_key(loop[i], loop[(i + 1) % loop.size()]));
			return edges;
		}

		void check_triangles(const Panel &panel)
		{
			const int n = panel.num_vertices();
			const double diam = panel_diameter(panel);
			const double area_eps = 1e-14 * std::max(diam * diam, 1e-12);
			for (size_t t = 0; t < panel.triangles.size(); ++t)
			{
				const Tri &tri = panel.triangles[t];
				for (int k = 0; k < 3; ++k)
					if (tri[k] < 0 || tri[k] >= n)
						throw ValidationError("panel '" + panel.id + "': triangle " + std::to_string(t) + " references vertex "
											  + std::to_string(tri[k]) + " out of range");
				if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
					throw ValidationError("panel '" + panel.id + "': triangle " + std::to_string(t) + " repeats a vertex");
				const Vec2 p0 = panel.vertices.row(tri[0]), p1 = panel.vertices.row(tri[1]), p2 = panel.vertices.row(tri[2]);
				const double a = 0.5 * cross2(p1 - p0, p2 - p0);
				if (std::abs(a) <= area_eps)
					throw ValidationError("panel '" + panel.id + "': triangle " + std::to_string(t) + " has zero area");
				if (a < 0)
					throw ValidationError("panel '" + panel.id + "': triangle " + std::to_string(t)
										  + " has negative orientation (expected counterclockwise)");
			}
			std::vector<char> used(n, 0);
			for (const Tri &tri : panel.triangles)
				for (int k : tri)
					used[k] = 1;
			for (int i = 0; i < n; ++i)
				if (!used[i])
					throw ValidationError("panel '" + panel.id + "': vertex " + std::to_string(i) + " is not referenced by any triangle");
		}

		void check_loops_simple(const Panel &panel)
		{
			std::vector<std::pair<int, int>> segs;
			for (const auto &loop : panel.boundary_loops)
				for (size_t i = 0; i < loop.size(); ++i)
					segs.emplace_back(loop[i], loop[(i + 1) % loop.size()]);
			for (size_t i = 0; i < segs.size(); ++i)
				for (size_t j = i + 1; j < segs.size(); ++j)
				{
					const auto [a, b] = segs[i];
					const auto [c, d] = segs[j];
					if (a == c || a == d || b == c || b == d)
						continue;
					if (segments_cross(panel.vertices.row(a), panel.vertices.row(b), panel.vertices.row(c), panel.vertices.row(d)))
						throw ValidationError("panel '" + panel.id + "': boundary self-intersects between edges (" + std::to_string(a)
											  + "," + std::to_string(b) + ") and (" + std::to_string(c) + "," + std::to_string(d) + ")");
				}
		}

		void check_seam_side(const GarmentSpec &spec, const Seam &seam, const SeamSide &side, const std::set<EdgeKey> &boundary)
		{
			const int p = spec.panel_index(side.panel);
			if (p < 0)
				throw ValidationError("seam '" + seam.id + "' references unknown panel '" + side.panel + "'");
			const Panel &panel = spec.panels[p];
			if (side.vertices.size() < 2)
				throw ValidationError("seam '" + seam.id + "': side on panel '" + side.panel + "' needs at least two vertices");
			for (int v : side.vertices)
				if (v < 0 || v >= panel.num_vertices())
					throw ValidationError("seam '" + seam.id + "' references vertex " + std::to_string(v) + " out of range on panel '"
										  + side.panel + "'");
			for (size_t i = 0; i + 1 < side.vertices.size(); ++i)
				if (!boundary.count(edge_key(side.vertices[i], side.vertices[i + 1])))
					throw ValidationError("seam '" + seam.id + "': (" + std::to_string(side.vertices[i]) + ","
										  + std::to_string(side.vertices[i + 1]) + ") is not a boundary edge of panel '" + side.panel + "'");
		}

		// Splits boundary edge (u, v) of `panel`, returns the new vertex index.
		int split_boundary_edge(Panel &panel, int u, int v)
		{
			const int m = panel.num_vertices();
			const Vec2 mid = 0.5 * (Vec2(panel.vertices.row(u)) + Vec2(panel.vertices.row(v)));
			panel.vertices.conservativeResize(m + 1, Eigen::NoChange);
			panel.vertices.row(m) = mid;
			for (size_t t = 0; t < panel.triangles.size(); ++t)
			{
				Tri tri = panel.triangles[t];
				for (int k = 0; k < 3; ++k)
				{
					const int a = tri[k], b = tri[(k + 1) % 3], w = tri[(k + 2) % 3];
					if ((a == u && b == v) || (a == v && b == u))
					{
						panel.triangles[t] = {a, m, w};
						panel.triangles.push_back({m, b, w});
						return m;
					}
				}
			}
			throw ValidationError("panel '" + panel.id + "': seam edge (" + std::to_string(u) + "," + std::to_string(v)
								  + ") has no incident triangle");
		}
	} // namespace

	int GarmentSpec::panel_index(const std::string &id) const
	{
		for (size_t i = 0; i < panels.size(); ++i)
			if (panels[i].id == id)
				return int(i);
		return -1;
	}

	std::vector<int> GarmentSpec::panel_offsets() const
	{
		std::vector<int> off(panels.size() + 1, 0);
		for (size_t i = 0; i < panels.size(); ++i)
			off[i + 1] = off[i] + panels[i].num_vertices();
		return off;
	}

	int GarmentSpec::num_vertices() const { return panel_offsets().back(); }

	int GarmentSpec::num_triangles() const
	{
		int n = 0;
		for (const Panel &p : panels)
			n += int(p.triangles.size());
		return n;
	}

	double triangle_area(const Vec2 &p0, const Vec2 &p1, const Vec2 &p2) { return 0.5 * cross2(p1 - p0, p2 - p0); }

	double triangle_area(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2) { return 0.5 * (p1 - p0).cross(p2 - p0).norm(); }

	double panel_area(const Panel &panel) { return panel_area(panel, panel.vertices); }

	double panel_area(const Panel &panel, const Points2 &v)
	{
		double a = 0.0;
		for (const Tri &t : panel.triangles)
			a += triangle_area(Vec2(v.row(t[0])), Vec2(v.row(t[1])), Vec2(v.row(t[2])));
		return a;
	}

	double triangle_quality(const Vec2 &p0, const Vec2 &p1, const Vec2 &p2)
	{
		const double l2 = (p1 - p0).squaredNorm() + (p2 - p1).squaredNorm() + (p0 - p2).squaredNorm();
		if (!(l2 > 0.0))
			return 0.0;
		const double a = std::abs(triangle_area(p0, p1, p2));
		return std::clamp(4.0 * std::sqrt(3.0) * a / l2, 0.0, 1.0);
	}

	QualityReport pattern_quality_report(const GarmentSpec &spec)
	{
		QualityReport r;
		double sum = 0.0;
		int count = 0;
		r.min_quality = 1.0;
		for (const Panel &p : spec.panels)
			for (const Tri &t : p.triangles)
			{
				const double q = triangle_quality(p.vertices.row(t[0]), p.vertices.row(t[1]), p.vertices.row(t[2]));
				r.min_quality = std::min(r.min_quality, q);
				sum += q;
				++count;
			}
		if (count == 0)
			return {0.0, 0.0};
		r.mean_quality = sum / count;
		return r;
	}

	std::vector<std::vector<int>> compute_boundary_loops(const Panel &panel)
	{
		std::map<EdgeKey, int> count;
		std::set<std::pair<int, int>> directed;
		for (size_t t = 0; t < panel.triangles.size(); ++t)
		{
			const Tri &tri = panel.triangles[t];
			for (int k = 0; k < 3; ++k)
			{
				const int a = tri[k], b = tri[(k + 1) % 3];
				if (++count[edge_key(a, b)] > 2)
					throw ValidationError("panel '" + panel.id + "': non-manifold edge (" + std::to_string(a) + "," + std::to_string(b)
										  + ") shared by more than two triangles");
				if (!directed.insert({a, b}).second)
					throw ValidationError("panel '" + panel.id + "': inconsistent triangle orientation at edge (" + std::to_string(a) + ","
										  + std::to_string(b) + ")");
			}
		}

		std::map<int, int> next;
		for (const auto &[a, b] : directed)
		{
			if (directed.count({b, a}))
				continue;
			if (!next.emplace(a, b).second)
				throw ValidationError("panel '" + panel.id + "': non-manifold boundary vertex " + std::to_string(a));
		}

		std::vector<std::vector<int>> loops;
		std::set<int> visited;
		for (const auto &[start, unused] : next)
		{
			(void)unused;
			if (visited.count(start))
				continue;
			std::vector<int> loop;
			int cur = start;
			do
			{
				if (!visited.insert(cur).second)
					throw ValidationError("panel '" + panel.id + "': boundary loop through vertex " + std::to_string(cur) + " is not closed");
				loop.push_back(cur);
				auto it = next.find(cur);
				if (it == next.end())
					throw ValidationError("panel '" + panel.id + "': open boundary at vertex " + std::to_string(cur));
				cur = it->second;
			} while (cur != start);
			loops.push_back(std::move(loop));
		}

		std::stable_sort(loops.begin(), loops.end(), [&](const auto &l, const auto &r) {
			return std::abs(loop_signed_area(panel.vertices, l)) > std::abs(loop_signed_area(panel.vertices, r));
		});
		// Start each loop at its smallest index so that loops are canonical.
		for (auto &loop : loops)
			std::rotate(loop.begin(), std::min_element(loop.begin(), loop.end()), loop.end());
		return loops;
	}

	std::vector<SeamResample> resample_seams(GarmentSpec &spec)
	{
		std::vector<SeamResample> report;
		const bool has_drape = spec.reference_drape3d.rows() == spec.num_vertices();

		for (Seam &seam : spec.seams)
		{
			const size_t na = seam.side_a.vertices.size(), nb = seam.side_b.vertices.size();
			if (na == nb)
				continue;
			SeamSide &shorter = na < nb ? seam.side_a : seam.side_b;
			const size_t target = std::max(na, nb);
			const int p = spec.panel_index(shorter.panel);
			if (p < 0)
				throw ValidationError("seam '" + seam.id + "' references unknown panel '" + shorter.panel + "'");
			Panel &panel = spec.panels[p];
			panel.boundary_loops = compute_boundary_loops(panel);
			check_seam_side(spec, seam, shorter, boundary_edge_set(panel));

			SeamResample entry{seam.id, panel.id, 0};
			while (shorter.vertices.size() < target)
			{
				size_t best = 0;
				double best_len = -1.0;
				for (size_t i = 0; i + 1 < shorter.vertices.size(); ++i)
				{
					const double len = (panel.vertices.row(shorter.vertices[i]) - panel.vertices.row(shorter.vertices[i + 1])).norm();
					if (len > best_len + 1e-15)
					{
						best_len = len;
						best = i;
					}
				}
				const int u = shorter.vertices[best], v = shorter.vertices[best + 1];
				const std::vector<int> offsets = spec.panel_offsets();
				const int m = split_boundary_edge(panel, u, v);
				shorter.vertices.insert(shorter.vertices.begin() + long(best) + 1, m);

				if (has_drape)
				{
					Points3 &d = spec.reference_drape3d;
					const int insert_at = offsets[p + 1];
					Points3 grown(d.rows() + 1, 3);
					grown.topRows(insert_at) = d.topRows(insert_at);
					grown.row(insert_at) = 0.5 * (d.row(offsets[p] + u) + d.row(offsets[p] + v));
					grown.bottomRows(d.rows() - insert_at) = d.bottomRows(d.rows() - insert_at);
					d = std::move(grown);
				}
				++entry.inserted;
			}
			panel.boundary_loops = compute_boundary_loops(panel);
			spdlog::warn("seam '{}': resampled side on panel '{}' from {} to {} vertices", seam.id, panel.id, std::min(na, nb), target);
			report.push_back(entry);
		}
		return report;
	}

	std::pair<Eigen::Matrix2d, Vec2> fit_reflection(const Points2 &src, const Points2 &dst)
	{
		const Vec2 cs = src.colwise().mean();
		const Vec2 cd = dst.colwise().mean();
		const Eigen::Matrix2d flip = Eigen::Vector2d(1.0, -1.0).asDiagonal();
		double sdot = 0.0, scross = 0.0;
		for (Eigen::Index i = 0; i < src.rows(); ++i)
		{
			const Vec2 s = flip * (Vec2(src.row(i)) - cs);
			const Vec2 d = Vec2(dst.row(i)) - cd;
			sdot += s.dot(d);
			scross += cross2(s, d);
		}
		const double theta = std::atan2(scross, sdot);
		Eigen::Matrix2d rot;
		rot << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
		const Eigen::Matrix2d r = rot * flip;
		return {r, cd - r * cs};
	}

	Points2 mirror_points(const SymmetryPair &pair, const Points2 &points)
	{
		Points2 out(points.rows(), 2);
		for (Eigen::Index i = 0; i < points.rows(); ++i)
			out.row(i) = (pair.reflection * Vec2(points.row(i)) + pair.translation).transpose();
		return out;
	}

	void validate_garment(GarmentSpec &spec)
	{
		if (spec.panels.empty())
			throw ValidationError("garment has no panels");

		std::set<std::string> ids;
		for (Panel &panel : spec.panels)
		{
			if (!ids.insert(panel.id).second)
				throw ValidationError("duplicate panel id '" + panel.id + "'");
			if (panel.triangles.empty())
				throw ValidationError("panel '" + panel.id + "' has no triangles");
			check_triangles(panel);
			panel.boundary_loops = compute_boundary_loops(panel);
			if (panel.boundary_loops.empty())
				throw ValidationError("panel '" + panel.id + "' has no boundary");
			if (loop_signed_area(panel.vertices, panel.boundary_loops.front()) <= 0.0)
				throw ValidationError("panel '" + panel.id + "': outer boundary is not counterclockwise");
			check_loops_simple(panel);
			panel.seam_edge_tags.clear();
		}

		std::set<std::string> seam_ids;
		std::map<std::pair<int, int>, int> seam_membership;
		for (const Seam &seam : spec.seams)
		{
			if (!seam_ids.insert(seam.id).second)
				throw ValidationError("duplicate seam id '" + seam.id + "'");
			for (const SeamSide *side : {&seam.side_a, &seam.side_b})
			{
				const int p = spec.panel_index(side->panel);
				check_seam_side(spec, seam, *side, p >= 0 ? boundary_edge_set(spec.panels[p]) : std::set<EdgeKey>{});
			}
			if (seam.side_a.vertices.size() != seam.side_b.vertices.size())
				throw ValidationError("seam '" + seam.id + "': sides have " + std::to_string(seam.side_a.vertices.size()) + " and "
									  + std::to_string(seam.side_b.vertices.size()) + " vertices");
			for (const SeamSide *side : {&seam.side_a, &seam.side_b})
			{
				const int p = spec.panel_index(side->panel);
				Panel &panel = spec.panels[p];
				std::set<int> unique(side->vertices.begin(), side->vertices.end());
				for (int v : unique)
					if (++seam_membership[{p, v}] > 2)
						throw ValidationError("seam '" + seam.id + "': vertex " + std::to_string(v) + " of panel '" + panel.id
											  + "' appears in more than two seams");
				for (size_t i = 0; i + 1 < side->vertices.size(); ++i)
				{
					const EdgeKey e = edge_key(side->vertices[i], side->vertices[i + 1]);
					auto [it, inserted] = panel.seam_edge_tags.emplace(e, seam.id);
					if (!inserted && it->second != seam.id)
						throw ValidationError("seam '" + seam.id + "': edge (" + std::to_string(e.first) + "," + std::to_string(e.second)
											  + ") of panel '" + panel.id + "' already belongs to seam '" + it->second + "'");
				}
			}
		}

		for (SymmetryPair &pair : spec.symmetry_pairs)
		{
			const int a = spec.panel_index(pair.a), b = spec.panel_index(pair.b);
			if (a < 0 || b < 0)
				throw ValidationError("symmetry pair references unknown panel '" + (a < 0 ? pair.a : pair.b) + "'");
			if (a == b)
				throw ValidationError("symmetry pair pairs panel '" + pair.a + "' with itself");
			const int n = spec.panels[a].num_vertices();
			if (n != spec.panels[b].num_vertices())
				throw ValidationError("symmetry pair ('" + pair.a + "','" + pair.b + "') has unequal vertex counts");
			if (pair.correspondence.empty())
			{
				// Fall back to detection for this pair.
				GarmentSpec probe;
				probe.panels = {spec.panels[a], spec.panels[b]};
				const auto found = detect_flip_symmetry(probe);
				if (found.empty())
					throw ValidationError("symmetry pair ('" + pair.a + "','" + pair.b + "') is not a mirror pair and has no correspondence");
				pair.correspondence = found.front().correspondence;
			}
			if (int(pair.correspondence.size()) != n)
				throw ValidationError("symmetry pair ('" + pair.a + "','" + pair.b + "') correspondence has wrong size");
			std::vector<char> seen(n, 0);
			for (int c : pair.correspondence)
			{
				if (c < 0 || c >= n || seen[c])
					throw ValidationError("symmetry pair ('" + pair.a + "','" + pair.b + "') correspondence is not a permutation");
				seen[c] = 1;
			}
			Points2 dst(n, 2);
			for (int i = 0; i < n; ++i)
				dst.row(i) = spec.panels[b].vertices.row(pair.correspondence[i]);
			std::tie(pair.reflection, pair.translation) = fit_reflection(spec.panels[a].vertices, dst);
		}

		const int nv = spec.num_vertices();
		if (spec.reference_drape3d.rows() != nv)
			throw ValidationError("reference_drape3d has " + std::to_string(spec.reference_drape3d.rows())
								  + " points but the stitched mesh has " + std::to_string(nv) + " vertices");
		if (!spec.reference_drape3d.allFinite())
			throw ValidationError("reference_drape3d contains non-finite values");

		for (const CageOverride &cage : spec.cages)
			if (spec.panel_index(cage.panel) < 0)
				throw ValidationError("cage references unknown panel '" + cage.panel + "'");
	}
} // namespace patternfit
