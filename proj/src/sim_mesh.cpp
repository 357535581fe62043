#include <patternfit/sim_mesh.hpp>

#include <cmath>
#include <map>
#include <set>

namespace patternfit
{
	namespace
	{
		double cot(const Vec2 &a, const Vec2 &b) { return a.dot(b) / std::abs(cross2(a, b)); }

		std::vector<Hinge> build_hinges(const GarmentSpec &spec, const std::vector<int> &offsets)
		{
			std::vector<Hinge> hinges;
			for (size_t p = 0; p < spec.panels.size(); ++p)
			{
				const Panel &panel = spec.panels[p];
				std::map<std::pair<int, int>, int> opposite; // directed edge -> opposite vertex
				for (const Tri &t : panel.triangles)
					for (int k = 0; k < 3; ++k)
						opposite[{t[k], t[(k + 1) % 3]}] = t[(k + 2) % 3];
				for (const auto &[e, c] : opposite)
				{
					const auto [a, b] = e;
					if (a > b)
						continue;
					auto it = opposite.find({b, a});
					if (it == opposite.end())
						continue;
					const int d = it->second;
					const Vec2 x0 = panel.vertices.row(a), x1 = panel.vertices.row(b);
					const Vec2 x2 = panel.vertices.row(c), x3 = panel.vertices.row(d);
					const Vec2 e0 = x1 - x0, e1 = x2 - x0, e2 = x3 - x0, e3 = x2 - x1, e4 = x3 - x1;
					const double c01 = cot(e0, e1), c02 = cot(e0, e2), c03 = cot(-e0, e3), c04 = cot(-e0, e4);
					const double area = std::abs(triangle_area(x0, x1, x2)) + std::abs(triangle_area(x0, x1, x3));
					const double s = std::sqrt(3.0 / area);
					Hinge h;
					h.v = {offsets[p] + a, offsets[p] + b, offsets[p] + c, offsets[p] + d};
					h.k = {s * (c03 + c04), s * (c01 + c02), -s * (c01 + c03), -s * (c02 + c04)};
					hinges.push_back(h);
				}
			}
			return hinges;
		}
	} // namespace

	RestTriangle make_rest_triangle(const Vec2 &r0, const Vec2 &r1, const Vec2 &r2)
	{
		Eigen::Matrix2d dm;
		dm.col(0) = r1 - r0;
		dm.col(1) = r2 - r0;
		const double det = dm.determinant();
		RestTriangle rt;
		rt.area = 0.5 * det;
		if (!(rt.area > 0.0) || !std::isfinite(rt.area))
			return rt; // caller reports
		const Eigen::Matrix2d d = dm.inverse();
		rt.a = {-d(0, 0) - d(1, 0), d(0, 0), d(1, 0)};
		rt.b = {-d(0, 1) - d(1, 1), d(0, 1), d(1, 1)};
		rt.sqrt_area = std::sqrt(rt.area);
		return rt;
	}

	SimMesh assemble_sim_mesh(const GarmentSpec &spec)
	{
		SimMesh mesh;
		mesh.panel_offsets = spec.panel_offsets();
		mesh.num_vertices = mesh.panel_offsets.back();
		for (size_t p = 0; p < spec.panels.size(); ++p)
			for (const Tri &t : spec.panels[p].triangles)
			{
				SimTriangle st;
				st.panel = int(p);
				st.local = t;
				for (int k = 0; k < 3; ++k)
					st.v[k] = mesh.panel_offsets[p] + t[k];
				mesh.triangles.push_back(st);
			}

		std::set<std::array<int, 2>> seen;
		for (const Seam &seam : spec.seams)
		{
			const int pa = spec.panel_index(seam.side_a.panel), pb = spec.panel_index(seam.side_b.panel);
			for (size_t i = 0; i < seam.side_a.vertices.size(); ++i)
			{
				int u = mesh.panel_offsets[pa] + seam.side_a.vertices[i];
				int v = mesh.panel_offsets[pb] + seam.side_b.vertices[i];
				if (u == v)
					continue;
				std::array<int, 2> key = {std::min(u, v), std::max(u, v)};
				if (seen.insert(key).second)
					mesh.stitches.push_back({u, v});
			}
		}

		mesh.area_density = spec.material.area_density;
		mesh.stretch_compliance = spec.material.stretch_compliance;
		mesh.shear_compliance = spec.material.shear_compliance;
		mesh.bend_compliance = spec.material.bend_compliance;
		if (mesh.bend_compliance >= 0.0)
			mesh.hinges = build_hinges(spec, mesh.panel_offsets);

		mesh.pinned.assign(mesh.num_vertices, 0);
		std::vector<Points2> patterns;
		for (const Panel &p : spec.panels)
			patterns.push_back(p.vertices);
		set_rest_shape(mesh, patterns);
		return mesh;
	}

	void set_rest_shape(SimMesh &mesh, const std::vector<Points2> &patterns)
	{
		if (patterns.size() + 1 != mesh.panel_offsets.size())
			throw ValidationError("set_rest_shape: expected " + std::to_string(mesh.panel_offsets.size() - 1) + " panels");
		for (size_t p = 0; p < patterns.size(); ++p)
			if (patterns[p].rows() != mesh.panel_offsets[p + 1] - mesh.panel_offsets[p])
				throw ValidationError("set_rest_shape: vertex count mismatch on panel " + std::to_string(p));
		mesh.patterns = patterns;
		mesh.rest.resize(mesh.triangles.size());
		mesh.mass = Eigen::VectorXd::Zero(mesh.num_vertices);
		for (size_t t = 0; t < mesh.triangles.size(); ++t)
		{
			const SimTriangle &st = mesh.triangles[t];
			const Points2 &pat = patterns[st.panel];
			RestTriangle rt = make_rest_triangle(pat.row(st.local[0]), pat.row(st.local[1]), pat.row(st.local[2]));
			if (!(rt.area > 0.0) || !std::isfinite(rt.area))
				throw NumericalError("rest triangle " + std::to_string(t) + " is inverted or degenerate");
			mesh.rest[t] = rt;
			for (int k = 0; k < 3; ++k)
				mesh.mass[st.v[k]] += mesh.area_density * rt.area / 3.0;
		}
		mesh.inv_mass.resize(mesh.num_vertices);
		for (int i = 0; i < mesh.num_vertices; ++i)
			mesh.inv_mass[i] = mesh.pinned[i] ? 0.0 : 1.0 / mesh.mass[i];
	}

	void set_pinned(SimMesh &mesh, const std::vector<int> &vertices)
	{
		mesh.pinned.assign(mesh.num_vertices, 0);
		for (int v : vertices)
		{
			if (v < 0 || v >= mesh.num_vertices)
				throw ValidationError("pinned vertex " + std::to_string(v) + " out of range");
			mesh.pinned[v] = 1;
		}
		for (int i = 0; i < mesh.num_vertices; ++i)
			mesh.inv_mass[i] = mesh.pinned[i] ? 0.0 : 1.0 / mesh.mass[i];
	}

	std::vector<Tri> sim_triangles(const SimMesh &mesh)
	{
		std::vector<Tri> tris;
		tris.reserve(mesh.triangles.size());
		for (const SimTriangle &t : mesh.triangles)
			tris.push_back(t.v);
		return tris;
	}

	std::vector<double> panel_areas_3d(const SimMesh &mesh, const Points3 &x)
	{
		std::vector<double> areas(mesh.panel_offsets.size() - 1, 0.0);
		for (const SimTriangle &t : mesh.triangles)
			areas[t.panel] += triangle_area(Vec3(x.row(t.v[0])), Vec3(x.row(t.v[1])), Vec3(x.row(t.v[2])));
		return areas;
	}
} // namespace patternfit
