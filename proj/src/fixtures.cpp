#include <patternfit/fixtures.hpp>

#include <cmath>
#include <numbers>

namespace patternfit
{
	Panel grid_panel(const std::string &id, double width, double height, int nx, int ny)
	{
		Panel p;
		p.id = id;
		p.vertices.resize((nx + 1) * (ny + 1), 2);
		for (int j = 0; j <= ny; ++j)
			for (int i = 0; i <= nx; ++i)
				p.vertices.row(j * (nx + 1) + i) << width * i / nx, height - height * j / ny;
		for (int j = 0; j < ny; ++j)
			for (int i = 0; i < nx; ++i)
			{
				const int tl = j * (nx + 1) + i, tr = tl + 1, bl = tl + nx + 1, br = bl + 1;
				// Alternate diagonals so the mesh has no preferred shear direction.
				if ((i + j) % 2 == 0)
				{
					p.triangles.push_back({tl, bl, br});
					p.triangles.push_back({tl, br, tr});
				}
				else
				{
					p.triangles.push_back({tl, bl, tr});
					p.triangles.push_back({tr, bl, br});
				}
			}
		return p;
	}

	GarmentSpec square_spec(double side)
	{
		GarmentSpec spec;
		Panel p;
		p.id = "square";
		p.vertices.resize(4, 2);
		p.vertices << 0, 0, side, 0, side, side, 0, side;
		p.triangles = {{0, 1, 2}, {0, 2, 3}};
		spec.panels.push_back(p);
		spec.reference_drape3d.resize(4, 3);
		for (int i = 0; i < 4; ++i)
			spec.reference_drape3d.row(i) << p.vertices(i, 0), 0.0, -p.vertices(i, 1);
		validate_garment(spec);
		return spec;
	}

	BodyMesh cylinder_body(double radius, double y_min, double y_max, int segments, int rings)
	{
		BodyMesh b;
		const int ring_size = segments;
		b.vertices.resize((rings + 1) * ring_size + 2, 3);
		for (int r = 0; r <= rings; ++r)
		{
			const double y = y_min + (y_max - y_min) * r / rings;
			for (int s = 0; s < segments; ++s)
			{
				const double th = 2.0 * std::numbers::pi * s / segments;
				b.vertices.row(r * ring_size + s) << radius * std::sin(th), y, radius * std::cos(th);
			}
		}
		const int bottom = (rings + 1) * ring_size, top = bottom + 1;
		b.vertices.row(bottom) << 0.0, y_min, 0.0;
		b.vertices.row(top) << 0.0, y_max, 0.0;
		for (int r = 0; r < rings; ++r)
			for (int s = 0; s < segments; ++s)
			{
				const int a = r * ring_size + s, c = r * ring_size + (s + 1) % segments;
				const int a2 = a + ring_size, c2 = c + ring_size;
				// Angle grows from +z towards +x, so (a, c, c2) faces outward.
				b.triangles.push_back({a, c, c2});
				b.triangles.push_back({a, c2, a2});
			}
		for (int s = 0; s < segments; ++s)
		{
			const int s1 = (s + 1) % segments;
			b.triangles.push_back({bottom, s1, s});
			b.triangles.push_back({top, rings * ring_size + s, rings * ring_size + s1});
		}
		return b;
	}

	BodyMesh plane_body(double half_size, double y)
	{
		BodyMesh b;
		b.vertices.resize(4, 3);
		b.vertices << -half_size, y, -half_size, half_size, y, -half_size, half_size, y, half_size, -half_size, y, half_size;
		b.triangles = {{0, 2, 1}, {0, 3, 2}};
		return b;
	}

	BodyMesh sphere_body(double radius, int segments, int rings)
	{
		BodyMesh b;
		const double pi = std::numbers::pi;
		b.vertices.resize((rings - 1) * segments + 2, 3);
		for (int r = 1; r < rings; ++r)
		{
			const double phi = pi * r / rings;
			for (int s = 0; s < segments; ++s)
			{
				const double th = 2.0 * pi * s / segments;
				b.vertices.row((r - 1) * segments + s) << radius * std::sin(phi) * std::sin(th), radius * std::cos(phi),
					radius * std::sin(phi) * std::cos(th);
			}
		}
		const int north = (rings - 1) * segments, south = north + 1;
		b.vertices.row(north) << 0.0, radius, 0.0;
		b.vertices.row(south) << 0.0, -radius, 0.0;
		for (int s = 0; s < segments; ++s)
		{
			const int s1 = (s + 1) % segments;
			b.triangles.push_back({north, s, s1});
			b.triangles.push_back({south, (rings - 2) * segments + s1, (rings - 2) * segments + s});
		}
		for (int r = 0; r + 2 < rings; ++r)
			for (int s = 0; s < segments; ++s)
			{
				const int s1 = (s + 1) % segments;
				const int a = r * segments + s, c = r * segments + s1, a2 = a + segments, c2 = c + segments;
				b.triangles.push_back({a, a2, c2});
				b.triangles.push_back({a, c2, c});
			}
		return b;
	}

	Vec3 wrap_on_cylinder(double u, double v, double radius, double y_offset)
	{
		const double th = u / radius;
		return {radius * std::sin(th), y_offset + v, radius * std::cos(th)};
	}

	TubeSkirt make_tube_skirt(const TubeSkirtParams &prm)
	{
		TubeSkirt out;
		GarmentSpec &spec = out.spec;
		Panel a = grid_panel("front", prm.width, prm.height, prm.nx, prm.ny);
		Panel b;
		b.id = "back";
		b.vertices = a.vertices;
		b.vertices.col(0) *= -1.0;
		for (const Tri &t : a.triangles)
			b.triangles.push_back({t[0], t[2], t[1]});
		spec.panels = {a, b};

		const int cols = prm.nx + 1;
		Seam left{"left", {"front", {}}, {"back", {}}};
		Seam right{"right", {"front", {}}, {"back", {}}};
		for (int j = 0; j <= prm.ny; ++j)
		{
			left.side_a.vertices.push_back(j * cols);
			left.side_b.vertices.push_back(j * cols);
			right.side_a.vertices.push_back(j * cols + prm.nx);
			right.side_b.vertices.push_back(j * cols + prm.nx);
		}
		spec.seams = {left, right};

		SymmetryPair pair;
		pair.a = "front";
		pair.b = "back";
		for (int i = 0; i < a.num_vertices(); ++i)
			pair.correspondence.push_back(i);
		spec.symmetry_pairs = {pair};

		const int nv = a.num_vertices();
		const double radius = 2.0 * prm.width / (2.0 * std::numbers::pi);
		const double y_offset = prm.waist_height - prm.height;
		spec.reference_drape3d.resize(2 * nv, 3);
		for (int p = 0; p < 2; ++p)
			for (int i = 0; i < nv; ++i)
			{
				const Vec2 uv = spec.panels[p].vertices.row(i);
				spec.reference_drape3d.row(p * nv + i) = wrap_on_cylinder(uv.x(), uv.y(), radius, y_offset).transpose();
			}
		validate_garment(spec);

		const double ratio = prm.target_radius / prm.body_radius;
		out.target.positions = spec.reference_drape3d;
		out.target.positions.col(0) *= ratio;
		out.target.positions.col(2) *= ratio;

		out.body = cylinder_body(prm.body_radius, prm.body_bottom, prm.body_top);
		out.target_body = cylinder_body(prm.target_radius, prm.body_bottom, prm.body_top);
		for (int p = 0; p < 2; ++p)
			for (int i = 0; i < cols; ++i)
				out.pinned.push_back(p * nv + i);
		return out;
	}
} // namespace patternfit
