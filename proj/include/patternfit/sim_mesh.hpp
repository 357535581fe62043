#pragma once

#include <patternfit/pattern.hpp>

namespace patternfit
{
	struct SimTriangle
	{
		std::array<int, 3> v;     // simulation vertex indices
		int panel = 0;
		std::array<int, 3> local; // panel-local vertex indices
	};

	/// Rest-state data of a triangle derived from its 2D pattern coordinates.
	/// The world-space deformation gradient columns are
	/// f_u = sum_k a[k] x_k and f_v = sum_k b[k] x_k.
	struct RestTriangle
	{
		std::array<double, 3> a{};
		std::array<double, 3> b{};
		double area = 0.0;
		double sqrt_area = 0.0;
	};

	/// Flat-rest isometric bending stencil over the four vertices of an interior
	/// edge. Coefficients are computed once from the reference pattern and are
	/// not part of the rest-shape gradient.
	struct Hinge
	{
		std::array<int, 4> v;
		std::array<double, 4> k;
	};

	struct SimMesh
	{
		int num_vertices = 0;
		std::vector<int> panel_offsets;
		std::vector<SimTriangle> triangles;
		std::vector<RestTriangle> rest;
		std::vector<std::array<int, 2>> stitches;
		std::vector<Hinge> hinges;

		Eigen::VectorXd mass;
		Eigen::VectorXd inv_mass;
		std::vector<char> pinned;

		double area_density = 0.2;
		double stretch_compliance = 0.0;
		double shear_compliance = 0.0;
		double bend_compliance = -1.0;
		double stitch_compliance = 0.0;

		/// Current rest patterns, one per panel.
		std::vector<Points2> patterns;

		int num_triangles() const { return int(triangles.size()); }
		int sim_index(int panel, int local) const { return panel_offsets[panel] + local; }
	};

	/// Builds the stitched simulation mesh. Seam vertices stay distinct and are
	/// linked by zero-rest-length stitches.
	SimMesh assemble_sim_mesh(const GarmentSpec &spec);

	/// Replaces the rest patterns, recomputing per-triangle rest data and lumped
	/// masses. Throws NumericalError for inverted or degenerate triangles.
	void set_rest_shape(SimMesh &mesh, const std::vector<Points2> &patterns);

	/// Pins simulation vertices (zero inverse mass).
	void set_pinned(SimMesh &mesh, const std::vector<int> &vertices);

	RestTriangle make_rest_triangle(const Vec2 &r0, const Vec2 &r1, const Vec2 &r2);

	std::vector<Tri> sim_triangles(const SimMesh &mesh);

	/// Per-panel 3D surface area of the given simulation positions.
	std::vector<double> panel_areas_3d(const SimMesh &mesh, const Points3 &x);
} // namespace patternfit
