#pragma once

#include <patternfit/common.hpp>

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace patternfit
{
	/// Undirected edge key, smaller index first.
	using EdgeKey = std::pair<int, int>;
	inline EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

	/// A flat piece of fabric. Coordinates are in meters; the triangulation
	/// provides the rest shape of the simulated triangles.
	struct Panel
	{
		std::string id;
		Points2 vertices;
		std::vector<Tri> triangles;
		/// Ordered vertex cycles, outer loop first. Loops follow the triangle
		/// orientation, so the outer loop is counterclockwise.
		std::vector<std::vector<int>> boundary_loops;
		std::map<EdgeKey, std::string> seam_edge_tags;

		int num_vertices() const { return int(vertices.rows()); }
	};

	struct SeamSide
	{
		std::string panel;
		std::vector<int> vertices; // ordered boundary vertices
	};

	struct Seam
	{
		std::string id;
		SeamSide side_a;
		SeamSide side_b;
	};

	/// Flip symmetry between two panels: vertex i of panel `a` mirrors vertex
	/// correspondence[i] of panel `b`, with b ≈ reflection * a + translation.
	struct SymmetryPair
	{
		std::string a;
		std::string b;
		std::vector<int> correspondence;
		Eigen::Matrix2d reflection = Eigen::Matrix2d::Identity();
		Vec2 translation = Vec2::Zero();
	};

	struct Material
	{
		double stretch_compliance = 1e-4;
		double shear_compliance = 1e-3;
		/// Negative disables bending constraints.
		double bend_compliance = -1.0;
		double area_density = 0.2; // kg/m^2
	};

	/// Optional user-supplied control cage for a panel.
	struct CageOverride
	{
		std::string panel;
		Points2 vertices;
	};

	struct GarmentSpec
	{
		std::vector<Panel> panels;
		std::vector<Seam> seams;
		std::vector<SymmetryPair> symmetry_pairs;
		Material material;
		Points3 reference_drape3d;
		std::vector<CageOverride> cages;

		int panel_index(const std::string &id) const;
		/// Offset of each panel's first vertex in the stitched simulation mesh
		/// (size panels + 1).
		std::vector<int> panel_offsets() const;
		int num_vertices() const;
		int num_triangles() const;
	};

	struct BodyMesh
	{
		Points3 vertices;
		std::vector<Tri> triangles;
		double collision_margin = 0.003;
	};

	struct TargetDrape
	{
		Points3 positions;
		std::map<std::string, double> total_area_per_panel;
	};

	double triangle_area(const Vec2 &p0, const Vec2 &p1, const Vec2 &p2);
	double triangle_area(const Vec3 &p0, const Vec3 &p1, const Vec3 &p2);

	double panel_area(const Panel &panel);
	/// Area of a panel for an alternate set of vertex positions.
	double panel_area(const Panel &panel, const Points2 &vertices);

	/// Normalized radius-ratio style quality 4*sqrt(3)*A / (l1^2 + l2^2 + l3^2):
	/// 1 for equilateral, 0 for degenerate triangles.
	double triangle_quality(const Vec2 &p0, const Vec2 &p1, const Vec2 &p2);

	struct QualityReport
	{
		double min_quality = 0.0;
		double mean_quality = 0.0;
	};

	QualityReport pattern_quality_report(const GarmentSpec &spec);

	/// Boundary loops of a triangulation, outer (largest enclosed area) first.
	/// Throws ValidationError for non-manifold input.
	std::vector<std::vector<int>> compute_boundary_loops(const Panel &panel);

	struct SeamResample
	{
		std::string seam;
		std::string panel;
		int inserted = 0;
	};

	/// Equalizes seam side vertex counts by repeatedly splitting the longest
	/// edge of the shorter side at its arc-length midpoint. The split refines
	/// the incident triangle and appends an interpolated reference drape point.
	std::vector<SeamResample> resample_seams(GarmentSpec &spec);

	/// Checks every structural invariant; fills derived data (boundary loops,
	/// seam tags, symmetry reflections). Throws ValidationError naming the
	/// offending panel, triangle or seam.
	void validate_garment(GarmentSpec &spec);

	/// Rigid/reflective least-squares fit dst ≈ R src + t restricted to
	/// reflections (det R = -1).
	std::pair<Eigen::Matrix2d, Vec2> fit_reflection(const Points2 &src, const Points2 &dst);

	/// Detects panel pairs that match under reflection within
	/// tol_fraction * panel diameter. Explicit pairs in the spec take precedence.
	std::vector<SymmetryPair> detect_flip_symmetry(const GarmentSpec &spec, double tol_fraction = 1e-3);

	/// Returns a copy of `points` mirrored according to `pair` (a -> b frame).
	Points2 mirror_points(const SymmetryPair &pair, const Points2 &points);
} // namespace patternfit
