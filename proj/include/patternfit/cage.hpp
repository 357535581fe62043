#pragma once

#include <patternfit/pattern.hpp>

#include <Eigen/Dense>

namespace patternfit
{
	/// Counterclockwise control polygon of a panel together with its rest edge
	/// lengths and outward unit edge normals. Edge j runs from vertex j to j+1.
	struct Cage
	{
		std::string panel_id;
		Points2 vertices;
		std::vector<double> rest_edge_lengths;
		Points2 rest_edge_normals;

		int size() const { return int(vertices.rows()); }
	};

	/// Green coordinates of a set of points with respect to a rest cage:
	/// p = w1 * cage_vertices + w2 * cage_edge_normals.
	struct CageCoords
	{
		Eigen::MatrixXd w1; // points x cage vertices
		Eigen::MatrixXd w2; // points x cage edges
	};

	/// Builds a cage from explicit vertices. Throws ValidationError when the
	/// polygon is not simple or not counterclockwise.
	Cage make_cage(std::string panel_id, const Points2 &vertices);

	/// Offsets the panel's outer boundary by `margin`, simplifies it with
	/// Douglas-Peucker to at most `max_vertices` and, when `min_vertices` is
	/// larger than the result, splits the longest edges until it is reached.
	Cage build_cage(const Panel &panel, double margin, int max_vertices, int min_vertices = 0);

	/// Closed-form 2D Green coordinates. Every point must lie strictly inside the cage.
	CageCoords compute_green_coords(const Cage &cage, const Points2 &points);

	/// Maps points through a deformed cage. Edge normal terms are the deformed
	/// outward normals scaled by deformed/rest edge length.
	Points2 deform(const CageCoords &coords, const Cage &rest, const Points2 &cage_points);

	/// d(deformed points)/d(cage_points), flattened row-major on both sides:
	/// rows 2*i+c index point i coordinate c, columns 2*j+d cage vertex j coordinate d.
	Eigen::MatrixXd cage_jacobian(const CageCoords &coords, const Cage &rest, const Points2 &cage_points);

	bool polygon_is_simple(const Points2 &polygon);
	double polygon_signed_area(const Points2 &polygon);
	/// Winding number of the polygon around p (nonzero means inside).
	int winding_number(const Points2 &polygon, const Vec2 &p);
	double distance_to_polygon_boundary(const Points2 &polygon, const Vec2 &p);

	/// Ramer-Douglas-Peucker on a closed polygon.
	Points2 simplify_closed_polygon(const Points2 &polygon, double tolerance);

	/// Miter offset of a counterclockwise polygon (positive = outward).
	Points2 offset_polygon(const Points2 &polygon, double distance);

	/// Debug rendering of a cage and the panel triangulation it drives.
	std::string cage_svg(const Cage &cage, const Points2 &cage_points, const Panel &panel, const Points2 &pattern);
} // namespace patternfit
