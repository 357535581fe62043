#pragma once

#include <patternfit/pattern.hpp>

namespace patternfit
{
	/// Regular grid panel of width x height split into nx x ny cells. Rows are
	/// ordered top (y = height) to bottom; vertex (i, j) has index j*(nx+1)+i.
	Panel grid_panel(const std::string &id, double width, double height, int nx, int ny);

	/// Single unit square panel made of two triangles.
	GarmentSpec square_spec(double side = 1.0);

	/// Closed cylinder (with caps) around the y axis, outward normals.
	BodyMesh cylinder_body(double radius, double y_min, double y_max, int segments = 48, int rings = 16);

	/// Square horizontal plane at height y facing +y.
	BodyMesh plane_body(double half_size, double y);

	/// Icosphere-like UV sphere around the origin.
	BodyMesh sphere_body(double radius, int segments = 32, int rings = 16);

	struct TubeSkirtParams
	{
		double width = 0.6;  // per panel
		double height = 0.8;
		int nx = 16;
		int ny = 20;
		double body_radius = 0.15;
		double target_radius = 0.20;
		double waist_height = 1.2;
		double body_bottom = 0.0;
		double body_top = 1.4;
	};

	/// Two mirrored rectangular panels sewn into a tube. The reference drape is
	/// the tube wrapped at its natural radius; the target scales it radially by
	/// target_radius / body_radius. The waist row is pinned.
	struct TubeSkirt
	{
		GarmentSpec spec;
		BodyMesh body;        // reference body
		BodyMesh target_body; // larger body
		TargetDrape target;
		std::vector<int> pinned; // simulation vertex indices
	};

	TubeSkirt make_tube_skirt(const TubeSkirtParams &params = {});

	/// Wraps a panel point (u, v) of a tube around the y axis.
	Vec3 wrap_on_cylinder(double u, double v, double radius, double y_offset);
} // namespace patternfit
