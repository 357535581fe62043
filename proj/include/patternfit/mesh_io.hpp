#pragma once

#include <patternfit/common.hpp>

#include <filesystem>

namespace patternfit
{
	struct ObjMesh
	{
		Points3 vertices;
		std::vector<Tri> triangles; // 0-based
	};

	/// Reads positions and faces of a Wavefront OBJ file. Polygonal faces are
	/// fan-triangulated; texture/normal indices are ignored.
	ObjMesh read_obj(const std::filesystem::path &path);
	void write_obj(const std::filesystem::path &path, const Points3 &vertices, const std::vector<Tri> &triangles);
} // namespace patternfit
