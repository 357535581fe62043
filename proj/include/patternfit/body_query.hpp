#pragma once

#include <patternfit/pattern.hpp>

#include <Eigen/Geometry>

namespace patternfit
{
	enum class SurfaceFeature : char
	{
		Vertex,
		Edge,
		Face
	};

	struct SurfaceHit
	{
		Vec3 point;
		/// Outward unit direction; (x - point) / |x - point| oriented by the
		/// pseudo-normal, or the pseudo-normal itself when x is on the surface.
		Vec3 normal;
		double signed_distance = 0.0;
		int triangle = -1;
		SurfaceFeature feature = SurfaceFeature::Face;
		Vec3 edge_direction = Vec3::Zero(); // unit, for edge features
	};

	/// Closest-point queries against a static triangle mesh. Signs come from
	/// angle-weighted pseudo-normals of the closest feature.
	class BodyQuery
	{
	public:
		explicit BodyQuery(const BodyMesh &body);

		SurfaceHit closest(const Vec3 &x) const;
		double signed_distance(const Vec3 &x) const { return closest(x).signed_distance; }
		bool empty() const { return tris_.empty(); }
		double margin() const { return margin_; }

	private:
		struct Node
		{
			Eigen::AlignedBox3d box;
			int left = -1, right = -1; // children, or -1 for leaves
			int begin = 0, end = 0;    // leaf range in order_
		};

		int build(int begin, int end);

		double margin_ = 0.0;
		Points3 verts_;
		std::vector<Tri> tris_;
		std::vector<Vec3> face_normals_;
		std::vector<Vec3> vertex_normals_;
		std::map<EdgeKey, Vec3> edge_normals_;
		std::vector<int> order_;
		std::vector<Node> nodes_;
	};
} // namespace patternfit
