#include <patternfit/body_query.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace patternfit
{
	namespace
	{
		// Feature of a triangle that holds the closest point: 0-2 vertices,
		// 3-5 edges (k-3, k-2 mod 3), 6 the face interior.
		struct TriPoint
		{
			Vec3 p;
			int feature;
		};

		TriPoint closest_on_triangle(const Vec3 &p, const Vec3 &a, const Vec3 &b, const Vec3 &c)
		{
			const Vec3 ab = b - a, ac = c - a, ap = p - a;
			const double d1 = ab.dot(ap), d2 = ac.dot(ap);
			if (d1 <= 0 && d2 <= 0)
				return {a, 0};
			const Vec3 bp = p - b;
			const double d3 = ab.dot(bp), d4 = ac.dot(bp);
			if (d3 >= 0 && d4 <= d3)
				return {b, 1};
			const double vc = d1 * d4 - d3 * d2;
			if (vc <= 0 && d1 >= 0 && d3 <= 0)
				return {a + d1 / (d1 - d3) * ab, 3};
			const Vec3 cp = p - c;
			const double d5 = ab.dot(cp), d6 = ac.dot(cp);
			if (d6 >= 0 && d5 <= d6)
				return {c, 2};
			const double vb = d5 * d2 - d1 * d6;
			if (vb <= 0 && d2 >= 0 && d6 <= 0)
				return {a + d2 / (d2 - d6) * ac, 5};
			const double va = d3 * d6 - d5 * d4;
			if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0)
				return {b + (d4 - d3) / ((d4 - d3) + (d5 - d6)) * (c - b), 4};
			const double denom = 1.0 / (va + vb + vc);
			return {a + ab * (vb * denom) + ac * (vc * denom), 6};
		}
	} // namespace

	BodyQuery::BodyQuery(const BodyMesh &body) : margin_(body.collision_margin), verts_(body.vertices), tris_(body.triangles)
	{
		const int nv = int(verts_.rows());
		vertex_normals_.assign(nv, Vec3::Zero());
		face_normals_.resize(tris_.size());
		for (size_t t = 0; t < tris_.size(); ++t)
		{
			const Tri &tri = tris_[t];
			for (int k : tri)
				if (k < 0 || k >= nv)
					throw ValidationError("body triangle " + std::to_string(t) + " references a missing vertex");
			const Vec3 p[3] = {verts_.row(tri[0]), verts_.row(tri[1]), verts_.row(tri[2])};
			Vec3 n = (p[1] - p[0]).cross(p[2] - p[0]);
			const double len = n.norm();
			n = len > 0 ? Vec3(n / len) : Vec3::Zero();
			face_normals_[t] = n;
			for (int k = 0; k < 3; ++k)
			{
				const Vec3 e1 = (p[(k + 1) % 3] - p[k]).normalized();
				const Vec3 e2 = (p[(k + 2) % 3] - p[k]).normalized();
				const double angle = std::acos(std::clamp(e1.dot(e2), -1.0, 1.0));
				vertex_normals_[tri[k]] += angle * n;
				edge_normals_.try_emplace(edge_key(tri[k], tri[(k + 1) % 3]), Vec3::Zero()).first->second += n;
			}
		}
		for (Vec3 &n : vertex_normals_)
			if (n.norm() > 0)
				n.normalize();
		for (auto &[e, n] : edge_normals_)
			if (n.norm() > 0)
				n.normalize();

		order_.resize(tris_.size());
		for (size_t i = 0; i < order_.size(); ++i)
			order_[i] = int(i);
		if (!tris_.empty())
		{
			nodes_.reserve(2 * tris_.size());
			build(0, int(tris_.size()));
		}
	}

	int BodyQuery::build(int begin, int end)
	{
		const int id = int(nodes_.size());
		nodes_.push_back({});
		Eigen::AlignedBox3d box, centers;
		for (int i = begin; i < end; ++i)
		{
			const Tri &t = tris_[order_[i]];
			Vec3 c = Vec3::Zero();
			for (int k : t)
			{
				box.extend(Vec3(verts_.row(k)));
				c += verts_.row(k).transpose() / 3.0;
			}
			centers.extend(c);
		}
		nodes_[id].box = box;
		if (end - begin <= 4)
		{
			nodes_[id].begin = begin;
			nodes_[id].end = end;
			return id;
		}
		int axis;
		centers.sizes().maxCoeff(&axis);
		const int mid = (begin + end) / 2;
		auto centroid = [&](int t) {
			const Tri &tri = tris_[t];
			return verts_(tri[0], axis) + verts_(tri[1], axis) + verts_(tri[2], axis);
		};
		std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end, [&](int a, int b) {
			const double ca = centroid(a), cb = centroid(b);
			return ca < cb || (ca == cb && a < b);
		});
		const int left = build(begin, mid);
		const int right = build(mid, end);
		nodes_[id].left = left;
		nodes_[id].right = right;
		return id;
	}

	SurfaceHit BodyQuery::closest(const Vec3 &x) const
	{
		SurfaceHit hit;
		if (tris_.empty())
		{
			hit.signed_distance = std::numeric_limits<double>::infinity();
			return hit;
		}
		double best = std::numeric_limits<double>::infinity();
		int best_tri = -1, best_feature = 6;
		Vec3 best_point = Vec3::Zero();

		std::vector<int> stack{0};
		while (!stack.empty())
		{
			const Node &node = nodes_[stack.back()];
			stack.pop_back();
			if (node.box.squaredExteriorDistance(x) > best)
				continue;
			if (node.left < 0)
			{
				for (int i = node.begin; i < node.end; ++i)
				{
					const int t = order_[i];
					const Tri &tri = tris_[t];
					const TriPoint tp = closest_on_triangle(x, verts_.row(tri[0]), verts_.row(tri[1]), verts_.row(tri[2]));
					const double d2 = (tp.p - x).squaredNorm();
					if (d2 < best || (d2 == best && t < best_tri))
					{
						best = d2;
						best_tri = t;
						best_feature = tp.feature;
						best_point = tp.p;
					}
				}
				continue;
			}
			const double dl = nodes_[node.left].box.squaredExteriorDistance(x);
			const double dr = nodes_[node.right].box.squaredExteriorDistance(x);
			// Visit the nearer child first.
			if (dl < dr)
			{
				stack.push_back(node.right);
				stack.push_back(node.left);
			}
			else
			{
				stack.push_back(node.left);
				stack.push_back(node.right);
			}
		}

		const Tri &tri = tris_[best_tri];
		Vec3 pseudo;
		if (best_feature < 3)
			pseudo = vertex_normals_[tri[best_feature]];
		else if (best_feature < 6)
		{
			const int k = best_feature - 3;
			pseudo = edge_normals_.at(edge_key(tri[k], tri[(k + 1) % 3]));
		}
		else
			pseudo = face_normals_[best_tri];

		const Vec3 d = x - best_point;
		const double dist = d.norm();
		const double sign = d.dot(pseudo) < 0.0 ? -1.0 : 1.0;
		hit.point = best_point;
		hit.triangle = best_tri;
		hit.signed_distance = sign * dist;
		if (best_feature >= 6 || dist <= 1e-12)
		{
			// Face normals are exact; the direction to the point only adds rounding.
			hit.feature = SurfaceFeature::Face;
			hit.normal = pseudo;
		}
		else
		{
			hit.feature = best_feature < 3 ? SurfaceFeature::Vertex : SurfaceFeature::Edge;
			hit.normal = sign * d / dist;
			if (hit.feature == SurfaceFeature::Edge)
			{
				const int k = best_feature - 3;
				hit.edge_direction = (verts_.row(tri[(k + 1) % 3]) - verts_.row(tri[k])).transpose().normalized();
			}
		}
		return hit;
	}
} // namespace patternfit
