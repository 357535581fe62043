#include <patternfit/pattern.hpp>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <set>

namespace patternfit
{
	namespace
	{
		struct Frame
		{
			Vec2 origin;
			Eigen::Matrix2d axes; // columns, right-handed
		};

		Eigen::Matrix2d right_handed(const Vec2 &e1)
		{
			Eigen::Matrix2d m;
			m.col(0) = e1.normalized();
			m.col(1) = Vec2(-m(1, 0), m(0, 0));
			return m;
		}

		// Principal axes of the outer boundary polygon plus, when those are
		// ill-conditioned, frames aligned with the longest boundary edges.
		std::vector<Frame> candidate_frames(const Panel &panel)
		{
			const auto &loop = panel.boundary_loops.front();
			Points2 pts(loop.size(), 2);
			for (size_t i = 0; i < loop.size(); ++i)
				pts.row(i) = panel.vertices.row(loop[i]);
			const Vec2 c = pts.colwise().mean();
			Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
			for (Eigen::Index i = 0; i < pts.rows(); ++i)
			{
				const Vec2 d = Vec2(pts.row(i)) - c;
				cov += d * d.transpose();
			}
			Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov);
			std::vector<Frame> frames;
			frames.push_back({c, right_handed(eig.eigenvectors().col(1))});

			const double l0 = eig.eigenvalues()(0), l1 = eig.eigenvalues()(1);
			if (l1 <= 0.0 || l0 / l1 > 0.98)
			{
				double best = -1.0;
				for (size_t i = 0; i < loop.size(); ++i)
					best = std::max(best, (pts.row((i + 1) % loop.size()) - pts.row(i)).norm());
				for (size_t i = 0; i < loop.size(); ++i)
				{
					const Vec2 e = pts.row((i + 1) % loop.size()) - pts.row(i);
					if (e.norm() >= best * (1.0 - 1e-9))
						frames.push_back({c, right_handed(e)});
				}
			}
			return frames;
		}

		double diameter(const Panel &p)
		{
			const Vec2 lo = p.vertices.colwise().minCoeff();
			const Vec2 hi = p.vertices.colwise().maxCoeff();
			return (hi - lo).norm();
		}

		// Tries to match every vertex of `a` to a distinct vertex of `b` under x -> R x + t.
		bool match_vertices(const Panel &a, const Panel &b, const Eigen::Matrix2d &r, const Vec2 &t, double tol, std::vector<int> &corr)
		{
			const int n = a.num_vertices();
			corr.assign(n, -1);
			std::vector<char> used(n, 0);
			for (int i = 0; i < n; ++i)
			{
				const Vec2 q = r * Vec2(a.vertices.row(i)) + t;
				int best = -1;
				double best_d = tol;
				for (int j = 0; j < n; ++j)
				{
					const double d = (Vec2(b.vertices.row(j)) - q).norm();
					if (d <= best_d)
					{
						best_d = d;
						best = j;
					}
				}
				if (best < 0 || used[best])
					return false;
				used[best] = 1;
				corr[i] = best;
			}
			return true;
		}
	} // namespace

	std::vector<SymmetryPair> detect_flip_symmetry(const GarmentSpec &spec, double tol_fraction)
	{
		std::vector<SymmetryPair> pairs = spec.symmetry_pairs;
		std::set<std::string> taken;
		for (const SymmetryPair &p : pairs)
		{
			taken.insert(p.a);
			taken.insert(p.b);
		}

		// Work on copies with boundary loops available.
		std::vector<Panel> panels = spec.panels;
		for (Panel &p : panels)
			if (p.boundary_loops.empty())
				p.boundary_loops = compute_boundary_loops(p);

		const Eigen::Matrix2d flips[2] = {Eigen::Vector2d(1.0, -1.0).asDiagonal(), Eigen::Vector2d(-1.0, 1.0).asDiagonal()};

		for (size_t i = 0; i < panels.size(); ++i)
		{
			if (taken.count(panels[i].id))
				continue;
			for (size_t j = i + 1; j < panels.size(); ++j)
			{
				if (taken.count(panels[j].id) || taken.count(panels[i].id))
					continue;
				const Panel &a = panels[i];
				const Panel &b = panels[j];
				if (a.num_vertices() != b.num_vertices() || a.triangles.size() != b.triangles.size()
					|| a.boundary_loops.front().size() != b.boundary_loops.front().size())
					continue;
				const double tol = tol_fraction * std::max(diameter(a), diameter(b));

				bool found = false;
				for (const Frame &fa : candidate_frames(a))
				{
					for (const Frame &fb : candidate_frames(b))
					{
						for (const Eigen::Matrix2d &s : flips)
						{
							const Eigen::Matrix2d r = fb.axes * s * fa.axes.transpose();
							const Vec2 t = fb.origin - r * fa.origin;
							std::vector<int> corr;
							if (!match_vertices(a, b, r, t, tol, corr))
								continue;
							SymmetryPair pair;
							pair.a = a.id;
							pair.b = b.id;
							pair.correspondence = corr;
							Points2 dst(a.num_vertices(), 2);
							for (int k = 0; k < a.num_vertices(); ++k)
								dst.row(k) = b.vertices.row(corr[k]);
							std::tie(pair.reflection, pair.translation) = fit_reflection(a.vertices, dst);
							pairs.push_back(std::move(pair));
							taken.insert(a.id);
							taken.insert(b.id);
							found = true;
							break;
						}
						if (found)
							break;
					}
					if (found)
						break;
				}
			}
		}
		return pairs;
	}
} // namespace patternfit
