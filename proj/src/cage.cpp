#include <patternfit/cage.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace patternfit
{
	namespace
	{
		constexpr double kPi = std::numbers::pi;

		// Outward normal of an edge direction for a counterclockwise polygon.
		Vec2 outward_perp(const Vec2 &d) { return {d.y(), -d.x()}; }

		double segment_distance(const Vec2 &p, const Vec2 &a, const Vec2 &b)
		{
			const Vec2 ab = b - a;
			const double len2 = ab.squaredNorm();
			const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
			return (a + t * ab - p).norm();
		}

		void dp_recurse(const Points2 &pts, int first, int last, double tol, std::vector<char> &keep)
		{
			if (last <= first + 1)
				return;
			const Vec2 a = pts.row(first), b = pts.row(last);
			double best = -1.0;
			int idx = -1;
			for (int i = first + 1; i < last; ++i)
			{
				const double d = segment_distance(pts.row(i), a, b);
				if (d > best)
				{
					best = d;
					idx = i;
				}
			}
			if (best > tol)
			{
				keep[idx] = 1;
				dp_recurse(pts, first, idx, tol, keep);
				dp_recurse(pts, idx, last, tol, keep);
			}
		}

		double diameter(const Points2 &p)
		{
			const Vec2 lo = p.colwise().minCoeff();
			const Vec2 hi = p.colwise().maxCoeff();
			return (hi - lo).norm();
		}

		bool encloses(const Points2 &poly, const Points2 &pts, double min_clearance)
		{
			for (Eigen::Index i = 0; i < pts.rows(); ++i)
			{
				const Vec2 p = pts.row(i);
				if (winding_number(poly, p) == 0 || distance_to_polygon_boundary(poly, p) <= min_clearance)
					return false;
			}
			return true;
		}

		Points2 split_longest_edges(Points2 poly, int count)
		{
			while (poly.rows() < count)
			{
				const int n = int(poly.rows());
				int best = 0;
				double best_len = -1.0;
				for (int j = 0; j < n; ++j)
				{
					const double len = (poly.row((j + 1) % n) - poly.row(j)).norm();
					if (len > best_len * (1.0 + 1e-12))
					{
						best_len = len;
						best = j;
					}
				}
				Points2 grown(n + 1, 2);
				grown.topRows(best + 1) = poly.topRows(best + 1);
				grown.row(best + 1) = 0.5 * (poly.row(best) + poly.row((best + 1) % n));
				grown.bottomRows(n - best - 1) = poly.bottomRows(n - best - 1);
				poly = std::move(grown);
			}
			return poly;
		}
	} // namespace

	double polygon_signed_area(const Points2 &polygon)
	{
		double a = 0.0;
		const Eigen::Index n = polygon.rows();
		for (Eigen::Index i = 0; i < n; ++i)
			a += cross2(polygon.row(i), polygon.row((i + 1) % n));
		return 0.5 * a;
	}

	bool polygon_is_simple(const Points2 &polygon)
	{
		const int n = int(polygon.rows());
		if (n < 3)
			return false;
		for (int i = 0; i < n; ++i)
		{
			const Vec2 a = polygon.row(i), b = polygon.row((i + 1) % n);
			if ((b - a).norm() == 0.0)
				return false;
			for (int j = i + 1; j < n; ++j)
			{
				if (j == i + 1 || (i == 0 && j == n - 1))
					continue;
				const Vec2 c = polygon.row(j), d = polygon.row((j + 1) % n);
				const double d1 = cross2(b - a, c - a), d2 = cross2(b - a, d - a);
				const double d3 = cross2(d - c, a - c), d4 = cross2(d - c, b - c);
				if (((d1 >= 0 && d2 <= 0) || (d1 <= 0 && d2 >= 0)) && ((d3 >= 0 && d4 <= 0) || (d3 <= 0 && d4 >= 0)))
				{
					// Collinear disjoint segments do not intersect.
					if (d1 == 0 && d2 == 0)
					{
						const double len = (b - a).squaredNorm();
						const double t0 = (c - a).dot(b - a) / len, t1 = (d - a).dot(b - a) / len;
						if (std::max(t0, t1) < 0.0 || std::min(t0, t1) > 1.0)
							continue;
					}
					return false;
				}
			}
		}
		return true;
	}

	int winding_number(const Points2 &polygon, const Vec2 &p)
	{
		int wn = 0;
		const Eigen::Index n = polygon.rows();
		for (Eigen::Index i = 0; i < n; ++i)
		{
			const Vec2 a = polygon.row(i), b = polygon.row((i + 1) % n);
			if (a.y() <= p.y())
			{
				if (b.y() > p.y() && cross2(b - a, p - a) > 0)
					++wn;
			}
			else if (b.y() <= p.y() && cross2(b - a, p - a) < 0)
				--wn;
		}
		return wn;
	}

	double distance_to_polygon_boundary(const Points2 &polygon, const Vec2 &p)
	{
		double best = std::numeric_limits<double>::infinity();
		const Eigen::Index n = polygon.rows();
		for (Eigen::Index i = 0; i < n; ++i)
			best = std::min(best, segment_distance(p, polygon.row(i), polygon.row((i + 1) % n)));
		return best;
	}

	Points2 simplify_closed_polygon(const Points2 &polygon, double tolerance)
	{
		const int n = int(polygon.rows());
		if (n <= 3)
			return polygon;
		// Split at the vertex farthest from vertex 0 and simplify both chains.
		int far = 1;
		for (int i = 1; i < n; ++i)
			if ((polygon.row(i) - polygon.row(0)).squaredNorm() > (polygon.row(far) - polygon.row(0)).squaredNorm())
				far = i;
		Points2 closed(n + 1, 2);
		closed.topRows(n) = polygon;
		closed.row(n) = polygon.row(0);
		std::vector<char> keep(n + 1, 0);
		keep[0] = keep[far] = keep[n] = 1;
		dp_recurse(closed, 0, far, tolerance, keep);
		dp_recurse(closed, far, n, tolerance, keep);

		std::vector<int> ids;
		for (int i = 0; i < n; ++i)
			if (keep[i])
				ids.push_back(i);
		// Collinear survivors (possible at vertex 0 / far) are dropped.
		std::vector<int> out;
		for (size_t k = 0; k < ids.size(); ++k)
		{
			const Vec2 prev = polygon.row(ids[(k + ids.size() - 1) % ids.size()]);
			const Vec2 cur = polygon.row(ids[k]);
			const Vec2 next = polygon.row(ids[(k + 1) % ids.size()]);
			if (ids.size() - (k - out.size()) > 3 && segment_distance(cur, prev, next) <= tolerance
				&& std::abs(cross2(cur - prev, next - cur)) <= tolerance * (next - prev).norm())
				continue;
			out.push_back(ids[k]);
		}
		Points2 res(out.size(), 2);
		for (size_t k = 0; k < out.size(); ++k)
			res.row(Eigen::Index(k)) = polygon.row(out[k]);
		return res;
	}

	Points2 offset_polygon(const Points2 &polygon, double distance)
	{
		const int n = int(polygon.rows());
		Points2 out(n, 2);
		for (int i = 0; i < n; ++i)
		{
			const Vec2 prev = polygon.row((i + n - 1) % n), cur = polygon.row(i), next = polygon.row((i + 1) % n);
			const Vec2 n1 = outward_perp(cur - prev).normalized();
			const Vec2 n2 = outward_perp(next - cur).normalized();
			const double denom = 1.0 + n1.dot(n2);
			const Vec2 miter = denom > 1e-6 ? Vec2((n1 + n2) / denom) : Vec2(n1);
			out.row(i) = cur + distance * miter;
		}
		return out;
	}

	Cage make_cage(std::string panel_id, const Points2 &vertices)
	{
		if (vertices.rows() < 3)
			throw ValidationError("cage of panel '" + panel_id + "' needs at least 3 vertices");
		if (!polygon_is_simple(vertices))
			throw ValidationError("cage of panel '" + panel_id + "' is not a simple polygon");
		if (polygon_signed_area(vertices) <= 0.0)
			throw ValidationError("cage of panel '" + panel_id + "' is not counterclockwise");
		Cage cage;
		cage.panel_id = std::move(panel_id);
		cage.vertices = vertices;
		const int n = int(vertices.rows());
		cage.rest_edge_lengths.resize(n);
		cage.rest_edge_normals.resize(n, 2);
		for (int j = 0; j < n; ++j)
		{
			const Vec2 d = vertices.row((j + 1) % n) - vertices.row(j);
			cage.rest_edge_lengths[j] = d.norm();
			cage.rest_edge_normals.row(j) = outward_perp(d) / d.norm();
		}
		return cage;
	}

	Cage build_cage(const Panel &panel, double margin, int max_vertices, int min_vertices)
	{
		if (!(margin > 0.0))
			throw ValidationError("cage margin for panel '" + panel.id + "' must be positive (strict enclosure)");
		if (max_vertices < 4)
			throw ValidationError("cage max_vertices must be at least 4");
		const std::vector<std::vector<int>> loops =
			panel.boundary_loops.empty() ? compute_boundary_loops(panel) : panel.boundary_loops;
		const auto &outer = loops.front();
		Points2 boundary(outer.size(), 2);
		for (size_t i = 0; i < outer.size(); ++i)
			boundary.row(Eigen::Index(i)) = panel.vertices.row(outer[i]);

		const Points2 offset = offset_polygon(boundary, margin);
		const double diam = diameter(offset);
		const double clearance = 1e-3 * margin;

		double tol = 1e-9 * diam;
		Points2 simplified = simplify_closed_polygon(offset, tol);
		while (simplified.rows() > max_vertices)
		{
			tol *= 1.2;
			simplified = simplify_closed_polygon(offset, tol);
		}

		auto acceptable = [&](const Points2 &poly) {
			return poly.rows() >= 3 && polygon_is_simple(poly) && polygon_signed_area(poly) > 0.0
				   && encloses(poly, panel.vertices, clearance);
		};
		if (!acceptable(simplified))
		{
			const Points2 pushed = offset_polygon(simplified, tol);
			if (!acceptable(pushed))
				throw ValidationError(fmt::format("cannot build a simple enclosing cage for panel '{}' with max_vertices={}; "
												  "increase max_vertices",
												  panel.id, max_vertices));
			simplified = pushed;
		}
		if (min_vertices > simplified.rows())
			simplified = split_longest_edges(simplified, std::min(min_vertices, std::max(max_vertices, min_vertices)));
		return make_cage(panel.id, simplified);
	}

	CageCoords compute_green_coords(const Cage &cage, const Points2 &points)
	{
		const int nc = cage.size();
		const int np = int(points.rows());
		CageCoords coords;
		coords.w1 = Eigen::MatrixXd::Zero(np, nc);
		coords.w2 = Eigen::MatrixXd::Zero(np, nc);
		const double diam = diameter(cage.vertices);

		for (int i = 0; i < np; ++i)
		{
			const Vec2 eta = points.row(i);
			if (winding_number(cage.vertices, eta) == 0 || distance_to_polygon_boundary(cage.vertices, eta) <= 1e-12 * diam)
				throw ValidationError(fmt::format("vertex {} ({:.6g}, {:.6g}) of panel '{}' is not strictly inside its cage", i, eta.x(),
												  eta.y(), cage.panel_id));
			for (int j = 0; j < nc; ++j)
			{
				const int j1 = (j + 1) % nc;
				const Vec2 v1 = cage.vertices.row(j), v2 = cage.vertices.row(j1);
				const Vec2 a = v2 - v1;
				const Vec2 b = v1 - eta;
				const Vec2 n = cage.rest_edge_normals.row(j);
				const double len = cage.rest_edge_lengths[j];
				const double q = a.squaredNorm();
				const double s = b.squaredNorm();
				const double r = 2.0 * a.dot(b);
				const double cr = std::abs(cross2(a, b));

				if (cr <= 1e-13 * std::sqrt(q * s))
				{
					// Point on the supporting line, outside the segment: the
					// double-layer term vanishes and the single layer integrates
					// log|t| in closed form.
					const double beta = a.dot(b) / q;
					auto f = [](double u) { return u == 0.0 ? 0.0 : u * std::log(std::abs(u)) - u; };
					const double integral = std::log(len) + f(beta + 1.0) - f(beta);
					coords.w2(i, j) = -len / (2.0 * kPi) * integral;
					continue;
				}

				const double srt = 2.0 * cr; // sqrt(4 s q - r^2)
				const double l0 = std::log(s);
				const double l1 = std::log(s + q + r);
				const double a10 = (std::atan((2.0 * q + r) / srt) - std::atan(r / srt)) / srt;
				const double l10 = l1 - l0;

				// Single layer: -(1/2pi) * integral of log|xi - eta| over the edge.
				coords.w2(i, j) = -len / (4.0 * kPi) * ((4.0 * s - r * r / q) * a10 + r / (2.0 * q) * l10 + l1 - 2.0);

				// Double layer with hat functions (1 - t) and t.
				const double ba = len * b.dot(n);
				const double i0 = 2.0 * a10;
				const double i1 = l10 / (2.0 * q) - a10 * r / q;
				coords.w1(i, j) += ba / (2.0 * kPi) * (i0 - i1);
				coords.w1(i, j1) += ba / (2.0 * kPi) * i1;
			}
		}
		return coords;
	}

	namespace
	{
		void check_cage_points(const Cage &rest, const Points2 &cage_points)
		{
			if (cage_points.rows() != rest.vertices.rows())
				throw ValidationError(fmt::format("cage of panel '{}': expected {} vertices, got {}", rest.panel_id, rest.size(), cage_points.rows()));
			const int n = int(cage_points.rows());
			for (int j = 0; j < n; ++j)
				if ((cage_points.row((j + 1) % n) - cage_points.row(j)).norm() <= 1e-12 * rest.rest_edge_lengths[j])
					throw NumericalError(fmt::format("cage of panel '{}': deformed edge {} has zero length", rest.panel_id, j));
		}
	} // namespace

	Points2 deform(const CageCoords &coords, const Cage &rest, const Points2 &cage_points)
	{
		check_cage_points(rest, cage_points);
		const int n = int(cage_points.rows());
		Points2 scaled_normals(n, 2);
		for (int j = 0; j < n; ++j)
		{
			const Vec2 d = cage_points.row((j + 1) % n) - cage_points.row(j);
			scaled_normals.row(j) = outward_perp(d) / rest.rest_edge_lengths[j];
		}
		Points2 out = coords.w1 * cage_points + coords.w2 * scaled_normals;
		return out;
	}

	Eigen::MatrixXd cage_jacobian(const CageCoords &coords, const Cage &rest, const Points2 &cage_points)
	{
		check_cage_points(rest, cage_points);
		const int np = int(coords.w1.rows());
		const int nc = int(coords.w1.cols());
		Eigen::Matrix2d perp; // outward_perp as a matrix
		perp << 0.0, 1.0, -1.0, 0.0;
		Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(2 * np, 2 * nc);
		for (int i = 0; i < np; ++i)
			for (int j = 0; j < nc; ++j)
			{
				const int jm = (j + nc - 1) % nc;
				// cage vertex j ends edge j-1 and starts edge j.
				const double normal_coeff = coords.w2(i, jm) / rest.rest_edge_lengths[jm] - coords.w2(i, j) / rest.rest_edge_lengths[j];
				jac.block<2, 2>(2 * i, 2 * j) = coords.w1(i, j) * Eigen::Matrix2d::Identity() + normal_coeff * perp;
			}
		return jac;
	}

	std::string cage_svg(const Cage &cage, const Points2 &cage_points, const Panel &panel, const Points2 &pattern)
	{
		Points2 all(cage_points.rows() + pattern.rows() + cage.vertices.rows(), 2);
		all << cage_points, pattern, cage.vertices;
		const Vec2 lo = all.colwise().minCoeff();
		const Vec2 hi = all.colwise().maxCoeff();
		const double pad = 0.05 * (hi - lo).norm();
		const double w = hi.x() - lo.x() + 2 * pad, h = hi.y() - lo.y() + 2 * pad;
		auto px = [&](const Vec2 &p) { return fmt::format("{:.6f},{:.6f}", p.x() - lo.x() + pad, hi.y() - p.y() + pad); };

		std::string svg = fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {:.6f} {:.6f}">)", w, h);
		svg += "\n";
		for (const Tri &t : panel.triangles)
			svg += fmt::format(R"(<polygon points="{} {} {}" fill="none" stroke="#888" stroke-width="{:.6f}"/>)", px(pattern.row(t[0])),
							   px(pattern.row(t[1])), px(pattern.row(t[2])), 0.001 * w)
				   + "\n";
		auto poly = [&](const Points2 &p, const char *color) {
			std::string pts;
			for (Eigen::Index i = 0; i < p.rows(); ++i)
				pts += px(p.row(i)) + " ";
			return fmt::format(R"(<polygon points="{}" fill="none" stroke="{}" stroke-width="{:.6f}"/>)", pts, color, 0.003 * w) + "\n";
		};
		svg += poly(cage.vertices, "#bbb");
		svg += poly(cage_points, "#d33");
		svg += "</svg>\n";
		return svg;
	}
} // namespace patternfit
