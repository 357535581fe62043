#include <patternfit/triangle_constraint.hpp>

#include <Eigen/LU>

namespace patternfit
{
	namespace
	{
		Vec3 combine(const std::array<double, 3> &c, const Vec3 &x0, const Vec3 &x1, const Vec3 &x2)
		{
			return c[0] * x0 + c[1] * x1 + c[2] * x2;
		}
	} // namespace

	ScalarConstraint triangle_term(TriangleTerm term, const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest)
	{
		ScalarConstraint out;
		const double s = rest.sqrt_area;
		if (term == TriangleTerm::Shear)
		{
			const Vec3 fu = combine(rest.a, x0, x1, x2);
			const Vec3 fv = combine(rest.b, x0, x1, x2);
			out.value = s * fu.dot(fv);
			for (int k = 0; k < 3; ++k)
				out.grad[k] = s * (rest.a[k] * fv + rest.b[k] * fu);
			return out;
		}
		const auto &c = term == TriangleTerm::StretchU ? rest.a : rest.b;
		const Vec3 f = combine(c, x0, x1, x2);
		const double len = f.norm();
		out.value = s * (len - 1.0);
		const Vec3 dir = len > 0.0 ? Vec3(f / len) : Vec3::Zero();
		for (int k = 0; k < 3; ++k)
			out.grad[k] = s * c[k] * dir;
		return out;
	}

	std::array<ScalarConstraint, 3> triangle_constraint(const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest)
	{
		return {triangle_term(TriangleTerm::StretchU, x0, x1, x2, rest), triangle_term(TriangleTerm::StretchV, x0, x1, x2, rest),
				triangle_term(TriangleTerm::Shear, x0, x1, x2, rest)};
	}

	void triangle_term_adjoint(TriangleTerm term, const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest,
							   double c_bar, const std::array<Vec3, 3> &g_bar, std::array<Vec3, 3> &x_bar, RestTriangleAdjoint &rest_bar)
	{
		const double s = rest.sqrt_area;
		const Vec3 *x[3] = {&x0, &x1, &x2};
		if (term == TriangleTerm::Shear)
		{
			const Vec3 fu = combine(rest.a, x0, x1, x2);
			const Vec3 fv = combine(rest.b, x0, x1, x2);
			Vec3 fu_bar = s * c_bar * fv;
			Vec3 fv_bar = s * c_bar * fu;
			rest_bar.sqrt_area += c_bar * fu.dot(fv);
			for (int k = 0; k < 3; ++k)
			{
				rest_bar.sqrt_area += g_bar[k].dot(rest.a[k] * fv + rest.b[k] * fu);
				rest_bar.a[k] += s * g_bar[k].dot(fv);
				rest_bar.b[k] += s * g_bar[k].dot(fu);
				fv_bar += s * rest.a[k] * g_bar[k];
				fu_bar += s * rest.b[k] * g_bar[k];
			}
			for (int k = 0; k < 3; ++k)
			{
				x_bar[k] += rest.a[k] * fu_bar + rest.b[k] * fv_bar;
				rest_bar.a[k] += x[k]->dot(fu_bar);
				rest_bar.b[k] += x[k]->dot(fv_bar);
			}
			return;
		}
		const bool use_u = term == TriangleTerm::StretchU;
		const auto &c = use_u ? rest.a : rest.b;
		auto &c_adj = use_u ? rest_bar.a : rest_bar.b;
		const Vec3 f = combine(c, x0, x1, x2);
		const double len = f.norm();
		if (len == 0.0)
			return;
		const Vec3 dir = f / len;
		Vec3 f_bar = s * c_bar * dir;
		rest_bar.sqrt_area += c_bar * (len - 1.0);
		Vec3 dir_bar = Vec3::Zero();
		for (int k = 0; k < 3; ++k)
		{
			rest_bar.sqrt_area += c[k] * dir.dot(g_bar[k]);
			c_adj[k] += s * dir.dot(g_bar[k]);
			dir_bar += s * c[k] * g_bar[k];
		}
		f_bar += (dir_bar - dir * dir.dot(dir_bar)) / len;
		for (int k = 0; k < 3; ++k)
		{
			x_bar[k] += c[k] * f_bar;
			c_adj[k] += x[k]->dot(f_bar);
		}
	}

	std::array<Vec2, 3> rest_triangle_pullback(const Vec2 &r0, const Vec2 &r1, const Vec2 &r2, const RestTriangleAdjoint &bar,
											   double area_bar)
	{
		Eigen::Matrix2d dm;
		dm.col(0) = r1 - r0;
		dm.col(1) = r2 - r0;
		const Eigen::Matrix2d d = dm.inverse();
		const double area = 0.5 * dm.determinant();

		// a = (-d00 - d10, d00, d10), b = (-d01 - d11, d01, d11)
		Eigen::Matrix2d d_bar;
		d_bar(0, 0) = bar.a[1] - bar.a[0];
		d_bar(1, 0) = bar.a[2] - bar.a[0];
		d_bar(0, 1) = bar.b[1] - bar.b[0];
		d_bar(1, 1) = bar.b[2] - bar.b[0];

		const double total_area_bar = area_bar + (bar.sqrt_area != 0.0 ? bar.sqrt_area / (2.0 * std::sqrt(area)) : 0.0);
		const Eigen::Matrix2d dm_bar = -d.transpose() * d_bar * d.transpose() + total_area_bar * area * d.transpose();
		return {Vec2(-dm_bar.col(0) - dm_bar.col(1)), Vec2(dm_bar.col(0)), Vec2(dm_bar.col(1))};
	}
} // namespace patternfit
