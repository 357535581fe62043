#pragma once

#include <patternfit/sim_mesh.hpp>

namespace patternfit
{
	enum class TriangleTerm
	{
		StretchU = 0,
		StretchV = 1,
		Shear = 2
	};

	/// Value and per-vertex gradient of one scalar triangle constraint.
	struct ScalarConstraint
	{
		double value = 0.0;
		std::array<Vec3, 3> grad;
	};

	/// Adjoint of the rest data of one triangle.
	struct RestTriangleAdjoint
	{
		std::array<double, 3> a{};
		std::array<double, 3> b{};
		double sqrt_area = 0.0;
	};

	/// Stretch and shear constraints scaled by sqrt(rest area):
	/// u: s(|f_u| - 1), v: s(|f_v| - 1), shear: s f_u . f_v.
	ScalarConstraint triangle_term(TriangleTerm term, const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest);

	/// All three terms at once.
	std::array<ScalarConstraint, 3> triangle_constraint(const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest);

	/// Reverse mode of triangle_term. Given adjoints of the value (c_bar) and of
	/// the gradient vectors (g_bar), adds the adjoints of the three positions to
	/// x_bar and of the rest data to rest_bar.
	void triangle_term_adjoint(TriangleTerm term, const Vec3 &x0, const Vec3 &x1, const Vec3 &x2, const RestTriangle &rest,
							   double c_bar, const std::array<Vec3, 3> &g_bar, std::array<Vec3, 3> &x_bar, RestTriangleAdjoint &rest_bar);

	/// Chains a rest-data adjoint (including an adjoint of the rest area) to the
	/// three 2D pattern points of the triangle.
	std::array<Vec2, 3> rest_triangle_pullback(const Vec2 &r0, const Vec2 &r1, const Vec2 &r2, const RestTriangleAdjoint &bar,
											   double area_bar);
} // namespace patternfit
