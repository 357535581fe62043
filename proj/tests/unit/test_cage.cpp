#include <patternfit/cage.hpp>
#include <patternfit/fixtures.hpp>
#include <patternfit/gradcheck.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace patternfit;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;

namespace
{
	/// Fan-triangulated convex polygon with vertices on a perturbed circle.
	Panel random_convex_panel(std::mt19937 &rng, int n)
	{
		std::uniform_real_distribution<double> u(0.0, 1.0);
		std::vector<double> angles;
		for (int i = 0; i < n; ++i)
			angles.push_back(2.0 * std::numbers::pi * (i + 0.8 * u(rng)) / n);
		Panel p;
		p.id = "convex";
		const double rx = 0.3 + 0.4 * u(rng), ry = 0.3 + 0.4 * u(rng);
		p.vertices.resize(n + 1, 2);
		p.vertices.row(0) << 0.0, 0.0;
		for (int i = 0; i < n; ++i)
			p.vertices.row(i + 1) << rx * std::cos(angles[i]), ry * std::sin(angles[i]);
		for (int i = 0; i < n; ++i)
			p.triangles.push_back({0, i + 1, (i + 1) % n + 1});
		p.boundary_loops = compute_boundary_loops(p);
		return p;
	}

	bool is_convex(const Points2 &poly)
	{
		const int n = int(poly.rows());
		for (int i = 0; i < n; ++i)
		{
			const Vec2 a = poly.row(i), b = poly.row((i + 1) % n), c = poly.row((i + 2) % n);
			if (cross2(b - a, c - b) < -1e-12)
				return false;
		}
		return true;
	}

	Points2 similarity(const Points2 &pts, double theta, double s, const Vec2 &t)
	{
		const Eigen::Matrix2d m = s * Eigen::Rotation2Dd(theta).toRotationMatrix();
		Points2 out = pts * m.transpose();
		out.rowwise() += t.transpose();
		return out;
	}

	Panel unit_square_panel()
	{
		Panel p = grid_panel("square", 1.0, 1.0, 6, 6);
		p.boundary_loops = compute_boundary_loops(p);
		return p;
	}

	double max_singular_ratio(const Panel &panel, const Points2 &deformed)
	{
		double worst = 1.0;
		for (const Tri &t : panel.triangles)
		{
			Eigen::Matrix2d rest, def;
			rest.col(0) = (panel.vertices.row(t[1]) - panel.vertices.row(t[0])).transpose();
			rest.col(1) = (panel.vertices.row(t[2]) - panel.vertices.row(t[0])).transpose();
			def.col(0) = (deformed.row(t[1]) - deformed.row(t[0])).transpose();
			def.col(1) = (deformed.row(t[2]) - deformed.row(t[0])).transpose();
			const Eigen::Vector2d sv = Eigen::JacobiSVD<Eigen::Matrix2d>(def * rest.inverse()).singularValues();
			worst = std::max(worst, sv[0] / sv[1]);
		}
		return worst;
	}
} // namespace

TEST_CASE("unit square cage with margin 0.1 is a square of side 1.2")
{
	const Cage cage = build_cage(unit_square_panel(), 0.1, 4);
	REQUIRE(cage.size() == 4);
	CHECK_THAT(polygon_signed_area(cage.vertices), WithinAbs(1.44, 1e-12));
	for (int j = 0; j < 4; ++j)
	{
		CHECK_THAT(cage.rest_edge_lengths[j], WithinAbs(1.2, 1e-12));
		CHECK_THAT(Vec2(cage.rest_edge_normals.row(j)).norm(), WithinAbs(1.0, 1e-14));
	}
	CHECK_THAT(cage.vertices.col(0).minCoeff(), WithinAbs(-0.1, 1e-12));
	CHECK_THAT(cage.vertices.col(1).maxCoeff(), WithinAbs(1.1, 1e-12));
}

TEST_CASE("cage construction errors")
{
	const Panel p = unit_square_panel();
	CHECK_THROWS_AS(build_cage(p, 0.0, 8), ValidationError);
	CHECK_THROWS_AS(build_cage(p, 0.1, 3), ValidationError);
	Points2 bow(4, 2);
	bow << 0, 0, 1, 1, 1, 0, 0, 1;
	CHECK_THROWS_AS(make_cage("bow", bow), ValidationError);
}

TEST_CASE("convex panels get convex enclosing cages")
{
	std::mt19937 rng(3);
	for (int k = 0; k < 50; ++k)
	{
		const Panel p = random_convex_panel(rng, 5 + k % 20);
		const Cage cage = build_cage(p, 0.02, 16);
		CHECK(cage.size() <= 16);
		CHECK(is_convex(cage.vertices));
		CHECK(polygon_is_simple(cage.vertices));
		for (int i = 0; i < p.num_vertices(); ++i)
		{
			CHECK(winding_number(cage.vertices, p.vertices.row(i)) != 0);
			CHECK(distance_to_polygon_boundary(cage.vertices, p.vertices.row(i)) > 0.0);
		}
	}
}

TEST_CASE("green coordinates reproduce the rest panel")
{
	const Panel p = unit_square_panel();
	const Cage cage = build_cage(p, 0.05, 16, 9);
	const CageCoords c = compute_green_coords(cage, p.vertices);
	const Points2 back = deform(c, cage, cage.vertices);
	CHECK((back - p.vertices).cwiseAbs().maxCoeff() < 1e-8);
	CHECK((c.w1.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-8);
}

TEST_CASE("regular cage gives equal weights at its centre")
{
	for (int n : {3, 5, 8, 13})
	{
		Points2 poly(n, 2);
		for (int j = 0; j < n; ++j)
			poly.row(j) << std::cos(2.0 * std::numbers::pi * j / n), std::sin(2.0 * std::numbers::pi * j / n);
		const Cage cage = make_cage("regular", poly);
		const CageCoords c = compute_green_coords(cage, Points2::Zero(1, 2));
		for (int j = 0; j < n; ++j)
		{
			CHECK_THAT(c.w1(0, j), WithinAbs(1.0 / n, 1e-12));
			CHECK_THAT(c.w2(0, j), WithinAbs(c.w2(0, 0), 1e-12));
		}
	}
}

TEST_CASE("points on or outside the cage are rejected")
{
	const Cage cage = build_cage(unit_square_panel(), 0.1, 4);
	Points2 pts(3, 2);
	pts << 0.5, 0.5, 2.0, 0.5, 0.5, 0.5;
	CHECK_THROWS_WITH(compute_green_coords(cage, pts), ContainsSubstring("1"));
	Points2 edge(1, 2);
	edge << -0.1, 0.5;
	CHECK_THROWS_AS(compute_green_coords(cage, edge), ValidationError);
}

TEST_CASE("cage translation moves every point by the same vector")
{
	const Panel p = unit_square_panel();
	const Cage cage = build_cage(p, 0.05, 16, 7);
	const CageCoords c = compute_green_coords(cage, p.vertices);
	const Vec2 t(0.3, -1.7);
	Points2 z = cage.vertices;
	z.rowwise() += t.transpose();
	Points2 expect = p.vertices;
	expect.rowwise() += t.transpose();
	CHECK((deform(c, cage, z) - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("similarity equivariance on random panels and cages")
{
	std::mt19937 rng(5);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	for (int k = 0; k < 30; ++k)
	{
		const Panel p = random_convex_panel(rng, 6 + k % 10);
		const Cage cage = build_cage(p, 0.03, 16, 4 + k % 8);
		const CageCoords c = compute_green_coords(cage, p.vertices);
		const double th = std::numbers::pi * u(rng), s = 0.5 + std::abs(u(rng)) * 1.5;
		const Vec2 t(u(rng), u(rng));
		const Points2 got = deform(c, cage, similarity(cage.vertices, th, s, t));
		CHECK((got - similarity(p.vertices, th, s, t)).cwiseAbs().maxCoeff() < 1e-8);
	}
}

TEST_CASE("green deformation is less distorting than bilinear stretch")
{
	const Panel p = unit_square_panel();
	const Cage cage = build_cage(p, 0.1, 4);
	const CageCoords c = compute_green_coords(cage, p.vertices);
	Points2 z = cage.vertices;
	z.col(0) *= 2.0;
	const Points2 green = deform(c, cage, z);
	// Bilinear interpolation over the bounding box: the stretch itself.
	Points2 bilinear = p.vertices;
	bilinear.col(0) *= 2.0;
	CHECK(max_singular_ratio(p, green) < max_singular_ratio(p, bilinear));
	CHECK(max_singular_ratio(p, bilinear) == Catch::Approx(2.0));
}

TEST_CASE("cage jacobian")
{
	std::mt19937 rng(9);
	std::uniform_real_distribution<double> u(-1.0, 1.0);

	SECTION("matches central differences on random cages")
	{
		for (int k = 0; k < 10; ++k)
		{
			const Panel p = random_convex_panel(rng, 7 + k);
			const Cage cage = build_cage(p, 0.04, 12, 4 + k);
			const CageCoords c = compute_green_coords(cage, p.vertices);
			Points2 z = cage.vertices;
			for (int j = 0; j < z.rows(); ++j)
				z.row(j) += 0.02 * Vec2(u(rng), u(rng)).transpose();
			const Eigen::MatrixXd jac = cage_jacobian(c, cage, z);
			Eigen::MatrixXd fd(jac.rows(), jac.cols());
			const double h = 1e-6;
			for (int col = 0; col < jac.cols(); ++col)
			{
				Points2 zp = z, zm = z;
				zp.data()[col] += h;
				zm.data()[col] -= h;
				const Points2 dp = deform(c, cage, zp), dm = deform(c, cage, zm);
				fd.col(col) = (flat(dp) - flat(dm)) / (2.0 * h);
			}
			CHECK((jac - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff() < 1e-5);
		}
	}
	SECTION("translation direction")
	{
		const Panel p = unit_square_panel();
		const Cage cage = build_cage(p, 0.05, 16, 6);
		const CageCoords c = compute_green_coords(cage, p.vertices);
		const Eigen::MatrixXd jac = cage_jacobian(c, cage, cage.vertices);
		Points2 dz(cage.size(), 2);
		dz.rowwise() = Vec2(0.4, -0.9).transpose();
		const Eigen::VectorXd dx = jac * flat(dz);
		for (int i = 0; i < p.num_vertices(); ++i)
		{
			CHECK_THAT(dx[2 * i], WithinAbs(0.4, 1e-10));
			CHECK_THAT(dx[2 * i + 1], WithinAbs(-0.9, 1e-10));
		}
	}
	SECTION("first-order Taylor remainder vanishes")
	{
		// Scaled edge normals are rotated edges over rest lengths, so the map is linear in the cage.
		const Panel p = unit_square_panel();
		const Cage cage = build_cage(p, 0.05, 16, 6);
		const CageCoords c = compute_green_coords(cage, p.vertices);
		const Eigen::MatrixXd jac = cage_jacobian(c, cage, cage.vertices);
		Points2 dir(cage.size(), 2);
		for (int j = 0; j < dir.rows(); ++j)
			dir.row(j) << u(rng), u(rng);
		const Points2 rest = deform(c, cage, cage.vertices);
		for (double eps : {1e-1, 1e-2, 1e-3})
		{
			const Points2 moved = deform(c, cage, Points2(cage.vertices + eps * dir));
			const double remainder = (flat(moved) - flat(rest) - eps * jac * flat(dir)).cwiseAbs().maxCoeff();
			CHECK(remainder < 1e-12);
		}
	}
}

TEST_CASE("moderate cage deformations keep triangles positively oriented")
{
	std::mt19937 rng(13);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	const TubeSkirt t = make_tube_skirt({.nx = 8, .ny = 10});
	Panel p = t.spec.panels[0];
	const Cage cage = build_cage(p, 0.03, 16, 8);
	const CageCoords c = compute_green_coords(cage, p.vertices);
	int tried = 0;
	while (tried < 40)
	{
		Points2 z = cage.vertices;
		const double amp = 0.08 * std::abs(u(rng));
		for (int j = 0; j < z.rows(); ++j)
			z.row(j) += amp * Vec2(u(rng), u(rng)).transpose();
		bool within = polygon_is_simple(z) && polygon_signed_area(z) > 0.0;
		for (int j = 0; j < z.rows() && within; ++j)
		{
			const double len = (z.row((j + 1) % z.rows()) - z.row(j)).norm();
			within = std::abs(len / cage.rest_edge_lengths[j] - 1.0) <= 0.25;
		}
		if (!within)
			continue;
		++tried;
		const Points2 d = deform(c, cage, z);
		for (const Tri &tri : p.triangles)
			CHECK(cross2(d.row(tri[1]) - d.row(tri[0]), d.row(tri[2]) - d.row(tri[0])) > 0.0);
	}
}

TEST_CASE("check_cage reports passing checks on the tube panel")
{
	const TubeSkirt t = make_tube_skirt({.nx = 6, .ny = 8});
	const Cage cage = build_cage(t.spec.panels[0], 0.03, 16);
	for (const CheckResult &r : check_cage(t.spec.panels[0], cage))
	{
		INFO(r.name << " " << r.error);
		CHECK(r.passed());
	}
}
