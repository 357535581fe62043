#include <patternfit/fixtures.hpp>
#include <patternfit/gradcheck.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace patternfit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
	/// Two unit squares sewn along one vertical edge: panel a's right side to panel b's left side.
	GarmentSpec sewn_squares(double b_height = 1.0)
	{
		GarmentSpec spec;
		Panel a;
		a.id = "a";
		a.vertices.resize(4, 2);
		a.vertices << 0, 0, 1, 0, 1, 1, 0, 1;
		a.triangles = {{0, 1, 2}, {0, 2, 3}};
		Panel b = a;
		b.id = "b";
		b.vertices.col(0).array() += 2.0;
		b.vertices.col(1) *= b_height;
		spec.panels = {a, b};
		Seam s;
		s.id = "side";
		s.side_a = {"a", {1, 2}};
		s.side_b = {"b", {0, 3}};
		spec.seams = {s};
		spec.reference_drape3d.resize(8, 3);
		for (int p = 0; p < 2; ++p)
			for (int i = 0; i < 4; ++i)
				spec.reference_drape3d.row(4 * p + i) << spec.panels[p].vertices(i, 0), spec.panels[p].vertices(i, 1), 0.0;
		validate_garment(spec);
		return spec;
	}

	std::vector<Points2> vertices_of(const GarmentSpec &spec)
	{
		std::vector<Points2> out;
		for (const Panel &p : spec.panels)
			out.push_back(p.vertices);
		return out;
	}

	Points2 similarity(const Points2 &p, double angle, double s, const Vec2 &t)
	{
		Eigen::Matrix2d r;
		r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
		Points2 out = (p * (s * r).transpose());
		out.rowwise() += t.transpose();
		return out;
	}
} // namespace

TEST_CASE("vertex classes")
{
	const TubeSkirt t = make_tube_skirt({.nx = 4, .ny = 5});
	const std::vector<VertexClass> cls = classify_vertices(t.spec);
	const std::vector<int> off = t.spec.panel_offsets();
	REQUIRE(int(cls.size()) == off.back());
	// Per panel: 2 seam columns of 6, top/bottom boundary rows minus seam corners, 3x4 interior.
	for (int p = 0; p < 2; ++p)
	{
		int seam = 0, boundary = 0, interior = 0;
		for (int i = off[p]; i < off[p + 1]; ++i)
			(cls[i] == VertexClass::Seam ? seam : cls[i] == VertexClass::Boundary ? boundary : interior)++;
		CHECK(seam == 12);
		CHECK(boundary == 6);
		CHECK(interior == 12);
	}
}

TEST_CASE("shape match")
{
	const TubeSkirt t = make_tube_skirt({.nx = 4, .ny = 5});
	const std::vector<VertexClass> cls = classify_vertices(t.spec);
	const Points3 &target = t.target.positions;
	LossConfig cfg;

	SECTION("zero at the target")
	{
		const Loss3 l = loss_shape_match(target, target, cls, cfg);
		CHECK(l.value == 0.0);
		CHECK(l.grad.cwiseAbs().maxCoeff() == 0.0);
	}
	SECTION("single interior offset")
	{
		const int i = int(std::find(cls.begin(), cls.end(), VertexClass::Interior) - cls.begin());
		Points3 x = target;
		x(i, 0) += 0.1;
		const Loss3 l = loss_shape_match(x, target, cls, cfg);
		CHECK_THAT(l.value, WithinRel(1e-4, 1e-12));
		CHECK_THAT(l.grad(i, 0), WithinRel(0.002, 1e-12));
		CHECK(l.grad(i, 1) == 0.0);
		CHECK(l.grad(i, 2) == 0.0);
	}
	SECTION("rigid translation weighs each class")
	{
		const Vec3 shift(0.03, -0.04, 0.0);
		Points3 x = target;
		x.rowwise() += shift.transpose();
		int nb = 0, ns = 0, ni = 0;
		for (VertexClass c : cls)
			(c == VertexClass::Seam ? ns : c == VertexClass::Boundary ? nb : ni)++;
		const double t2 = shift.squaredNorm();
		const double expect = t2 * (cfg.alpha * nb + cfg.beta * ns + cfg.gamma * ni);
		CHECK_THAT(loss_shape_match(x, target, cls, cfg).value, WithinRel(expect, 1e-12));
	}
	SECTION("zero interior weight ignores interior vertices")
	{
		cfg.gamma = 0.0;
		Points3 x = target;
		std::mt19937 rng(3);
		std::uniform_real_distribution<double> u(-0.05, 0.05);
		for (int i = 0; i < x.size(); ++i)
			x.data()[i] += u(rng);
		const Loss3 l = loss_shape_match(x, target, cls, cfg);
		for (size_t i = 0; i < cls.size(); ++i)
			if (cls[i] == VertexClass::Interior)
				CHECK(l.grad.row(i).norm() == 0.0);
	}
	SECTION("size mismatch")
	{
		CHECK_THROWS_AS(loss_shape_match(target.topRows(3), target, cls, cfg), ValidationError);
	}
}

TEST_CASE("similarity fit")
{
	const Vec2 r1(1.0, 0.2), r2(-0.3, 0.9);
	SECTION("identity")
	{
		const Eigen::Matrix2d t = fit_similarity(r1, r2, r1, r2);
		CHECK((t - Eigen::Matrix2d::Identity()).norm() < 1e-14);
	}
	SECTION("scaled quarter turn")
	{
		Eigen::Matrix2d m;
		m << 0.0, -2.0, 2.0, 0.0;
		const Eigen::Matrix2d t = fit_similarity(m * r1, m * r2, r1, r2);
		CHECK((t - m).norm() < 1e-14);
	}
	SECTION("least squares optimum")
	{
		const Vec2 e1(0.8, 0.5), e2(-0.6, 0.7);
		const Eigen::Matrix2d t = fit_similarity(e1, e2, r1, r2);
		const double a = t(0, 0), b = t(1, 0);
		auto residual = [&](double aa, double bb)
		{
			Eigen::Matrix2d m;
			m << aa, -bb, bb, aa;
			return (e1 - m * r1).squaredNorm() + (e2 - m * r2).squaredNorm();
		};
		const double best = residual(a, b);
		for (double da : {-1e-3, 1e-3})
			for (double db : {-1e-3, 0.0, 1e-3})
			{
				CHECK(residual(a + da, b + db) > best);
				CHECK(residual(a + db, b + da) > best);
			}
	}
	SECTION("degenerate rest edges")
	{
		CHECK_THROWS_AS(fit_similarity(r1, r2, Vec2::Zero(), Vec2::Zero()), ValidationError);
	}
}

TEST_CASE("boundary curvature")
{
	GarmentSpec spec;
	spec.panels = {grid_panel("p", 1.0, 1.0, 2, 2)};
	spec.reference_drape3d.resize(9, 3);
	for (int i = 0; i < 9; ++i)
		spec.reference_drape3d.row(i) << spec.panels[0].vertices(i, 0), 0.0, -spec.panels[0].vertices(i, 1);
	validate_garment(spec);
	const std::vector<Points2> rest = vertices_of(spec);

	SECTION("zero at rest and under similarities")
	{
		const Loss2 l = loss_boundary_curvature(spec, rest, rest);
		CHECK(l.value < 1e-28);
		CHECK(l.grad[0].cwiseAbs().maxCoeff() < 1e-14);
		const std::vector<Points2> moved = {similarity(rest[0], 0.7, 1.3, Vec2(2.0, -1.0))};
		CHECK(loss_boundary_curvature(spec, moved, rest).value < 1e-26);
	}
	SECTION("an inward dent is penalized and pushed back")
	{
		// Top row is j = 0 with y = 1; the middle top vertex is index 1.
		std::vector<Points2> cur = rest;
		REQUIRE(cur[0](1, 1) == 1.0);
		cur[0](1, 1) -= 0.1;
		const Loss2 l = loss_boundary_curvature(spec, cur, rest);
		CHECK(l.value > 0.0);
		CHECK(-l.grad[0](1, 1) > 0.0);
	}
	SECTION("invariant under similarities of the current shape")
	{
		std::mt19937 rng(8);
		std::uniform_real_distribution<double> u(-0.05, 0.05);
		std::vector<Points2> cur = rest;
		for (int i = 0; i < cur[0].size(); ++i)
			cur[0].data()[i] += u(rng);
		const double base = loss_boundary_curvature(spec, cur, rest).value;
		REQUIRE(base > 0.0);
		const std::vector<Points2> moved = {similarity(cur[0], -1.1, 0.6, Vec2(0.3, 0.4))};
		// Residuals scale with the similarity factor.
		CHECK_THAT(loss_boundary_curvature(spec, moved, rest).value, WithinRel(0.36 * base, 1e-10));
	}
}

TEST_CASE("pattern match")
{
	SECTION("matching seam sides")
	{
		const GarmentSpec spec = sewn_squares();
		const Loss2 l = loss_pattern_match(spec, vertices_of(spec));
		CHECK(l.value == 0.0);
		CHECK(l.grad[0].cwiseAbs().maxCoeff() == 0.0);
	}
	SECTION("mirrored partner")
	{
		GarmentSpec spec = sewn_squares();
		std::vector<Points2> cur = vertices_of(spec);
		cur[1] = cur[0];
		cur[1].col(0) = -cur[1].col(0);
		CHECK(loss_pattern_match(spec, cur).value == 0.0);
	}
	SECTION("lengths 1 and 1.1")
	{
		const GarmentSpec spec = sewn_squares(1.1);
		const Loss2 l = loss_pattern_match(spec, vertices_of(spec));
		CHECK_THAT(l.value, WithinRel(0.0441, 1e-12));
		// d/d(b top y) of (1 - h^2)^2 = -4 (1 - h^2) h.
		CHECK_THAT(l.grad[1](3, 1), WithinRel(-4.0 * (1.0 - 1.21) * 1.1, 1e-12));
	}
	SECTION("equal scaling of both sides")
	{
		const GarmentSpec spec = sewn_squares();
		std::vector<Points2> cur = vertices_of(spec);
		cur[0] *= 1.7;
		cur[1] *= 1.7;
		CHECK(loss_pattern_match(spec, cur).value < 1e-24);
	}
}

TEST_CASE("total area")
{
	const GarmentSpec spec = sewn_squares();
	std::vector<Points2> cur = vertices_of(spec);
	SECTION("equal areas")
	{
		CHECK(loss_total_area(spec, cur, {1.0, 1.0}).value < 1e-30);
	}
	SECTION("0.48 against 0.50")
	{
		cur[0] *= std::sqrt(0.48);
		cur[1] *= std::sqrt(0.5);
		CHECK_THAT(loss_total_area(spec, cur, {0.5, 0.5}).value, WithinRel(4e-4, 1e-10));
	}
	SECTION("gradient matches finite differences")
	{
		cur[0](2, 0) += 0.13;
		cur[1](0, 1) -= 0.07;
		const std::vector<double> targets = {0.7, 1.4};
		const Loss2 l = loss_total_area(spec, cur, targets);
		auto f = [&](const Eigen::VectorXd &v) { return loss_total_area(spec, unpack(v, cur), targets).value; };
		const Eigen::VectorXd fd = central_difference(f, pack(cur), 1e-6);
		CHECK(relative_error(pack(l.grad), fd) < 1e-6);
	}
	SECTION("one target per panel")
	{
		CHECK_THROWS_AS(loss_total_area(spec, cur, {1.0}), ValidationError);
	}
}

TEST_CASE("total loss")
{
	const TubeSkirt t = make_tube_skirt({.nx = 4, .ny = 5});
	const std::vector<VertexClass> cls = classify_vertices(t.spec);
	const SimMesh mesh = assemble_sim_mesh(t.spec);
	const std::vector<Points2> rest = vertices_of(t.spec);
	LossConfig cfg;

	SECTION("perfect refit scores zero")
	{
		TargetDrape target;
		target.positions = t.spec.reference_drape3d;
		const std::vector<double> areas = {panel_area(t.spec.panels[0]), panel_area(t.spec.panels[1])};
		const LossBreakdown l = total_loss(target.positions, rest, rest, target, areas, t.spec, cls, cfg);
		CHECK(l.total < 1e-24);
	}

	std::mt19937 rng(12);
	std::uniform_real_distribution<double> u(-0.02, 0.02);
	std::vector<Points2> cur = rest;
	for (Points2 &p : cur)
		for (int i = 0; i < p.size(); ++i)
			p.data()[i] = 1.1 * p.data()[i] + u(rng);
	Points3 x = t.spec.reference_drape3d;
	for (int i = 0; i < x.size(); ++i)
		x.data()[i] += u(rng);
	const std::vector<double> areas = target_panel_areas(t.spec, mesh, t.target);

	SECTION("breakdown sums to the total")
	{
		const LossBreakdown l = total_loss(x, cur, rest, t.target, areas, t.spec, cls, cfg);
		const double sum = l.shape_match + cfg.w_curv * l.curvature + cfg.w_pm * l.pattern_match + cfg.w_ta * l.total_area;
		CHECK_THAT(l.total, WithinAbs(sum, 1e-12));
		CHECK(l.curvature > 0.0);
		CHECK(l.pattern_match > 0.0);
		CHECK(l.total_area > 0.0);
	}
	SECTION("disabling a term removes exactly its contribution")
	{
		const LossBreakdown all = total_loss(x, cur, rest, t.target, areas, t.spec, cls, cfg);
		LossConfig c = cfg;
		c.w_curv = 0.0;
		CHECK_THAT(total_loss(x, cur, rest, t.target, areas, t.spec, cls, c).total, WithinAbs(all.total - cfg.w_curv * all.curvature, 1e-12));
		c = cfg;
		c.w_pm = 0.0;
		CHECK_THAT(total_loss(x, cur, rest, t.target, areas, t.spec, cls, c).total, WithinAbs(all.total - cfg.w_pm * all.pattern_match, 1e-12));
		c = cfg;
		c.w_ta = 0.0;
		CHECK_THAT(total_loss(x, cur, rest, t.target, areas, t.spec, cls, c).total, WithinAbs(all.total - cfg.w_ta * all.total_area, 1e-12));
	}
	SECTION("every gradient matches finite differences")
	{
		for (const CheckResult &r : check_losses(t.spec, cur, rest, x, t.target, areas, cfg))
		{
			INFO(r.name << " " << r.error);
			CHECK(r.error < 1e-5);
		}
	}
}

TEST_CASE("target areas")
{
	const TubeSkirt t = make_tube_skirt({.nx = 4, .ny = 5});
	const SimMesh mesh = assemble_sim_mesh(t.spec);
	TargetDrape target = t.target;
	const std::vector<double> from_positions = target_panel_areas(t.spec, mesh, target);
	CHECK(from_positions[0] > panel_area(t.spec.panels[0]));
	target.total_area_per_panel[t.spec.panels[1].id] = 0.42;
	const std::vector<double> mixed = target_panel_areas(t.spec, mesh, target);
	CHECK(mixed[0] == from_positions[0]);
	CHECK(mixed[1] == 0.42);
	target.positions.resize(0, 3);
	CHECK_THROWS_AS(target_panel_areas(t.spec, mesh, target), ValidationError);
}

TEST_CASE("loss weights must be non-negative")
{
	LossConfig cfg;
	CHECK_NOTHROW(cfg.validate());
	cfg.w_pm = -1.0;
	CHECK_THROWS_AS(cfg.validate(), ValidationError);
	cfg = LossConfig{};
	cfg.gamma = -0.1;
	CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
