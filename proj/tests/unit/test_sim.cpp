#include <patternfit/fixtures.hpp>
#include <patternfit/triangle_constraint.hpp>
#include <patternfit/xpbd.hpp>

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace patternfit;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace
{
	SimMesh particles(int n)
	{
		SimMesh m;
		m.num_vertices = n;
		m.panel_offsets = {0, n};
		m.mass = Eigen::VectorXd::Ones(n);
		m.inv_mass = Eigen::VectorXd::Ones(n);
		m.pinned.assign(n, 0);
		return m;
	}

	/// Strip of width x length hanging from its top row, laid out either
	/// vertically (at rest) or horizontally (released to swing).
	GarmentSpec strip_spec(int nx, int ny, bool horizontal)
	{
		GarmentSpec spec;
		spec.panels = {grid_panel("strip", 0.1, 0.5, nx, ny)};
		const Points2 &v = spec.panels[0].vertices;
		spec.reference_drape3d.resize(v.rows(), 3);
		for (int i = 0; i < v.rows(); ++i)
			if (horizontal)
				spec.reference_drape3d.row(i) << v(i, 0), 1.0, v(i, 1) - 0.5;
			else
				spec.reference_drape3d.row(i) << v(i, 0), 0.5 + v(i, 1), 0.0;
		validate_garment(spec);
		return spec;
	}

	std::vector<int> top_row(int nx)
	{
		std::vector<int> out;
		for (int i = 0; i <= nx; ++i)
			out.push_back(i);
		return out;
	}

	double kinetic(const SimMesh &m, const Points3 &v)
	{
		double e = 0.0;
		for (int i = 0; i < m.num_vertices; ++i)
			e += 0.5 * m.mass[i] * v.row(i).squaredNorm();
		return e;
	}
} // namespace

TEST_CASE("triangle constraint values")
{
	const RestTriangle rest = make_rest_triangle({0, 0}, {1, 0}, {0, 1});
	SECTION("rest configuration")
	{
		for (const ScalarConstraint &c : triangle_constraint({0, 0, 0}, {1, 0, 0}, {0, 1, 0}, rest))
			CHECK_THAT(c.value, WithinAbs(0.0, 1e-15));
		// Rotated and translated copies are also at rest.
		const Eigen::Matrix3d r = Eigen::AngleAxisd(0.7, Vec3(1, 2, 3).normalized()).toRotationMatrix();
		const Vec3 t(0.3, -0.2, 5.0);
		for (const ScalarConstraint &c : triangle_constraint(t, r * Vec3(1, 0, 0) + t, r * Vec3(0, 1, 0) + t, rest))
			CHECK_THAT(c.value, WithinAbs(0.0, 1e-14));
	}
	SECTION("uniform stretch by two")
	{
		const auto c = triangle_constraint({0, 0, 0}, {2, 0, 0}, {0, 2, 0}, rest);
		CHECK_THAT(c[0].value, WithinAbs(std::sqrt(0.5), 1e-15));
		CHECK_THAT(c[1].value, WithinAbs(std::sqrt(0.5), 1e-15));
		CHECK_THAT(c[2].value, WithinAbs(0.0, 1e-15));
	}
}

TEST_CASE("triangle constraint gradients match central differences")
{
	std::mt19937 rng(17);
	std::uniform_real_distribution<double> u(-1.0, 1.0);
	for (int k = 0; k < 200; ++k)
	{
		const Vec2 r0(u(rng), u(rng)), r1(u(rng), u(rng)), r2(u(rng), u(rng));
		if (cross2(r1 - r0, r2 - r0) < 0.05)
			continue;
		const RestTriangle rest = make_rest_triangle(r0, r1, r2);
		std::array<Vec3, 3> x{Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))};
		const auto c = triangle_constraint(x[0], x[1], x[2], rest);
		const double h = 1e-7;
		for (int term = 0; term < 3; ++term)
		{
			double err = 0.0, scale = 0.0;
			for (int v = 0; v < 3; ++v)
				for (int d = 0; d < 3; ++d)
				{
					auto xp = x, xm = x;
					xp[v][d] += h;
					xm[v][d] -= h;
					const double fd = (triangle_constraint(xp[0], xp[1], xp[2], rest)[term].value -
									   triangle_constraint(xm[0], xm[1], xm[2], rest)[term].value) /
									  (2.0 * h);
					err = std::max(err, std::abs(c[term].grad[v][d] - fd));
					scale = std::max(scale, std::abs(fd));
				}
			CHECK(err / scale < 1e-5);
		}
	}
}

TEST_CASE("scalar xpbd solve")
{
	SECTION("two unit-mass particles at distance 2 with rest length 1")
	{
		// C = |p1 - p0| - 1 with unit gradients of opposite sign.
		Vec3 p0(0, 0, 0), p1(2, 0, 0);
		const Vec3 n = (p1 - p0).normalized();
		const double c = (p1 - p0).norm() - 1.0;
		const double dl = xpbd_delta_lambda(c, 1.0 + 1.0, 0.0, 0.0);
		CHECK(dl == -0.5);
		p0 += -n * dl;
		p1 += n * dl;
		CHECK(p0 == Vec3(0.5, 0, 0));
		CHECK(p1 == Vec3(1.5, 0, 0));
		CHECK((p1 - p0).norm() == 1.0);
	}
	SECTION("fully compliant limit")
	{
		CHECK_THAT(xpbd_delta_lambda(0.3, 2.0, 1e12, 0.7), WithinAbs(-0.7, 1e-9));
		CHECK_THAT(xpbd_delta_lambda(0.3, 2.0, 1e12, 0.0), WithinAbs(0.0, 1e-9));
	}
	SECTION("satisfied constraint")
	{
		CHECK(xpbd_delta_lambda(0.0, 2.0, 0.0, 0.0) == 0.0);
		CHECK(xpbd_delta_lambda(0.0, 2.0, 0.5, 0.0) == 0.0);
	}
	SECTION("one solve zeroes the residual of an isolated linear constraint")
	{
		std::mt19937 rng(1);
		std::uniform_real_distribution<double> u(0.0, 1.0);
		for (int k = 0; k < 100; ++k)
		{
			const double c = u(rng) - 0.5, w = 0.1 + u(rng), at = u(rng), lambda = u(rng) - 0.5;
			const double dl = xpbd_delta_lambda(c, w, at, lambda);
			// Linear constraint: C moves by w dl; the residual C + at * lambda reaches zero.
			const double before = std::abs(c + at * lambda);
			const double after = std::abs(c + w * dl + at * (lambda + dl));
			CHECK(after <= before + 1e-15);
			CHECK(after < 1e-14);
		}
	}
}

TEST_CASE("collision constraints against a plane")
{
	const BodyMesh plane = plane_body(1.0, 0.0);
	const BodyQuery body(plane);
	const double margin = 0.003;
	const SimMesh m = particles(1);
	Points3 x(1, 3);
	SECTION("twice the margin above is free")
	{
		x << 0.1, 2.0 * margin, 0.2;
		CHECK(collision_constraints(m, x, body, margin).empty());
	}
	SECTION("on the surface: value equals the margin, pushed upward")
	{
		x << 0.1, 0.0, 0.2;
		const auto cs = collision_constraints(m, x, body, margin);
		REQUIRE(cs.size() == 1);
		const ContactDistance d = contact_distance(cs[0], x.row(0));
		CHECK_THAT(cs[0].margin - d.distance, WithinAbs(margin, 1e-15));
		Eigen::VectorXd lambda = Eigen::VectorXd::Zero(1);
		xpbd_project(m, cs, 1.0 / 60.0, 1, x, lambda);
		CHECK_THAT(x(0, 1), WithinAbs(margin, 1e-15));
		CHECK(x(0, 0) == 0.1);
		CHECK(x(0, 2) == 0.2);
	}
	SECTION("a resting vertex predicted to leave keeps its contact")
	{
		Points3 start(1, 3);
		start << 0.1, margin, 0.2;
		x << 0.1, 10.0 * margin, 0.2;
		CHECK(collision_constraints(m, x, body, margin).empty());
		const auto cs = collision_constraints(m, x, body, margin, &start);
		REQUIRE(cs.size() == 1);
		// Inactive at the predicted position, so it cannot pull the vertex down.
		CHECK(cs[0].margin - contact_distance(cs[0], x.row(0)).distance < 0.0);
		Eigen::VectorXd lambda = Eigen::VectorXd::Zero(1);
		Points3 y = x;
		xpbd_project(m, cs, 1.0 / 60.0, 1, y, lambda);
		CHECK(y == x);
	}
}

TEST_CASE("collision constraints against a sphere")
{
	const BodyMesh sphere = sphere_body(1.0, 64, 32);
	const BodyQuery body(sphere);
	const double margin = 0.003;
	SimMesh m = particles(1);
	SECTION("point on a face")
	{
		const Tri &t = sphere.triangles[200];
		Points3 x(1, 3);
		x.row(0) = (sphere.vertices.row(t[0]) + sphere.vertices.row(t[1]) + sphere.vertices.row(t[2])) / 3.0;
		const auto cs = collision_constraints(m, x, body, margin);
		REQUIRE(cs.size() == 1);
		const ContactDistance d = contact_distance(cs[0], x.row(0));
		CHECK_THAT(cs[0].margin - d.distance, WithinAbs(margin, 1e-12));
		// Outward: the normal points away from the centre.
		CHECK(d.normal.dot(Vec3(x.row(0)).normalized()) > 0.99);
	}
	SECTION("point inside exits to the offset surface")
	{
		Points3 x(1, 3);
		x.row(0) = 0.9 * Vec3(0.3, 0.5, -0.8).normalized().transpose();
		const auto cs = collision_constraints(m, x, body, margin);
		REQUIRE(cs.size() == 1);
		const double c = cs[0].margin - contact_distance(cs[0], x.row(0)).distance;
		CHECK(c > margin);
		// Faceted sphere: the true distance is within the chord sag of the analytic 0.1.
		CHECK_THAT(c - margin, WithinAbs(0.1, 0.01));
		Eigen::VectorXd lambda = Eigen::VectorXd::Zero(1);
		xpbd_project(m, cs, 1.0 / 60.0, 3, x, lambda);
		CHECK_THAT(body.signed_distance(x.row(0)), WithinAbs(margin, 1e-9));
	}
}

TEST_CASE("step follows the damped update")
{
	const BodyQuery none(BodyMesh{});
	SimMesh m = particles(2);
	SimConfig cfg;
	cfg.gravity = Vec3::Zero();
	SimState s = initial_state(m, Points3::Zero(2, 3));
	s.v << 1.0, -2.0, 0.5, 0.0, 3.0, 0.0;
	SECTION("free particles without gravity")
	{
		const SimState n = step(s, m, none, cfg);
		for (int i = 0; i < 2; ++i)
			for (int d = 0; d < 3; ++d)
			{
				CHECK_THAT(n.x(i, d), WithinAbs(cfg.dt * s.v(i, d), 1e-15));
				CHECK_THAT(n.v(i, d), WithinAbs(0.95 * s.v(i, d), 1e-12));
			}
	}
	SECTION("free fall with tau = 1")
	{
		cfg.tau = 1.0;
		cfg.gravity = Vec3(0, -9.81, 0);
		const SimState n = step(s, m, none, cfg);
		for (int i = 0; i < 2; ++i)
		{
			const Vec3 v = s.v.row(i);
			CHECK((Vec3(n.v.row(i)) - (v + cfg.dt * cfg.gravity)).norm() < 1e-12);
			CHECK((Vec3(n.x.row(i)) - cfg.dt * (v + cfg.dt * cfg.gravity)).norm() < 1e-15);
		}
	}
	SECTION("pinned vertices stay fixed")
	{
		cfg.gravity = Vec3(0, -9.81, 0);
		set_pinned(m, {1});
		SimState n = s;
		for (int k = 0; k < 10; ++k)
			n = step(n, m, none, cfg);
		CHECK(n.x.row(1) == s.x.row(1));
		CHECK(n.x(0, 1) < 0.0);
	}
}

TEST_CASE("hanging strip settles")
{
	const int nx = 2, ny = 10;
	const GarmentSpec spec = strip_spec(nx, ny, true);
	SimMesh m = assemble_sim_mesh(spec);
	set_pinned(m, top_row(nx));
	const BodyQuery none(BodyMesh{});
	SimConfig cfg;
	cfg.max_steps = 2000;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, spec.reference_drape3d), m, none, cfg);
	CHECK(traj.status == DrapeStatus::Converged);
	CHECK(traj.num_steps() <= 2000);
	CHECK(max_speed(fin.v) < 1e-3);
	// The strip ends up hanging below its pins.
	CHECK(fin.x(m.num_vertices - 1, 1) < 0.6);
}

TEST_CASE("rest-shape consistency without forces")
{
	const GarmentSpec spec = strip_spec(3, 6, false);
	SimMesh m = assemble_sim_mesh(spec);
	const BodyQuery none(BodyMesh{});
	SimConfig cfg;
	cfg.gravity = Vec3::Zero();
	cfg.max_steps = 100;
	cfg.v_tol = 0.0;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, spec.reference_drape3d), m, none, cfg);
	CHECK(traj.num_steps() == 100);
	CHECK((fin.x - spec.reference_drape3d).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("flat cloth resting on a plane is a fixed point")
{
	GarmentSpec spec = square_spec(0.5);
	const double margin = 0.003;
	spec.reference_drape3d.col(1).setConstant(margin);
	const SimMesh m = assemble_sim_mesh(spec);
	BodyMesh plane = plane_body(2.0, 0.0);
	plane.collision_margin = margin;
	const BodyQuery body(plane);
	SimConfig cfg;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, spec.reference_drape3d), m, body, cfg);
	CHECK(traj.status == DrapeStatus::Converged);
	CHECK(traj.num_steps() <= 3);
	CHECK((fin.x - spec.reference_drape3d).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("zero velocity tolerance runs every step")
{
	GarmentSpec spec = square_spec(0.5);
	const SimMesh m = assemble_sim_mesh(spec);
	const BodyQuery none(BodyMesh{});
	SimConfig cfg;
	cfg.gravity = Vec3::Zero();
	cfg.v_tol = 0.0;
	cfg.max_steps = 37;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, spec.reference_drape3d), m, none, cfg);
	CHECK(traj.num_steps() == 37);
	CHECK(traj.status == DrapeStatus::MaxSteps);
	CHECK(int(traj.states.size()) == 38);
}

TEST_CASE("kinetic energy is non-increasing without forcing")
{
	const GarmentSpec spec = strip_spec(3, 6, false);
	const SimMesh m = assemble_sim_mesh(spec);
	const BodyQuery none(BodyMesh{});
	SimConfig cfg;
	cfg.gravity = Vec3::Zero();
	SimState s = initial_state(m, spec.reference_drape3d);
	std::mt19937 rng(2);
	std::uniform_real_distribution<double> u(-0.2, 0.2);
	for (int i = 0; i < m.num_vertices; ++i)
		s.v.row(i) << u(rng), u(rng), u(rng);
	s = step(s, m, none, cfg);
	double prev = kinetic(m, s.v);
	for (int k = 0; k < 200; ++k)
	{
		s = step(s, m, none, cfg);
		const double e = kinetic(m, s.v);
		CHECK(e <= prev * (1.0 + 1e-12));
		prev = e;
	}
}

TEST_CASE("tube drape separates from the body and is deterministic")
{
	const TubeSkirt t = make_tube_skirt({.nx = 8, .ny = 10, .body_radius = 0.19, .target_radius = 0.19});
	SimMesh m = assemble_sim_mesh(t.spec);
	set_pinned(m, t.pinned);
	const BodyQuery body(t.body);
	SimConfig cfg;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, t.spec.reference_drape3d), m, body, cfg);
	CHECK(traj.status == DrapeStatus::Converged);
	int touching = 0;
	for (int i = 0; i < m.num_vertices; ++i)
	{
		if (m.pinned[i])
			continue;
		const double d = body.signed_distance(fin.x.row(i));
		CHECK(d >= t.body.collision_margin - 1e-4);
		touching += d < 2.0 * t.body.collision_margin;
	}
	CHECK(touching > 0);

	auto [again, traj2] = drape_to_equilibrium(initial_state(m, t.spec.reference_drape3d), m, body, cfg);
	REQUIRE(traj2.num_steps() == traj.num_steps());
	for (size_t n = 0; n < traj.states.size(); ++n)
	{
		CHECK(traj.states[n].x == traj2.states[n].x);
		CHECK(traj.states[n].v == traj2.states[n].v);
	}
}

TEST_CASE("bending hinges preserve a flat rest state")
{
	GarmentSpec spec = strip_spec(3, 6, false);
	spec.material.bend_compliance = 1e-3;
	const SimMesh m = assemble_sim_mesh(spec);
	CHECK(!m.hinges.empty());
	const BodyQuery none(BodyMesh{});
	SimConfig cfg;
	cfg.gravity = Vec3::Zero();
	cfg.max_steps = 50;
	cfg.v_tol = 0.0;
	auto [fin, traj] = drape_to_equilibrium(initial_state(m, spec.reference_drape3d), m, none, cfg);
	CHECK((fin.x - spec.reference_drape3d).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("invalid simulation settings are rejected")
{
	SimConfig cfg;
	cfg.dt = 0.0;
	CHECK_THROWS_AS(cfg.validate(), ValidationError);
	cfg = SimConfig{};
	cfg.tau = 1.5;
	CHECK_THROWS_AS(cfg.validate(), ValidationError);
	cfg = SimConfig{};
	cfg.tau = 0.0;
	CHECK_THROWS_AS(cfg.validate(), ValidationError);
}
