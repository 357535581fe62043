#include <patternfit/mesh_io.hpp>
#include <patternfit/triangle_constraint.hpp>
#include <patternfit/xpbd.hpp>

#include <fmt/format.h>

#include <cmath>
#include <filesystem>

namespace patternfit
{
	namespace
	{
		[[noreturn]] void fail_nonfinite(int step, const char *kind, int id)
		{
			throw NumericalError(fmt::format("non-finite multiplier at step {} ({} constraint {})", step, kind, id));
		}

		template <int N>
		void record(std::vector<double> *tape, double lambda, const Points3 &x, const std::array<int, N> &v)
		{
			if (!tape)
				return;
			tape->push_back(lambda);
			for (int k = 0; k < N; ++k)
				for (int d = 0; d < 3; ++d)
					tape->push_back(x(v[k], d));
		}
	} // namespace

	void SimConfig::validate() const
	{
		if (!(dt > 0.0))
			throw ValidationError("sim.dt must be positive");
		if (!(tau > 0.0 && tau <= 1.0))
			throw ValidationError("sim.tau must lie in (0, 1]");
		if (iterations < 1)
			throw ValidationError("sim.iterations must be at least 1");
		if (!(v_tol >= 0.0))
			throw ValidationError("sim.v_tol must be non-negative");
		if (max_steps < 0)
			throw ValidationError("sim.max_steps must be non-negative");
		if (collision_margin && !(*collision_margin >= 0.0))
			throw ValidationError("sim.collision_margin must be non-negative");
	}

	double xpbd_delta_lambda(double c, double weighted_grad_norm2, double alpha_tilde, double lambda)
	{
		const double den = weighted_grad_norm2 + alpha_tilde;
		if (den <= 0.0)
			return 0.0;
		return (-c - alpha_tilde * lambda) / den;
	}

	int num_multipliers(const SimMesh &mesh, int num_contacts)
	{
		return 3 * (mesh.num_triangles() + int(mesh.hinges.size()) + int(mesh.stitches.size())) + num_contacts;
	}

	ContactDistance contact_distance(const Contact &ct, const Vec3 &x)
	{
		ContactDistance out;
		out.dnormal.setZero();
		Vec3 r = x - ct.point;
		if (ct.feature == SurfaceFeature::Edge)
			r -= r.dot(ct.edge_direction) * ct.edge_direction;
		const double len = r.norm();
		if (ct.feature == SurfaceFeature::Face || len <= 1e-12)
		{
			out.normal = ct.normal;
			out.distance = ct.normal.dot(x - ct.point);
			return out;
		}
		out.normal = (ct.side / len) * r;
		out.distance = ct.side * len;
		Eigen::Matrix3d proj = Eigen::Matrix3d::Identity() - out.normal * out.normal.transpose();
		if (ct.feature == SurfaceFeature::Edge)
			proj -= ct.edge_direction * ct.edge_direction.transpose();
		out.dnormal = (ct.side / len) * proj;
		return out;
	}

	std::vector<Contact> collision_constraints(const SimMesh &mesh, const Points3 &x, const BodyQuery &body, double margin, const Points3 *start)
	{
		std::vector<Contact> out;
		if (body.empty())
			return out;
		for (int i = 0; i < mesh.num_vertices; ++i)
		{
			if (mesh.pinned[i])
				continue;
			// Detect within twice the margin: a vertex resting exactly on the margin
			// must keep its contact when its velocity carries the prediction outward.
			SurfaceHit hit = body.closest(x.row(i));
			// A vertex resting on the body whose prediction leaves it would
			// otherwise be pulled back through the surface by elasticity.
			if (hit.signed_distance >= 2.0 * margin && start)
				hit = body.closest(start->row(i));
			if (hit.signed_distance < 2.0 * margin)
				out.push_back({i, hit.point, hit.normal, margin, hit.feature, hit.edge_direction, hit.signed_distance < 0.0 ? -1.0 : 1.0, hit.triangle});
		}
		return out;
	}

	void xpbd_project(const SimMesh &mesh, const std::vector<Contact> &contacts, double dt, int iterations, Points3 &x,
					  Eigen::VectorXd &lambda, std::vector<double> *tape, int step_index)
	{
		const Eigen::VectorXd &w = mesh.inv_mass;
		const double inv_dt2 = 1.0 / (dt * dt);
		const double stretch_at = mesh.stretch_compliance * inv_dt2;
		const double shear_at = mesh.shear_compliance * inv_dt2;
		const double bend_at = std::max(mesh.bend_compliance, 0.0) * inv_dt2;
		const double stitch_at = mesh.stitch_compliance * inv_dt2;
		const int nt = mesh.num_triangles();
		const int nh = int(mesh.hinges.size());
		const int ns = int(mesh.stitches.size());

		for (int it = 0; it < iterations; ++it)
		{
			for (int t = 0; t < nt; ++t)
			{
				const auto &v = mesh.triangles[t].v;
				const RestTriangle &rest = mesh.rest[t];
				for (int term = 0; term < 3; ++term)
				{
					const int id = 3 * t + term;
					record<3>(tape, lambda[id], x, v);
					const Vec3 x0 = x.row(v[0]), x1 = x.row(v[1]), x2 = x.row(v[2]);
					const ScalarConstraint c = triangle_term(TriangleTerm(term), x0, x1, x2, rest);
					double wg = 0.0;
					for (int k = 0; k < 3; ++k)
						wg += w[v[k]] * c.grad[k].squaredNorm();
					const double dl = xpbd_delta_lambda(c.value, wg, term == 2 ? shear_at : stretch_at, lambda[id]);
					if (!std::isfinite(dl))
						fail_nonfinite(step_index, "triangle", id);
					lambda[id] += dl;
					for (int k = 0; k < 3; ++k)
						x.row(v[k]) += (w[v[k]] * dl) * c.grad[k].transpose();
				}
			}
			const int hinge_base = 3 * nt;
			for (int h = 0; h < nh; ++h)
			{
				const Hinge &hinge = mesh.hinges[h];
				double wg = 0.0;
				for (int k = 0; k < 4; ++k)
					wg += w[hinge.v[k]] * hinge.k[k] * hinge.k[k];
				for (int d = 0; d < 3; ++d)
				{
					const int id = hinge_base + 3 * h + d;
					record<4>(tape, lambda[id], x, hinge.v);
					double c = 0.0;
					for (int k = 0; k < 4; ++k)
						c += hinge.k[k] * x(hinge.v[k], d);
					const double dl = xpbd_delta_lambda(c, wg, bend_at, lambda[id]);
					if (!std::isfinite(dl))
						fail_nonfinite(step_index, "bend", id);
					lambda[id] += dl;
					for (int k = 0; k < 4; ++k)
						x(hinge.v[k], d) += w[hinge.v[k]] * hinge.k[k] * dl;
				}
			}
			const int stitch_base = hinge_base + 3 * nh;
			for (int s = 0; s < ns; ++s)
			{
				const auto &st = mesh.stitches[s];
				const double wg = w[st[0]] + w[st[1]];
				for (int d = 0; d < 3; ++d)
				{
					const int id = stitch_base + 3 * s + d;
					record<2>(tape, lambda[id], x, st);
					const double c = x(st[0], d) - x(st[1], d);
					const double dl = xpbd_delta_lambda(c, wg, stitch_at, lambda[id]);
					if (!std::isfinite(dl))
						fail_nonfinite(step_index, "stitch", id);
					lambda[id] += dl;
					x(st[0], d) += w[st[0]] * dl;
					x(st[1], d) -= w[st[1]] * dl;
				}
			}
			const int contact_base = stitch_base + 3 * ns;
			for (size_t i = 0; i < contacts.size(); ++i)
			{
				const Contact &ct = contacts[i];
				const int id = contact_base + int(i);
				record<1>(tape, lambda[id], x, std::array<int, 1>{ct.vertex});
				const ContactDistance cd = contact_distance(ct, x.row(ct.vertex));
				const double c = ct.margin - cd.distance;
				if (c <= 0.0)
					continue;
				const double dl = xpbd_delta_lambda(c, w[ct.vertex], 0.0, lambda[id]);
				if (!std::isfinite(dl))
					fail_nonfinite(step_index, "contact", id);
				lambda[id] += dl;
				x.row(ct.vertex) -= (w[ct.vertex] * dl) * cd.normal.transpose();
			}
		}
	}

	Points3 predict(const SimMesh &mesh, const SimConfig &cfg, const Points3 &x, const Points3 &v)
	{
		Points3 pred = x;
		const double dt = cfg.dt;
		for (int i = 0; i < mesh.num_vertices; ++i)
			if (!mesh.pinned[i])
				pred.row(i) += dt * v.row(i) + (dt * dt) * cfg.gravity.transpose();
		return pred;
	}

	SimState advance(const SimMesh &mesh, const SimConfig &cfg, const SimState &state, const std::vector<Contact> &contacts,
					 std::vector<double> *tape)
	{
		SimState next;
		next.x = predict(mesh, cfg, state.x, state.v);
		next.lambda = Eigen::VectorXd::Zero(num_multipliers(mesh, int(contacts.size())));
		xpbd_project(mesh, contacts, cfg.dt, cfg.iterations, next.x, next.lambda, tape, state.step);
		next.v = (cfg.tau / cfg.dt) * (next.x - state.x);
		next.step = state.step + 1;
		if (!next.x.allFinite() || !next.v.allFinite())
			throw NumericalError(fmt::format("non-finite state after step {}", state.step));
		return next;
	}

	SimState step(const SimState &state, const SimMesh &mesh, const BodyQuery &body, const SimConfig &cfg, std::vector<Contact> *used_contacts)
	{
		const Points3 pred = predict(mesh, cfg, state.x, state.v);
		const double margin = cfg.collision_margin.value_or(body.margin());
		std::vector<Contact> contacts = collision_constraints(mesh, pred, body, margin, &state.x);
		SimState next = advance(mesh, cfg, state, contacts);
		if (used_contacts)
			*used_contacts = std::move(contacts);
		return next;
	}

	SimState initial_state(const SimMesh &mesh, const Points3 &x0)
	{
		if (x0.rows() != mesh.num_vertices)
			throw ValidationError(fmt::format("initial positions have {} vertices, simulation mesh has {}", x0.rows(), mesh.num_vertices));
		SimState s;
		s.x = x0;
		s.v = Points3::Zero(mesh.num_vertices, 3);
		s.lambda = Eigen::VectorXd::Zero(num_multipliers(mesh, 0));
		return s;
	}

	double max_speed(const Points3 &v)
	{
		return v.rows() ? v.rowwise().norm().maxCoeff() : 0.0;
	}

	std::pair<SimState, Trajectory> drape_to_equilibrium(const SimState &state0, const SimMesh &mesh, const BodyQuery &body,
														 const SimConfig &cfg)
	{
		Trajectory traj;
		SimState cur = state0;
		cur.step = 0;
		traj.states.push_back({cur.x, cur.v, {}, 0});
		traj.status = DrapeStatus::MaxSteps;
		for (int n = 0; n < cfg.max_steps; ++n)
		{
			std::vector<Contact> contacts;
			cur = step(cur, mesh, body, cfg, &contacts);
			traj.contacts.push_back(std::move(contacts));
			traj.states.push_back({cur.x, cur.v, {}, cur.step});
			if (max_speed(cur.v) < cfg.v_tol)
			{
				traj.status = DrapeStatus::Converged;
				break;
			}
		}
		return {cur, std::move(traj)};
	}

	void export_trajectory(const Trajectory &traj, const SimMesh &mesh, const std::string &directory)
	{
		std::filesystem::create_directories(directory);
		const std::vector<Tri> tris = sim_triangles(mesh);
		for (size_t n = 0; n < traj.states.size(); ++n)
			write_obj(std::filesystem::path(directory) / fmt::format("frame_{:04d}.obj", n), traj.states[n].x, tris);
	}
} // namespace patternfit
