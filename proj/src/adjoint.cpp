#include <patternfit/adjoint.hpp>

#include <fmt/format.h>

#include <cmath>

namespace patternfit
{
	namespace
	{
		// Reads tape records from the back.
		struct TapeReader
		{
			const std::vector<double> &data;
			size_t end;

			const double *pop(size_t n)
			{
				end -= n;
				return data.data() + end;
			}
		};

		struct ReverseSweep
		{
			const SimMesh &mesh;
			Points3 &xb;
			Eigen::VectorXd &lb;
			RestAdjoint &rest;

			// Linear constraint C = sum_k coeff_k x_k[d] (+ const) with constant gradient.
			template <int N>
			void linear(const std::array<int, N> &v, const std::array<double, N> &coeff, int d, double c, double at, int id)
			{
				const Eigen::VectorXd &w = mesh.inv_mass;
				double wg = 0.0;
				for (int k = 0; k < N; ++k)
					wg += w[v[k]] * coeff[k] * coeff[k];
				const double den = wg + at;
				if (den <= 0.0)
					return;
				const double dl = (-c - at * lb[id]) / den;
				double dlb = lb[id];
				for (int k = 0; k < N; ++k)
					dlb += w[v[k]] * coeff[k] * xb(v[k], d);
				const double denb = -dlb * dl / den;
				for (int k = 0; k < N; ++k)
					rest.inv_mass[v[k]] += dl * coeff[k] * xb(v[k], d) + coeff[k] * coeff[k] * denb;
				const double nb = dlb / den;
				lb[id] -= at * nb;
				for (int k = 0; k < N; ++k)
					xb(v[k], d) -= coeff[k] * nb;
			}
		};
	} // namespace

	AdjointResult adjoint_sweep(const Trajectory &traj, const SimMesh &mesh, const SimConfig &cfg, const Points3 &dl_dx_final,
								const Points3 *dl_dv_final, bool keep_states)
	{
		const int n_steps = traj.num_steps();
		const int nv = mesh.num_vertices;
		if (dl_dx_final.rows() != nv || (dl_dv_final && dl_dv_final->rows() != nv))
			throw ValidationError("adjoint_sweep: loss gradient size does not match the simulation mesh");
		if (int(traj.states.size()) != n_steps + 1)
			throw ValidationError("adjoint_sweep: trajectory is incomplete");

		AdjointResult res;
		res.rest.triangles.assign(mesh.triangles.size(), {});
		res.rest.inv_mass = Eigen::VectorXd::Zero(nv);

		Points3 x_hat = dl_dx_final;
		Points3 v_hat = dl_dv_final ? *dl_dv_final : Points3(Points3::Zero(nv, 3));
		if (keep_states)
			res.states.resize(n_steps + 1);
		if (keep_states)
			res.states[n_steps] = {x_hat, v_hat, n_steps};

		const double k = cfg.tau / cfg.dt;
		const Eigen::VectorXd &w = mesh.inv_mass;
		const double inv_dt2 = 1.0 / (cfg.dt * cfg.dt);
		const double stretch_at = mesh.stretch_compliance * inv_dt2;
		const double shear_at = mesh.shear_compliance * inv_dt2;
		const double bend_at = std::max(mesh.bend_compliance, 0.0) * inv_dt2;
		const double stitch_at = mesh.stitch_compliance * inv_dt2;
		const int nt = mesh.num_triangles();
		const int nh = int(mesh.hinges.size());
		const int ns = int(mesh.stitches.size());

		std::vector<double> tape;
		for (int n = n_steps - 1; n >= 0; --n)
		{
			const std::vector<Contact> &contacts = traj.contacts[n];
			tape.clear();
			const SimState replay = advance(mesh, cfg, traj.states[n], contacts, &tape);
			if (replay.x != traj.states[n + 1].x)
				throw NumericalError(fmt::format("adjoint replay of step {} does not reproduce the stored state", n));

			Points3 xb = x_hat + k * v_hat;
			Eigen::VectorXd lb = Eigen::VectorXd::Zero(num_multipliers(mesh, int(contacts.size())));
			ReverseSweep rs{mesh, xb, lb, res.rest};
			TapeReader rd{tape, tape.size()};

			const int hinge_base = 3 * nt;
			const int stitch_base = hinge_base + 3 * nh;
			const int contact_base = stitch_base + 3 * ns;
			for (int it = cfg.iterations - 1; it >= 0; --it)
			{
				for (int i = int(contacts.size()) - 1; i >= 0; --i)
				{
					const Contact &ct = contacts[i];
					const int id = contact_base + i;
					const double *r = rd.pop(4);
					const ContactDistance cd = contact_distance(ct, Vec3(r[1], r[2], r[3]));
					const double c = ct.margin - cd.distance;
					if (c <= 0.0)
						continue;
					const int vi = ct.vertex;
					const double den = w[vi];
					if (den <= 0.0)
						continue;
					// Constraint gradient is -normal; its own Jacobian is -dnormal.
					const double dl = -c / den;
					const Vec3 xbv = xb.row(vi);
					const double gx = -cd.normal.dot(xbv);
					const double dlb = lb[id] + w[vi] * gx;
					const double denb = -dlb * dl / den;
					res.rest.inv_mass[vi] += dl * gx + denb;
					const double nb = dlb / den;
					const Vec3 gb = w[vi] * (dl * xbv - 2.0 * denb * cd.normal);
					xb.row(vi) += (nb * cd.normal - cd.dnormal * gb).transpose();
				}
				for (int s = ns - 1; s >= 0; --s)
					for (int d = 2; d >= 0; --d)
					{
						const double *r = rd.pop(7);
						const double c = r[1 + d] - r[4 + d];
						rs.linear<2>(mesh.stitches[s], {1.0, -1.0}, d, c, stitch_at, stitch_base + 3 * s + d);
					}
				for (int h = nh - 1; h >= 0; --h)
				{
					const Hinge &hinge = mesh.hinges[h];
					for (int d = 2; d >= 0; --d)
					{
						const double *r = rd.pop(13);
						double c = 0.0;
						for (int q = 0; q < 4; ++q)
							c += hinge.k[q] * r[1 + 3 * q + d];
						rs.linear<4>(hinge.v, hinge.k, d, c, bend_at, hinge_base + 3 * h + d);
					}
				}
				for (int t = nt - 1; t >= 0; --t)
				{
					const auto &v = mesh.triangles[t].v;
					const RestTriangle &rest = mesh.rest[t];
					for (int term = 2; term >= 0; --term)
					{
						const int id = 3 * t + term;
						const double *r = rd.pop(10);
						const double lambda_pre = r[0];
						const Vec3 x0(r[1], r[2], r[3]), x1(r[4], r[5], r[6]), x2(r[7], r[8], r[9]);
						const ScalarConstraint c = triangle_term(TriangleTerm(term), x0, x1, x2, rest);
						const double at = term == 2 ? shear_at : stretch_at;
						double wg = 0.0;
						for (int q = 0; q < 3; ++q)
							wg += w[v[q]] * c.grad[q].squaredNorm();
						const double den = wg + at;
						if (den <= 0.0)
							continue;
						const double dl = (-c.value - at * lambda_pre) / den;
						double dlb = lb[id];
						Vec3 xbq[3];
						for (int q = 0; q < 3; ++q)
						{
							xbq[q] = xb.row(v[q]);
							dlb += w[v[q]] * c.grad[q].dot(xbq[q]);
						}
						const double denb = -dlb * dl / den;
						std::array<Vec3, 3> gb;
						for (int q = 0; q < 3; ++q)
						{
							gb[q] = w[v[q]] * (dl * xbq[q] + 2.0 * denb * c.grad[q]);
							res.rest.inv_mass[v[q]] += dl * c.grad[q].dot(xbq[q]) + c.grad[q].squaredNorm() * denb;
						}
						const double nb = dlb / den;
						lb[id] -= at * nb;
						std::array<Vec3, 3> xadd = {Vec3::Zero(), Vec3::Zero(), Vec3::Zero()};
						triangle_term_adjoint(TriangleTerm(term), x0, x1, x2, rest, -nb, gb, xadd, res.rest.triangles[t]);
						for (int q = 0; q < 3; ++q)
							xb.row(v[q]) += xadd[q].transpose();
					}
				}
			}
			if (rd.end != 0)
				throw NumericalError(fmt::format("adjoint tape of step {} was not consumed", n));
			if (!xb.allFinite())
				throw NumericalError(fmt::format("non-finite adjoint at step {}", n));

			// xb now holds the adjoint of the predicted positions.
			Points3 x_prev = xb - k * v_hat;
			Points3 v_prev = cfg.dt * xb;
			for (int i = 0; i < nv; ++i)
				if (mesh.pinned[i])
					v_prev.row(i).setZero();
			x_hat = std::move(x_prev);
			v_hat = std::move(v_prev);
			if (keep_states)
				res.states[n] = {x_hat, v_hat, n};
		}
		res.initial = {x_hat, v_hat, 0};
		return res;
	}

	std::vector<Points2> rest_shape_pullback(const SimMesh &mesh, const RestAdjoint &rest)
	{
		std::vector<Points2> out;
		for (size_t p = 0; p + 1 < mesh.panel_offsets.size(); ++p)
			out.push_back(Points2::Zero(mesh.panel_offsets[p + 1] - mesh.panel_offsets[p], 2));

		// inv_mass = 1 / mass, mass = density * sum of incident areas / 3
		Eigen::VectorXd mass_bar = Eigen::VectorXd::Zero(mesh.num_vertices);
		for (int i = 0; i < mesh.num_vertices; ++i)
			if (!mesh.pinned[i])
				mass_bar[i] = -mesh.inv_mass[i] * mesh.inv_mass[i] * rest.inv_mass[i];

		for (int t = 0; t < mesh.num_triangles(); ++t)
		{
			const SimTriangle &st = mesh.triangles[t];
			const Points2 &pat = mesh.patterns[st.panel];
			const double area_bar = mesh.area_density / 3.0 * (mass_bar[st.v[0]] + mass_bar[st.v[1]] + mass_bar[st.v[2]]);
			const auto g = rest_triangle_pullback(pat.row(st.local[0]), pat.row(st.local[1]), pat.row(st.local[2]), rest.triangles[t], area_bar);
			for (int k = 0; k < 3; ++k)
				out[st.panel].row(st.local[k]) += g[k].transpose();
		}
		return out;
	}

	std::vector<Points2> chain_to_cage(const std::vector<Points2> &d_rest2d, const std::vector<Eigen::MatrixXd> &cage_jacobians)
	{
		if (d_rest2d.size() != cage_jacobians.size())
			throw ValidationError("chain_to_cage: panel count mismatch");
		std::vector<Points2> out;
		for (size_t p = 0; p < d_rest2d.size(); ++p)
		{
			const Eigen::MatrixXd &jac = cage_jacobians[p];
			if (jac.rows() != d_rest2d[p].size())
				throw ValidationError(fmt::format("chain_to_cage: panel {} has {} pattern coordinates, Jacobian has {} rows", p, d_rest2d[p].size(),
												  jac.rows()));
			Points2 g(jac.cols() / 2, 2);
			flat(g) = jac.transpose() * flat(d_rest2d[p]);
			out.push_back(std::move(g));
		}
		return out;
	}
} // namespace patternfit
