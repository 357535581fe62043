#include <patternfit/gradcheck.hpp>

#include <cmath>
#include <tuple>

namespace patternfit
{
	double relative_error(const Eigen::VectorXd &analytic, const Eigen::VectorXd &reference)
	{
		if (analytic.size() != reference.size())
			throw ValidationError("relative_error: size mismatch");
		if (analytic.size() == 0)
			return 0.0;
		const double diff = (analytic - reference).cwiseAbs().maxCoeff();
		const double scale = reference.cwiseAbs().maxCoeff();
		return scale > 0.0 ? diff / scale : diff;
	}

	Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x, double h,
									   const std::vector<int> &coords)
	{
		std::vector<int> ids = coords;
		if (ids.empty())
			for (Eigen::Index i = 0; i < x.size(); ++i)
				ids.push_back(int(i));
		Eigen::VectorXd out(ids.size());
		Eigen::VectorXd probe = x;
		for (size_t k = 0; k < ids.size(); ++k)
		{
			const int i = ids[k];
			probe[i] = x[i] + h;
			const double fp = f(probe);
			probe[i] = x[i] - h;
			const double fm = f(probe);
			probe[i] = x[i];
			out[Eigen::Index(k)] = (fp - fm) / (2.0 * h);
		}
		return out;
	}

	std::vector<int> sample_coordinates(int size, int count)
	{
		std::vector<int> ids;
		if (count <= 0 || count >= size)
		{
			for (int i = 0; i < size; ++i)
				ids.push_back(i);
			return ids;
		}
		for (int k = 0; k < count; ++k)
			ids.push_back(int((long long)(2 * k + 1) * size / (2 * count)));
		return ids;
	}

	Eigen::VectorXd pack(const std::vector<Points2> &pts)
	{
		Eigen::Index n = 0;
		for (const Points2 &p : pts)
			n += p.size();
		Eigen::VectorXd out(n);
		Eigen::Index k = 0;
		for (const Points2 &p : pts)
		{
			out.segment(k, p.size()) = flat(p);
			k += p.size();
		}
		return out;
	}

	std::vector<Points2> unpack(const Eigen::VectorXd &v, const std::vector<Points2> &shape)
	{
		std::vector<Points2> out;
		Eigen::Index k = 0;
		for (const Points2 &p : shape)
		{
			Points2 q(p.rows(), 2);
			flat(q) = v.segment(k, p.size());
			k += p.size();
			out.push_back(std::move(q));
		}
		return out;
	}

	SimLossProblem make_problem(const GarmentSpec &spec, const BodyMesh &body, const TargetDrape &target, const SimConfig &sim, const LossConfig &loss,
								const Points3 &x0)
	{
		SimLossProblem pr;
		pr.spec = spec;
		pr.body = body;
		pr.sim = sim;
		pr.sim.v_tol = 0.0;
		pr.loss = loss;
		pr.target = target;
		pr.x0 = x0;
		for (const Panel &p : spec.panels)
			pr.reference.push_back(p.vertices);
		SimMesh mesh = assemble_sim_mesh(spec);
		pr.target_areas = target_panel_areas(spec, mesh, target);
		return pr;
	}

	ProblemValue evaluate_problem(const SimLossProblem &pr, const std::vector<Points2> &patterns, const Points3 *x0, bool with_gradient,
								  const std::vector<std::vector<Contact>> *frozen)
	{
		SimMesh mesh = assemble_sim_mesh(pr.spec);
		set_pinned(mesh, pr.sim.pinned);
		set_rest_shape(mesh, patterns);
		const BodyQuery body(pr.body);
		SimConfig sim = pr.sim;
		sim.v_tol = 0.0;
		const SimState s0 = initial_state(mesh, x0 ? *x0 : pr.x0);
		SimState final_state;
		Trajectory traj;
		if (frozen)
		{
			traj.states.push_back(s0);
			for (const std::vector<Contact> &cs : *frozen)
			{
				traj.states.push_back(advance(mesh, sim, traj.states.back(), cs));
				traj.states.back().lambda.resize(0);
				traj.contacts.push_back(cs);
			}
			final_state = traj.states.back();
		}
		else
			std::tie(final_state, traj) = drape_to_equilibrium(s0, mesh, body, sim);

		const std::vector<VertexClass> classes = classify_vertices(pr.spec);
		ProblemValue out;
		LossBreakdown loss = total_loss(final_state.x, patterns, pr.reference, pr.target, pr.target_areas, pr.spec, classes, pr.loss);
		out.loss = pr.pattern_terms ? loss.total : loss.shape_match;
		for (const auto &cs : traj.contacts)
		{
			std::vector<int> ids;
			for (const Contact &c : cs)
				ids.insert(ids.end(), {c.vertex, int(c.feature), c.triangle});
			out.contact_sets.push_back(std::move(ids));
		}
		for (const auto &cs : traj.contacts)
			out.active_contacts += int(cs.size());
		out.contacts = traj.contacts;
		if (!with_gradient)
			return out;

		const AdjointResult adj = adjoint_sweep(traj, mesh, sim, loss.grad3);
		out.d_rest2d = rest_shape_pullback(mesh, adj.rest);
		if (pr.pattern_terms)
			for (size_t p = 0; p < patterns.size(); ++p)
				out.d_rest2d[p] += loss.grad2[p];
		out.d_x0 = adj.initial.x_hat;
		return out;
	}

	std::vector<CheckResult> check_cage(const Panel &panel, const Cage &cage)
	{
		std::vector<CheckResult> out;
		const CageCoords coords = compute_green_coords(cage, panel.vertices);

		const Points2 rest = deform(coords, cage, cage.vertices);
		out.push_back({"cage." + panel.id + ".reproduction", (rest - panel.vertices).cwiseAbs().maxCoeff(), 1e-8});

		Eigen::Matrix2d rot;
		const double th = 0.3, s = 1.3;
		rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
		const Vec2 t(0.1, -0.2);
		auto similarity = [&](const Points2 &p) {
			Points2 q = (p * (s * rot).transpose()).rowwise() + t.transpose();
			return q;
		};
		const Points2 moved = deform(coords, cage, similarity(cage.vertices));
		out.push_back({"cage." + panel.id + ".similarity", (moved - similarity(panel.vertices)).cwiseAbs().maxCoeff(), 1e-8});

		// Jacobian at a perturbed configuration against central differences.
		Points2 cage_points = cage.vertices;
		for (Eigen::Index i = 0; i < cage_points.rows(); ++i)
			cage_points.row(i) += 0.02 * Vec2(std::sin(1.7 * i), std::cos(2.3 * i)).transpose() * std::sqrt(std::abs(polygon_signed_area(cage.vertices)));
		const Eigen::MatrixXd jac = cage_jacobian(coords, cage, cage_points);
		Eigen::MatrixXd fd(jac.rows(), jac.cols());
		const double h = 1e-6;
		for (Eigen::Index c = 0; c < jac.cols(); ++c)
		{
			Points2 zp = cage_points, zm = cage_points;
			zp.data()[c] += h;
			zm.data()[c] -= h;
			const Points2 dp = deform(coords, cage, zp), dm = deform(coords, cage, zm);
			fd.col(c) = (flat(dp) - flat(dm)) / (2.0 * h);
		}
		out.push_back({"cage." + panel.id + ".jacobian", relative_error(jac.reshaped(), fd.reshaped()), 1e-5});
		return out;
	}

	std::vector<CheckResult> check_losses(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<Points2> &rest,
										  const Points3 &x, const TargetDrape &target, const std::vector<double> &target_areas, const LossConfig &cfg)
	{
		std::vector<CheckResult> out;
		const double h = 1e-6;
		const std::vector<VertexClass> classes = classify_vertices(spec);

		{
			const Loss3 sm = loss_shape_match(x, target.positions, classes, cfg);
			auto f = [&](const Eigen::VectorXd &v) {
				Points3 y(x.rows(), 3);
				flat(y) = v;
				return loss_shape_match(y, target.positions, classes, cfg).value;
			};
			out.push_back({"loss.shape_match", relative_error(flat(sm.grad), central_difference(f, flat(x), h)), 1e-5});
		}
		auto check2 = [&](const std::string &name, const std::function<Loss2(const std::vector<Points2> &)> &term) {
			const Loss2 l = term(current);
			auto f = [&](const Eigen::VectorXd &v) { return term(unpack(v, current)).value; };
			out.push_back({name, relative_error(pack(l.grad), central_difference(f, pack(current), h)), 1e-5});
		};
		check2("loss.curvature", [&](const std::vector<Points2> &p) { return loss_boundary_curvature(spec, p, rest); });
		check2("loss.pattern_match", [&](const std::vector<Points2> &p) { return loss_pattern_match(spec, p); });
		check2("loss.total_area", [&](const std::vector<Points2> &p) { return loss_total_area(spec, p, target_areas); });
		return out;
	}

	namespace
	{
		/// Central differences of the problem loss over `ids`; falls back to the
		/// base contacts when any perturbed run changes the contact set.
		Eigen::VectorXd problem_difference(const SimLossProblem &problem, const ProblemValue &base,
										   const std::function<std::vector<Points2>(const Eigen::VectorXd &)> &patterns_of, const Eigen::VectorXd &x,
										   double h, const std::vector<int> &ids, bool &frozen)
		{
			frozen = false;
			auto f = [&](const Eigen::VectorXd &y) {
				const ProblemValue v = evaluate_problem(problem, patterns_of(y));
				if (v.contact_sets != base.contact_sets)
					frozen = true;
				return v.loss;
			};
			// Richardson extrapolation: contact curvature makes plain central
			// differences too coarse at step sizes above the roundoff floor.
			auto richardson = [&](const std::function<double(const Eigen::VectorXd &)> &fn) -> Eigen::VectorXd {
				return (4.0 * central_difference(fn, x, 0.5 * h, ids) - central_difference(fn, x, h, ids)) / 3.0;
			};
			Eigen::VectorXd fd = richardson(f);
			if (!frozen)
				return fd;
			auto g = [&](const Eigen::VectorXd &y) { return evaluate_problem(problem, patterns_of(y), nullptr, false, &base.contacts).loss; };
			return richardson(g);
		}

		Eigen::VectorXd select(const Eigen::VectorXd &v, const std::vector<int> &ids)
		{
			Eigen::VectorXd out(ids.size());
			for (size_t k = 0; k < ids.size(); ++k)
				out[Eigen::Index(k)] = v[ids[k]];
			return out;
		}
	} // namespace

	CheckResult check_rest_gradient(const SimLossProblem &problem, const std::vector<Points2> &patterns, int samples, double h)
	{
		const ProblemValue v = evaluate_problem(problem, patterns, nullptr, true);
		const Eigen::VectorXd analytic = pack(v.d_rest2d);
		const std::vector<int> ids = sample_coordinates(int(analytic.size()), samples);
		bool frozen = false;
		const Eigen::VectorXd fd = problem_difference(
			problem, v, [&](const Eigen::VectorXd &x) { return unpack(x, patterns); }, pack(patterns), h, ids, frozen);
		return {frozen ? "adjoint.rest.frozen" : "adjoint.rest", relative_error(select(analytic, ids), fd), 1e-4};
	}

	CheckResult check_cage_gradient(const SimLossProblem &problem, const std::vector<Cage> &cages, const std::vector<CageCoords> &coords, int samples,
									double h)
	{
		std::vector<Points2> cage_points;
		std::vector<Eigen::MatrixXd> jac;
		for (size_t p = 0; p < cages.size(); ++p)
		{
			cage_points.push_back(cages[p].vertices);
			jac.push_back(cage_jacobian(coords[p], cages[p], cages[p].vertices));
		}
		auto patterns_of = [&](const Eigen::VectorXd &flat_cage_points) {
			const std::vector<Points2> z = unpack(flat_cage_points, cage_points);
			std::vector<Points2> pats;
			for (size_t p = 0; p < cages.size(); ++p)
				pats.push_back(deform(coords[p], cages[p], z[p]));
			return pats;
		};
		const ProblemValue v = evaluate_problem(problem, patterns_of(pack(cage_points)), nullptr, true);
		const Eigen::VectorXd analytic = pack(chain_to_cage(v.d_rest2d, jac));
		const std::vector<int> ids = sample_coordinates(int(analytic.size()), samples);
		bool frozen = false;
		const Eigen::VectorXd fd = problem_difference(problem, v, patterns_of, pack(cage_points), h, ids, frozen);
		return {frozen ? "adjoint.cage.frozen" : "adjoint.cage", relative_error(select(analytic, ids), fd), 1e-3};
	}
} // namespace patternfit
