#pragma once

#include <patternfit/adjoint.hpp>
#include <patternfit/cage.hpp>
#include <patternfit/losses.hpp>

#include <functional>

namespace patternfit
{
	/// max |a - b| / max |b|, the norm-relative error used by every check.
	double relative_error(const Eigen::VectorXd &analytic, const Eigen::VectorXd &reference);

	/// Central differences of f at x for the listed coordinates (all when empty).
	Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd &)> &f, const Eigen::VectorXd &x, double h,
									   const std::vector<int> &coords = {});

	std::vector<int> sample_coordinates(int size, int count);

	Eigen::VectorXd pack(const std::vector<Points2> &pts);
	std::vector<Points2> unpack(const Eigen::VectorXd &flat, const std::vector<Points2> &shape);

	/// A fixed-length simulation from x0 followed by the total loss: the
	/// function whose gradients the adjoint computes.
	struct SimLossProblem
	{
		GarmentSpec spec;
		BodyMesh body;
		SimConfig sim; // max_steps is the step count; v_tol is ignored
		LossConfig loss;
		TargetDrape target;
		std::vector<double> target_areas;
		Points3 x0;
		std::vector<Points2> reference;
		bool pattern_terms = true;
	};

	SimLossProblem make_problem(const GarmentSpec &spec, const BodyMesh &body, const TargetDrape &target, const SimConfig &sim, const LossConfig &loss,
								const Points3 &x0);

	struct ProblemValue
	{
		double loss = 0.0;
		std::vector<Points2> d_rest2d;
		Points3 d_x0;
		/// Per step, (vertex, feature, body triangle) of every contact, to detect
		/// contact set changes between runs.
		std::vector<std::vector<int>> contact_sets;
		std::vector<std::vector<Contact>> contacts;
		int active_contacts = 0; // summed over steps
	};

	/// With `frozen`, every step uses the given contacts instead of generating them.
	ProblemValue evaluate_problem(const SimLossProblem &problem, const std::vector<Points2> &patterns, const Points3 *x0 = nullptr,
								  bool with_gradient = false, const std::vector<std::vector<Contact>> *frozen = nullptr);

	struct CheckResult
	{
		std::string name;
		double error = 0.0;
		double tolerance = 0.0;
		bool passed() const { return error < tolerance; }
	};

	/// Reproduction, similarity and Jacobian checks for a cage.
	std::vector<CheckResult> check_cage(const Panel &panel, const Cage &cage);

	/// Finite-difference checks of every loss term at the given patterns and drape.
	std::vector<CheckResult> check_losses(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<Points2> &rest,
										  const Points3 &x, const TargetDrape &target, const std::vector<double> &target_areas, const LossConfig &cfg);

	/// Adjoint dL/d(pattern) against central differences on `samples` coordinates (0 = all).
	/// When a perturbed run changes the contact set the differences are retaken
	/// with the contacts of the unperturbed run, and the name gets a ".frozen" suffix.
	CheckResult check_rest_gradient(const SimLossProblem &problem, const std::vector<Points2> &patterns, int samples, double h = 1e-7);

	/// dL/d(cage) through deform, simulation and loss against central differences.
	CheckResult check_cage_gradient(const SimLossProblem &problem, const std::vector<Cage> &cages, const std::vector<CageCoords> &coords,
									int samples, double h = 1e-7);
} // namespace patternfit
