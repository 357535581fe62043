#pragma once

#include <patternfit/body_query.hpp>
#include <patternfit/sim_mesh.hpp>

#include <optional>

namespace patternfit
{
	struct SimConfig
	{
		double dt = 1.0 / 60.0;
		double tau = 0.95;
		int iterations = 20;
		double v_tol = 1e-3;
		int max_steps = 2000;
		Vec3 gravity = Vec3(0.0, -9.81, 0.0);
		/// Overrides the body's collision margin when set.
		std::optional<double> collision_margin;
		std::vector<int> pinned; // simulation vertex indices

		void validate() const;
	};

	struct SimState
	{
		Points3 x;
		Points3 v;
		Eigen::VectorXd lambda;
		int step = 0;
	};

	/// One-sided vertex-body contact against the closest body feature found at
	/// the predicted position: C = margin - d(x), active while positive, where
	/// d is the signed distance to that (fixed) vertex, edge line or face plane.
	struct Contact
	{
		int vertex = 0;
		Vec3 point;
		Vec3 normal; // outward direction at generation
		double margin = 0.0;
		SurfaceFeature feature = SurfaceFeature::Face;
		Vec3 edge_direction = Vec3::Zero();
		double side = 1.0; // +1 outside, -1 inside at generation
		int triangle = -1; // body triangle the feature was found on
	};

	struct ContactDistance
	{
		double distance = 0.0;
		Vec3 normal;           // gradient of distance
		Eigen::Matrix3d dnormal; // Jacobian of normal (symmetric)
	};

	ContactDistance contact_distance(const Contact &contact, const Vec3 &x);

	enum class DrapeStatus
	{
		Converged,
		MaxSteps
	};

	/// States x_0 .. x_N (multipliers are not kept) and the contacts used by
	/// each step.
	struct Trajectory
	{
		std::vector<SimState> states;
		std::vector<std::vector<Contact>> contacts; // contacts[n] drives states[n] -> states[n+1]
		DrapeStatus status = DrapeStatus::MaxSteps;

		int num_steps() const { return int(contacts.size()); }
	};

	/// Multiplier increment of a single XPBD scalar solve:
	/// (sum_k w_k |grad_k|^2 + alpha_tilde) dlambda = -C - alpha_tilde lambda.
	/// Returns 0 when the denominator vanishes.
	double xpbd_delta_lambda(double c, double weighted_grad_norm2, double alpha_tilde, double lambda);

	/// Number of multipliers: 3 per triangle, hinge and stitch, plus contacts.
	int num_multipliers(const SimMesh &mesh, int num_contacts);

	/// Contacts for every unpinned vertex within twice the margin of the body.
	/// With `start`, a vertex whose predicted position is clear still gets a
	/// contact, against the feature closest to its start position, when that
	/// start position is within twice the margin.
	std::vector<Contact> collision_constraints(const SimMesh &mesh, const Points3 &x, const BodyQuery &body, double margin,
											   const Points3 *start = nullptr);

	/// Gauss-Seidel sweeps over triangles, hinges, stitches and contacts.
	/// Updates x and lambda in place. When `tape` is given, the pre-projection
	/// multiplier and vertex positions of every scalar solve are appended.
	void xpbd_project(const SimMesh &mesh, const std::vector<Contact> &contacts, double dt, int iterations, Points3 &x,
					  Eigen::VectorXd &lambda, std::vector<double> *tape = nullptr, int step_index = 0);

	/// Predicted positions x + dt v + dt^2 g; pinned vertices stay put.
	Points3 predict(const SimMesh &mesh, const SimConfig &cfg, const Points3 &x, const Points3 &v);

	/// Constraint projection and damped velocity update with a given contact set.
	SimState advance(const SimMesh &mesh, const SimConfig &cfg, const SimState &state, const std::vector<Contact> &contacts,
					 std::vector<double> *tape = nullptr);

	/// One damped XPBD step. Contacts are generated from the predicted positions.
	SimState step(const SimState &state, const SimMesh &mesh, const BodyQuery &body, const SimConfig &cfg,
				  std::vector<Contact> *used_contacts = nullptr);

	SimState initial_state(const SimMesh &mesh, const Points3 &x0);

	double max_speed(const Points3 &v);

	/// Steps until max |v| < v_tol (checked after each step) or max_steps.
	std::pair<SimState, Trajectory> drape_to_equilibrium(const SimState &state0, const SimMesh &mesh, const BodyQuery &body,
														 const SimConfig &cfg);

	/// Writes one OBJ per stored state (frame_0000.obj, ...).
	void export_trajectory(const Trajectory &traj, const SimMesh &mesh, const std::string &directory);
} // namespace patternfit
