#pragma once

#include <patternfit/triangle_constraint.hpp>
#include <patternfit/xpbd.hpp>

namespace patternfit
{
	/// Adjoints of the positions and velocities that enter step `step`.
	struct AdjointState
	{
		Points3 x_hat;
		Points3 v_hat;
		int step = 0;
	};

	/// Adjoints of the rest-dependent simulation data accumulated over a sweep.
	struct RestAdjoint
	{
		std::vector<RestTriangleAdjoint> triangles;
		Eigen::VectorXd inv_mass; // per simulation vertex
	};

	struct AdjointResult
	{
		/// states[k] belongs to trajectory state k (only filled on request);
		/// `initial` always holds the adjoint of state 0.
		std::vector<AdjointState> states;
		AdjointState initial;
		RestAdjoint rest;
	};

	struct ParamGradient
	{
		std::vector<Points2> d_rest2d; // per panel
		std::vector<Points2> d_cage;   // per panel
	};

	/// Reverse sweep over the trajectory. Each step is replayed from its stored
	/// input state to recover the constraint solves, which are then transposed
	/// in exact reverse order. Loss gradients are given at the final state.
	AdjointResult adjoint_sweep(const Trajectory &traj, const SimMesh &mesh, const SimConfig &cfg, const Points3 &dl_dx_final,
								const Points3 *dl_dv_final = nullptr, bool keep_states = false);

	/// Per-panel gradient with respect to the 2D pattern vertices from the
	/// triangle rest data and lumped masses.
	std::vector<Points2> rest_shape_pullback(const SimMesh &mesh, const RestAdjoint &rest);

	/// d_cage = (d pattern / d cage_points)^T d_rest2d for every panel.
	std::vector<Points2> chain_to_cage(const std::vector<Points2> &d_rest2d, const std::vector<Eigen::MatrixXd> &cage_jacobians);
} // namespace patternfit
