#pragma once

#include <patternfit/sim_mesh.hpp>

namespace patternfit
{
	struct LossConfig
	{
		double alpha = 1.0;  // boundary vertices
		double beta = 1.0;   // seam vertices
		double gamma = 0.01; // interior vertices
		double w_curv = 0.1;
		double w_pm = 1.0;
		double w_ta = 10.0;

		/// Rejects negative weights; warns when gamma > 0.1 * min(alpha, beta).
		void validate() const;
	};

	enum class VertexClass : char
	{
		Interior = 0,
		Boundary = 1,
		Seam = 2
	};

	/// Per simulation vertex; seam membership wins over boundary membership.
	std::vector<VertexClass> classify_vertices(const GarmentSpec &spec);

	struct Loss3
	{
		double value = 0.0;
		Points3 grad;
	};

	struct Loss2
	{
		double value = 0.0;
		std::vector<Points2> grad; // per panel
	};

	Loss3 loss_shape_match(const Points3 &x, const Points3 &target, const std::vector<VertexClass> &classes, const LossConfig &cfg);

	/// Least-squares scaled rotation T with e_k ≈ T rest_k.
	Eigen::Matrix2d fit_similarity(const Vec2 &e1, const Vec2 &e2, const Vec2 &e1_rest, const Vec2 &e2_rest);

	/// Sum over boundary vertices of |(e1 - T e1_rest) + (e2 - T e2_rest)|^2.
	Loss2 loss_boundary_curvature(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<Points2> &rest);

	/// Sum over seam edge pairs of (|a_{i+1} - a_i|^2 - |b_{i+1} - b_i|^2)^2.
	Loss2 loss_pattern_match(const GarmentSpec &spec, const std::vector<Points2> &current);

	/// Sum over panels of (target area - pattern area)^2.
	Loss2 loss_total_area(const GarmentSpec &spec, const std::vector<Points2> &current, const std::vector<double> &target_areas);

	/// Target areas in panel order, from the explicit map where present and
	/// from the target positions otherwise.
	std::vector<double> target_panel_areas(const GarmentSpec &spec, const SimMesh &mesh, const TargetDrape &target);

	struct LossBreakdown
	{
		double shape_match = 0.0;
		double curvature = 0.0;
		double pattern_match = 0.0;
		double total_area = 0.0;
		double total = 0.0;
		Points3 grad3;
		std::vector<Points2> grad2;
	};

	LossBreakdown total_loss(const Points3 &x, const std::vector<Points2> &current, const std::vector<Points2> &rest, const TargetDrape &target,
							 const std::vector<double> &target_areas, const GarmentSpec &spec, const std::vector<VertexClass> &classes,
							 const LossConfig &cfg);
} // namespace patternfit
