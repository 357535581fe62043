#pragma once

#include <patternfit/adjoint.hpp>
#include <patternfit/cage.hpp>
#include <patternfit/losses.hpp>

#include <functional>

namespace patternfit
{
	enum class OptimizerKind
	{
		GradientDescent,
		Adam
	};

	struct RefitConfig
	{
		int max_iterations = 200;
		double learning_rate = 2e-3;
		OptimizerKind optimizer = OptimizerKind::Adam;
		double adam_beta1 = 0.9;
		double adam_beta2 = 0.999;
		double adam_epsilon = 1e-8;
		/// Cap on the global gradient norm (0 disables clipping).
		double gradient_clip = 0.0;
		double rel_tol = 1e-4;
		int patience = 10;
		bool symmetry = true;
		bool global_scale = true;

		/// Cage construction: margin as a fraction of panel diameter.
		double cage_margin_fraction = 0.05;
		int cage_max_vertices = 16;
		int cage_min_vertices = 0;

		/// Relative magnitude of deterministic noise added to cage gradients
		/// before symmetrization (diagnostics and ablations only).
		double gradient_perturbation = 0.0;
		unsigned perturbation_seed = 1;

		SimConfig sim;
		LossConfig loss;

		void validate() const;
	};

	/// Mirror link between two cages: vertex i of cage `a` mirrors vertex
	/// vertex_map[i] of cage `b`, with b = reflection * a + translation.
	struct CagePair
	{
		int a = 0;
		int b = 0;
		std::vector<int> vertex_map;
		Eigen::Matrix2d reflection = Eigen::Matrix2d::Identity();
		Vec2 translation = Vec2::Zero();
	};

	/// Optimizer state over all cage vertices.
	struct CageState
	{
		std::vector<Points2> cage_points;
		std::vector<Points2> m; // first moments
		std::vector<Points2> v; // second moments
		int steps = 0;
	};

	CageState make_cage_state(const std::vector<Points2> &cage_points);

	/// sqrt(mean over triangles of target area / rest area).
	double initial_global_scale(const GarmentSpec &spec, const SimMesh &mesh, const Points3 &target);

	/// Scales points about their mean by s.
	Points2 scale_about_centroid(const Points2 &points, const Vec2 &centroid, double s);

	/// Replaces each paired gradient by the average of itself and its mirror image.
	std::vector<Points2> symmetrize_gradient(const std::vector<Points2> &d_cage, const std::vector<CagePair> &pairs);

	/// Clips, then applies plain descent or Adam. Returns the applied step.
	std::vector<Points2> update_step(CageState &state, const std::vector<Points2> &d_cage, const RefitConfig &cfg);

	/// Cages for every panel: user overrides where given, mirrored partners for
	/// symmetry pairs, built from the boundary otherwise.
	std::vector<Cage> build_cages(const GarmentSpec &spec, const RefitConfig &cfg, std::vector<CagePair> &pairs);

	struct IterationRecord
	{
		int iteration = 0;
		double total = 0.0;
		double shape_match = 0.0;
		double curvature = 0.0;
		double pattern_match = 0.0;
		double total_area = 0.0;
		double grad_norm = 0.0;
		double step_norm = 0.0;
		int drape_steps = 0;
		bool drape_converged = false;
		double seconds = 0.0;
	};

	enum class RefitStatus
	{
		Converged,
		MaxIterations
	};

	struct RefitResult
	{
		GarmentSpec spec; // refitted patterns
		Points3 drape;
		std::vector<IterationRecord> history;
		QualityReport quality_before;
		QualityReport quality_after;
		RefitStatus status = RefitStatus::MaxIterations;
		int best_iteration = 0;
		double best_loss = 0.0;
		LossBreakdown best_breakdown;
		std::vector<Cage> cages; // rest cages
		std::vector<Points2> best_cage_points;
		std::vector<double> target_areas;
		std::vector<SymmetryPair> symmetry_pairs;
		double scale = 1.0;
	};

	using IterationCallback = std::function<void(const IterationRecord &)>;

	RefitResult refit(const GarmentSpec &spec, const BodyMesh &body, const TargetDrape &target, const RefitConfig &cfg,
					  const IterationCallback &on_iteration = {});

	/// Largest distance between the mirror image of a paired panel and its partner.
	double max_mirror_error(const GarmentSpec &spec, const std::vector<SymmetryPair> &pairs);

	/// Relative difference of seam side lengths, max over seams.
	double max_seam_length_mismatch(const GarmentSpec &spec);

	/// Per panel |pattern area - target| / target.
	std::vector<double> panel_area_errors(const GarmentSpec &spec, const std::vector<double> &target_areas);
} // namespace patternfit
