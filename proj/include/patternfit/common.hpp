#pragma once

#include <Eigen/Dense>

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace patternfit
{
	using Vec2 = Eigen::Vector2d;
	using Vec3 = Eigen::Vector3d;

	// Point sets are stored one point per row so that row(i) is contiguous.
	using Points2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;
	using Points3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

	using Tri = std::array<int, 3>;

	/// Base class of every error raised by the library. The CLI maps the
	/// subclasses onto its exit codes.
	class Error : public std::runtime_error
	{
	public:
		using std::runtime_error::runtime_error;
	};

	/// Malformed or inconsistent input (exit code 1).
	class ValidationError : public Error
	{
	public:
		using Error::Error;
	};

	/// Non-finite values, divergence, invalid cages during optimization (exit code 2).
	class NumericalError : public Error
	{
	public:
		using Error::Error;
	};

	/// Missing, unreadable or unwritable files (exit code 3).
	class IoError : public Error
	{
	public:
		using Error::Error;
	};

	inline double cross2(const Vec2 &a, const Vec2 &b) { return a.x() * b.y() - a.y() * b.x(); }

	inline Eigen::Map<Eigen::VectorXd> flat(Points2 &p) { return {p.data(), p.size()}; }
	inline Eigen::Map<const Eigen::VectorXd> flat(const Points2 &p) { return {p.data(), p.size()}; }
	inline Eigen::Map<Eigen::VectorXd> flat(Points3 &p) { return {p.data(), p.size()}; }
	inline Eigen::Map<const Eigen::VectorXd> flat(const Points3 &p) { return {p.data(), p.size()}; }
} // namespace patternfit
