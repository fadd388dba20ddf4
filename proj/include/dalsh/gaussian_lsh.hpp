#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dalsh/families.hpp"

namespace dalsh {

struct SphericalParams {
    /// Shell radius is eta * c.
    double eta = 1.0;
    double c = 2.0;
    std::size_t d = 0;
    /// Zero means d^{-1/4}.
    double epsilon = 0.0;
    std::size_t max_parts = 1'000'000;
    /// Reject inputs whose norm is outside [eta c - 1, eta c + 1] instead of
    /// normalizing them.
    bool strict = false;

    static SphericalParams make(double eta, double c, std::size_t d);
    double radius() const noexcept { return eta * c; }
    double eps() const noexcept;
    /// Threshold on the unit sphere, eps * sqrt(d).
    double unit_threshold() const noexcept;
    void validate() const;
};

/// Sequential cap carving of the sphere of radius eta c: x belongs to the first
/// part i with <x', w_i> >= eta c eps sqrt(d), where x' is x rescaled to the
/// shell and w_i ~ N(0, I_d) is generated from (seed, i) on demand.
class SphericalFunction final : public HashFunction {
public:
    SphericalFunction(const SphericalParams& params, std::uint64_t seed);

    std::size_t input_dim() const noexcept override { return params_.d; }
    HashKey eval(ConstVec x) const override;
    PairOutcome compare(ConstVec u, ConstVec v) const override;

    /// Keys of many points, sharing each generated direction across the batch.
    std::vector<HashKey> eval_batch(std::span<const ConstVec> xs) const;

    /// Index of the covering part (1-based), 0 for OVERFLOW, -1 for the zero vector.
    std::int64_t part(ConstVec x) const;

    const SphericalParams& params() const noexcept { return params_; }

private:
    void direction(std::size_t i, std::span<double> out) const;
    /// x rescaled to the unit sphere, after domain checks; empty for the zero vector.
    std::vector<double> unit(ConstVec x) const;

    SphericalParams params_;
    std::uint64_t seed_;
    double threshold_;
};

class SphericalFamily final : public LshFamily {
public:
    explicit SphericalFamily(SphericalParams params);

    std::size_t input_dim() const noexcept override { return params_.d; }
    std::unique_ptr<HashFunction> sample(std::uint64_t seed) const override;
    std::string describe() const override;
    void check_domain(ConstVec x) const override;
    /// Uncapped collision probability for two points on the shell at the given chord length.
    std::optional<double> collision_curve(double distance) const override;

    const SphericalParams& params() const noexcept { return params_; }

private:
    SphericalParams params_;
};

std::unique_ptr<SphericalFunction> sample_spherical(const SphericalParams& params, std::uint64_t seed);

/// Angle subtended by a chord of length s on a sphere of radius r.
double chord_angle(double s, double r);

/// (s^2/(eta c)^2) / (4 - s^2/(eta c)^2).
double tan_sq_half_angle(double s, double eta, double c);

struct LogInvBracket {
    double lower = 0.0;
    double upper = 0.0;
};

/// Bracket on ln(1/p) for a pair at chord s: (eps^2 d / 2) tan^2(a/2) - slack below,
/// (eps^2 d / 2) tan^2(a0/2) + ln(eps sqrt(d) tan(a0/2)) + slack above, with
/// a0 >= a (defaults to a) and the log term clamped at zero.
LogInvBracket predicted_log_inv_p(double s, const SphericalParams& params, double slack = 3.0,
                                  std::optional<double> alpha0 = std::nullopt);

/// (4 - 1/eta^2) / (4 - 1/(eta c)^2) / c^2.
double predicted_rho(double eta, double c);

/// Pr[X >= s and cos(a) X - sin(a) Y >= s] for independent standard normals.
double orthant_exact(double s, double alpha);
CollisionEstimate orthant_prob(double s, double alpha, std::uint64_t trials, std::uint64_t seed,
                               unsigned threads = 1);
/// constant * exp(-s^2 (1 + tan^2(a/2)) / 2) / s.
double orthant_upper_bound(double s, double alpha, double constant = 1.0);
/// constant * exp(-s^2 (1 + tan^2(a0/2)) / 2) / (s^2 tan(a0/2)), for 0 < a0 < pi/2.
double orthant_lower_bound(double s, double alpha0, double constant = 0.1);

/// Exact collision probability of the uncapped carving for unit threshold s
/// and angle a: both / (2 Pr[X >= s] - both).
double spherical_collision_exact(double s, double alpha);

} // namespace dalsh
