#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dalsh/families.hpp"

namespace dalsh {

/// max(4, ceil((ln n)^{2/3})).
std::size_t default_t(std::size_t n);

struct BallCarvingParams {
    std::size_t t = 4;
    /// Ball radius in projected units; grid cells have side 4w.
    double w = 2.0;
    std::size_t max_grids = 4096;
    double A = 0.5;
    double epsilon = 0.5;

    /// t = default_t(n), w = sqrt(t), epsilon = t^{-1/2}.
    static BallCarvingParams for_n(std::size_t n);
    static BallCarvingParams for_t(std::size_t t);
    void validate() const;
};

struct AnalyticBounds {
    std::size_t t = 4;
    double epsilon = 0.5;
    double A = 0.5;
};

/// L = A / (2 sqrt t) * (1 + eps + 8 eps^2)^{-t/2}.
double L_bound(const AnalyticBounds& b);
/// U(c) = 2 / (1 + c^2 eps)^{t/2}, for c > 1.
double U_bound(double c, const AnalyticBounds& b);
/// Natural logs of the above, finite for any t.
double log_L_bound(const AnalyticBounds& b);
double log_U_bound(double c, const AnalyticBounds& b);

/// Projects to R^t with a raw Gaussian matrix, then carves with balls of
/// radius w centred on the points of a sequence of randomly shifted grids of
/// side 4w. The key is (grid index, lattice coordinates) of the first ball
/// that covers the projected point, or OVERFLOW after max_grids grids.
class BallCarvingFunction final : public HashFunction {
public:
    BallCarvingFunction(const BallCarvingParams& params, std::size_t dim, std::uint64_t seed);

    std::size_t input_dim() const noexcept override { return dim_; }
    HashKey eval(ConstVec x) const override;
    PairOutcome compare(ConstVec u, ConstVec v) const override;

    std::vector<double> project(ConstVec x) const;

private:
    void shift(std::size_t grid, std::span<double> out) const;
    bool covered(std::span<const double> y, std::span<const double> s, std::span<std::int64_t> cell) const;

    BallCarvingParams params_;
    std::size_t dim_;
    std::uint64_t shift_seed_;
    std::vector<double> projection_;  // t x dim
};

class BallCarvingFamily final : public LshFamily {
public:
    BallCarvingFamily(BallCarvingParams params, std::size_t dim);

    std::size_t input_dim() const noexcept override { return dim_; }
    std::unique_ptr<HashFunction> sample(std::uint64_t seed) const override;
    std::string describe() const override;

    const BallCarvingParams& params() const noexcept { return params_; }
    AnalyticBounds bounds() const noexcept { return AnalyticBounds{params_.t, params_.epsilon, params_.A}; }

private:
    BallCarvingParams params_;
    std::size_t dim_;
};

std::unique_ptr<BallCarvingFunction> sample_ball_carving(const BallCarvingParams& params, std::size_t dim,
                                                         std::uint64_t seed);

} // namespace dalsh
