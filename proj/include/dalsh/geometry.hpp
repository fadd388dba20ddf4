#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "dalsh/error.hpp"

namespace dalsh {

using ConstVec = std::span<const double>;

/// Dense real vector with finite coordinates.
class Point {
public:
    Point() = default;
    explicit Point(std::vector<double> coords);
    Point(std::initializer_list<double> coords);
    static Point zeros(std::size_t dim);

    std::size_t dim() const noexcept { return coords_.size(); }
    ConstVec coords() const noexcept { return coords_; }
    std::span<double> mutable_coords() noexcept { return coords_; }
    double operator[](std::size_t i) const noexcept { return coords_[i]; }
    operator ConstVec() const noexcept { return coords_; }

    bool operator==(const Point&) const = default;

private:
    std::vector<double> coords_;
};

/// Contiguous row-major point set; ids are the row indices 0..n-1.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::size_t dim);
    Dataset(std::size_t dim, std::vector<double> rows);
    static Dataset from_points(std::span<const Point> points);

    void add(ConstVec p);
    void reserve(std::size_t n) { data_.reserve(n * dim_); }

    std::size_t size() const noexcept { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::size_t dim() const noexcept { return dim_; }
    bool empty() const noexcept { return data_.empty(); }
    ConstVec point(std::size_t id) const noexcept { return ConstVec(data_).subspan(id * dim_, dim_); }
    ConstVec operator[](std::size_t id) const noexcept { return point(id); }
    const std::vector<double>& raw() const noexcept { return data_; }

    bool operator==(const Dataset&) const = default;

private:
    std::size_t dim_ = 0;
    std::vector<double> data_;
};

struct Ball {
    Point center;
    double radius = 0.0;
};

void require_same_dim(ConstVec u, ConstVec v);

double dot(ConstVec u, ConstVec v);
double norm(ConstVec x);
double distance_sq(ConstVec u, ConstVec v);
/// Euclidean distance; throws on dimension mismatch.
double distance(ConstVec u, ConstVec v);

Point subtract(ConstVec u, ConstVec v);
Point scale(ConstVec x, double factor);

/// x * (radius / |x|). Throws for the zero vector.
Point normalize_to_radius(ConstVec x, double radius);

/// |u/|u| - v/|v||^2 evaluated as (|u-v|^2 - (|u|-|v|)^2) / (|u| |v|).
double normalized_distance_sq(ConstVec u, ConstVec v);

/// Approximate minimum enclosing ball. The returned radius is the exact
/// maximum distance from the returned center, and is certified to be at most
/// (1 + delta) times the optimal radius. delta must lie in (0, 0.5].
Ball smallest_enclosing_ball(std::span<const ConstVec> points, double delta = 0.01);
Ball smallest_enclosing_ball(std::span<const Point> points, double delta = 0.01);
Ball smallest_enclosing_ball(const Dataset& data, std::span<const std::uint32_t> ids, double delta = 0.01);

/// Radius of a ball guaranteed to enclose any set of the given diameter.
double jung_radius_bound(double diameter);

/// Largest pairwise distance, by exhaustive scan.
double diameter(std::span<const ConstVec> points);

/// Dense Gaussian map R^in -> R^out with entries N(0, 1/out).
class JlMap {
public:
    JlMap(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

    std::size_t in_dim() const noexcept { return in_dim_; }
    std::size_t out_dim() const noexcept { return out_dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    double scale() const noexcept { return scale_; }

    Point apply(ConstVec x) const;
    Dataset apply(const Dataset& data) const;

private:
    std::size_t in_dim_;
    std::size_t out_dim_;
    std::uint64_t seed_;
    double scale_;
    std::vector<double> matrix_;  // out_dim x in_dim, already scaled
};

JlMap sample_jl(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed);

/// Output dimension ceil(constant * ln(n) / eps^2).
std::size_t jl_dimension(std::size_t n, double epsilon, double constant);

} // namespace dalsh
