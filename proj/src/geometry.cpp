#include "dalsh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dalsh/random.hpp"

namespace dalsh {

namespace {

void check_finite(std::span<const double> xs) {
    for (double x : xs) {
        if (!std::isfinite(x)) {
            throw Error("point has a non-finite coordinate");
        }
    }
}

} // namespace

Point::Point(std::vector<double> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) {
        throw Error("point must have positive dimension");
    }
    check_finite(coords_);
}

Point::Point(std::initializer_list<double> coords) : Point(std::vector<double>(coords)) {}

Point Point::zeros(std::size_t dim) { return Point(std::vector<double>(dim, 0.0)); }

Dataset::Dataset(std::size_t dim) : dim_(dim) {
    if (dim == 0) {
        throw Error("dataset dimension must be positive");
    }
}

Dataset::Dataset(std::size_t dim, std::vector<double> rows) : dim_(dim), data_(std::move(rows)) {
    if (dim == 0) {
        throw Error("dataset dimension must be positive");
    }
    if (data_.size() % dim != 0) {
        throw Error("row buffer length is not a multiple of the dimension");
    }
    check_finite(data_);
}

Dataset Dataset::from_points(std::span<const Point> points) {
    if (points.empty()) {
        throw Error("cannot infer dimension from an empty point list");
    }
    Dataset out(points.front().dim());
    out.reserve(points.size());
    for (const auto& p : points) {
        out.add(p);
    }
    return out;
}

void Dataset::add(ConstVec p) {
    if (p.size() != dim_) {
        throw Error("point dimension " + std::to_string(p.size()) + " does not match dataset dimension " +
                    std::to_string(dim_));
    }
    check_finite(p);
    data_.insert(data_.end(), p.begin(), p.end());
}

void require_same_dim(ConstVec u, ConstVec v) {
    if (u.size() != v.size()) {
        throw Error("dimension mismatch: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
    }
}

double dot(ConstVec u, ConstVec v) {
    require_same_dim(u, v);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        s += u[i] * v[i];
    }
    return s;
}

double norm(ConstVec x) {
    double s = 0.0;
    for (double v : x) {
        s += v * v;
    }
    return std::sqrt(s);
}

double distance_sq(ConstVec u, ConstVec v) {
    require_same_dim(u, v);
    double s = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double diff = u[i] - v[i];
        s += diff * diff;
    }
    return s;
}

double distance(ConstVec u, ConstVec v) { return std::sqrt(distance_sq(u, v)); }

Point subtract(ConstVec u, ConstVec v) {
    require_same_dim(u, v);
    std::vector<double> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        out[i] = u[i] - v[i];
    }
    return Point(std::move(out));
}

Point scale(ConstVec x, double factor) {
    std::vector<double> out(x.begin(), x.end());
    for (double& v : out) {
        v *= factor;
    }
    return Point(std::move(out));
}

Point normalize_to_radius(ConstVec x, double radius) {
    if (!(radius > 0.0)) {
        throw Error("normalization radius must be positive");
    }
    const double len = norm(x);
    if (len == 0.0) {
        throw Error("cannot normalize the zero vector");
    }
    return scale(x, radius / len);
}

double normalized_distance_sq(ConstVec u, ConstVec v) {
    require_same_dim(u, v);
    // Extended precision: the numerator cancels badly for near-parallel pairs of unequal norm.
    long double uu = 0.0L;
    long double vv = 0.0L;
    long double dd = 0.0L;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const long double a = u[i];
        const long double b = v[i];
        uu += a * a;
        vv += b * b;
        dd += (a - b) * (a - b);
    }
    if (uu == 0.0L || vv == 0.0L) {
        throw Error("normalized distance is undefined for the zero vector");
    }
    const long double nu = std::sqrt(uu);
    const long double nv = std::sqrt(vv);
    const long double gap = nu - nv;
    const long double value = (dd - gap * gap) / (nu * nv);
    return std::max(0.0, static_cast<double>(value));
}

Ball smallest_enclosing_ball(std::span<const ConstVec> points, double delta) {
    if (points.empty()) {
        throw Error("smallest enclosing ball of an empty set");
    }
    if (!(delta > 0.0 && delta <= 0.5)) {
        throw Error("meb delta must lie in (0, 0.5]");
    }
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        require_same_dim(points.front(), p);
    }
    const std::size_t n = points.size();
    if (n == 1) {
        return Ball{Point(std::vector<double>(points[0].begin(), points[0].end())), 0.0};
    }

    // Frank-Wolfe on the dual simplex (Yildirim's first-order scheme). The
    // weighted variance phi(u) lower-bounds r_opt^2 and the farthest distance
    // upper-bounds it, so the stopping test certifies the approximation.
    std::vector<double> weight(n, 0.0);
    std::vector<double> center(dim);
    std::size_t alpha = 0;
    std::size_t beta = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d2 = distance_sq(points[0], points[i]);
        if (d2 > far) {
            far = d2;
            alpha = i;
        }
    }
    far = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d2 = distance_sq(points[alpha], points[i]);
        if (d2 > far) {
            far = d2;
            beta = i;
        }
    }
    weight[alpha] += 0.5;
    weight[beta] += 0.5;
    for (std::size_t j = 0; j < dim; ++j) {
        center[j] = 0.5 * (points[alpha][j] + points[beta][j]);
    }

    std::vector<double> dist2(n);
    const double target = (1.0 + delta) * (1.0 + delta);
    const std::size_t max_iter = 64 + static_cast<std::size_t>(std::ceil(64.0 / delta));
    for (std::size_t iter = 0;; ++iter) {
        std::size_t far_id = 0;
        double r2 = -1.0;
        double phi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            dist2[i] = distance_sq(center, points[i]);
            phi += weight[i] * dist2[i];
            if (dist2[i] > r2) {
                r2 = dist2[i];
                far_id = i;
            }
        }
        if (r2 == 0.0 || r2 <= target * phi || iter >= max_iter) {
            return Ball{Point(center), std::sqrt(r2)};
        }
        const double gap = r2 / phi - 1.0;
        const double step = gap / (2.0 * (1.0 + gap));
        for (double& w : weight) {
            w *= (1.0 - step);
        }
        weight[far_id] += step;
        for (std::size_t j = 0; j < dim; ++j) {
            center[j] = (1.0 - step) * center[j] + step * points[far_id][j];
        }
    }
}

Ball smallest_enclosing_ball(std::span<const Point> points, double delta) {
    std::vector<ConstVec> views(points.begin(), points.end());
    return smallest_enclosing_ball(std::span<const ConstVec>(views), delta);
}

Ball smallest_enclosing_ball(const Dataset& data, std::span<const std::uint32_t> ids, double delta) {
    std::vector<ConstVec> views;
    views.reserve(ids.size());
    for (auto id : ids) {
        views.push_back(data.point(id));
    }
    return smallest_enclosing_ball(std::span<const ConstVec>(views), delta);
}

double jung_radius_bound(double diameter) {
    if (diameter < 0.0) {
        throw Error("diameter must be nonnegative");
    }
    return diameter / std::sqrt(2.0);
}

double diameter(std::span<const ConstVec> points) {
    double best = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        for (std::size_t j = i + 1; j < points.size(); ++j) {
            best = std::max(best, distance_sq(points[i], points[j]));
        }
    }
    return std::sqrt(best);
}

JlMap::JlMap(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed)
    : in_dim_(in_dim), out_dim_(out_dim), seed_(seed), scale_(0.0) {
    if (in_dim == 0 || out_dim == 0) {
        throw Error("jl map dimensions must be positive");
    }
    scale_ = 1.0 / std::sqrt(static_cast<double>(out_dim));
    matrix_.resize(in_dim * out_dim);
    for (std::size_t row = 0; row < out_dim; ++row) {
        CounterRng rng(seed, row);
        for (std::size_t col = 0; col < in_dim; ++col) {
            matrix_[row * in_dim + col] = rng.normal() * scale_;
        }
    }
}

Point JlMap::apply(ConstVec x) const {
    if (x.size() != in_dim_) {
        throw Error("jl map expects dimension " + std::to_string(in_dim_) + ", got " + std::to_string(x.size()));
    }
    std::vector<double> out(out_dim_, 0.0);
    for (std::size_t row = 0; row < out_dim_; ++row) {
        const double* m = &matrix_[row * in_dim_];
        double s = 0.0;
        for (std::size_t col = 0; col < in_dim_; ++col) {
            s += m[col] * x[col];
        }
        out[row] = s;
    }
    return Point(std::move(out));
}

Dataset JlMap::apply(const Dataset& data) const {
    Dataset out(out_dim_);
    out.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        out.add(apply(data.point(i)));
    }
    return out;
}

JlMap sample_jl(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed) { return JlMap(in_dim, out_dim, seed); }

std::size_t jl_dimension(std::size_t n, double epsilon, double constant) {
    if (n < 2 || !(epsilon > 0.0) || !(constant > 0.0)) {
        throw Error("jl dimension needs n >= 2 and positive epsilon, constant");
    }
    return static_cast<std::size_t>(std::ceil(constant * std::log(static_cast<double>(n)) / (epsilon * epsilon)));
}

} // namespace dalsh
