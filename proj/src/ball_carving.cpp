#include "dalsh/ball_carving.hpp"

#include <cmath>
#include <sstream>

#include "dalsh/random.hpp"

namespace dalsh {

std::size_t default_t(std::size_t n) {
    if (n < 2) {
        throw Error("default_t needs n >= 2");
    }
    const double t = std::ceil(std::pow(std::log(static_cast<double>(n)), 2.0 / 3.0));
    return std::max<std::size_t>(4, static_cast<std::size_t>(t));
}

BallCarvingParams BallCarvingParams::for_t(std::size_t t) {
    BallCarvingParams p;
    p.t = t;
    p.w = std::sqrt(static_cast<double>(t));
    p.epsilon = 1.0 / std::sqrt(static_cast<double>(t));
    p.validate();
    return p;
}

BallCarvingParams BallCarvingParams::for_n(std::size_t n) { return for_t(default_t(n)); }

void BallCarvingParams::validate() const {
    if (t < 1) {
        throw Error("ball carving needs t >= 1");
    }
    if (!(w > 0.0) || !std::isfinite(w)) {
        throw Error("ball carving radius w must be positive");
    }
    if (max_grids < 1) {
        throw Error("ball carving needs max_grids >= 1");
    }
    if (!(A > 0.0 && A < 1.0)) {
        throw Error("constant A must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw Error("ball carving epsilon must be positive");
    }
}

double log_L_bound(const AnalyticBounds& b) {
    if (b.t < 1 || !(b.epsilon > 0.0) || !(b.A > 0.0 && b.A < 1.0)) {
        throw Error("invalid analytic bound parameters");
    }
    const double t = static_cast<double>(b.t);
    const double e = b.epsilon;
    return std::log(b.A / (2.0 * std::sqrt(t))) - t / 2.0 * std::log1p(e + 8.0 * e * e);
}

double L_bound(const AnalyticBounds& b) { return std::exp(log_L_bound(b)); }

double log_U_bound(double c, const AnalyticBounds& b) {
    if (!(c > 1.0)) {
        throw Error("U(c) needs c > 1");
    }
    if (b.t < 1 || !(b.epsilon > 0.0)) {
        throw Error("invalid analytic bound parameters");
    }
    return std::log(2.0) - static_cast<double>(b.t) / 2.0 * std::log1p(c * c * b.epsilon);
}

double U_bound(double c, const AnalyticBounds& b) { return std::exp(log_U_bound(c, b)); }

BallCarvingFunction::BallCarvingFunction(const BallCarvingParams& params, std::size_t dim, std::uint64_t seed)
    : params_(params), dim_(dim), shift_seed_(derive_seed(seed, {0x5817ull})) {
    params_.validate();
    if (dim < params_.t) {
        throw Error("ball carving needs d >= t (d = " + std::to_string(dim) + ", t = " + std::to_string(params_.t) +
                    ")");
    }
    projection_.resize(params_.t * dim);
    for (std::size_t r = 0; r < params_.t; ++r) {
        CounterRng rng(derive_seed(seed, {0x9807ull}), r);
        for (std::size_t c = 0; c < dim; ++c) {
            projection_[r * dim + c] = rng.normal();
        }
    }
}

std::vector<double> BallCarvingFunction::project(ConstVec x) const {
    if (x.size() != dim_) {
        throw Error("ball carving expects dimension " + std::to_string(dim_) + ", got " + std::to_string(x.size()));
    }
    std::vector<double> y(params_.t, 0.0);
    for (std::size_t r = 0; r < params_.t; ++r) {
        const double* row = &projection_[r * dim_];
        double s = 0.0;
        for (std::size_t c = 0; c < dim_; ++c) {
            s += row[c] * x[c];
        }
        y[r] = s;
    }
    return y;
}

void BallCarvingFunction::shift(std::size_t grid, std::span<double> out) const {
    CounterRng rng(shift_seed_, grid);
    const double side = 4.0 * params_.w;
    for (double& s : out) {
        s = rng.uniform() * side;
    }
}

// Nearest lattice point of grid (side 4w, offset s) to y, and whether y lies
// within w of it.
bool BallCarvingFunction::covered(std::span<const double> y, std::span<const double> s,
                                  std::span<std::int64_t> cell) const {
    const double side = 4.0 * params_.w;
    const double w2 = params_.w * params_.w;
    double d2 = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) {
        const double m = std::round((y[j] - s[j]) / side);
        cell[j] = static_cast<std::int64_t>(m);
        const double diff = y[j] - (s[j] + m * side);
        d2 += diff * diff;
        if (d2 > w2) {
            return false;
        }
    }
    return true;
}

HashKey BallCarvingFunction::eval(ConstVec x) const {
    const std::vector<double> y = project(x);
    std::vector<double> s(params_.t);
    std::vector<std::int64_t> cell(params_.t);
    for (std::size_t i = 1; i <= params_.max_grids; ++i) {
        shift(i, s);
        if (covered(y, s, cell)) {
            std::vector<std::int64_t> parts;
            parts.reserve(params_.t + 1);
            parts.push_back(static_cast<std::int64_t>(i));
            parts.insert(parts.end(), cell.begin(), cell.end());
            return HashKey(std::move(parts));
        }
    }
    return HashKey::overflow();
}

PairOutcome BallCarvingFunction::compare(ConstVec u, ConstVec v) const {
    const std::vector<double> yu = project(u);
    const std::vector<double> yv = project(v);
    std::vector<double> s(params_.t);
    std::vector<std::int64_t> cu(params_.t);
    std::vector<std::int64_t> cv(params_.t);
    for (std::size_t i = 1; i <= params_.max_grids; ++i) {
        shift(i, s);
        const bool hu = covered(yu, s, cu);
        const bool hv = covered(yv, s, cv);
        if (hu || hv) {
            return PairOutcome{hu && hv && cu == cv, false};
        }
    }
    return PairOutcome{true, true};
}

BallCarvingFamily::BallCarvingFamily(BallCarvingParams params, std::size_t dim) : params_(params), dim_(dim) {
    params_.validate();
    if (dim < params_.t) {
        throw Error("ball carving needs d >= t");
    }
}

std::unique_ptr<HashFunction> BallCarvingFamily::sample(std::uint64_t seed) const {
    return std::make_unique<BallCarvingFunction>(params_, dim_, seed);
}

std::string BallCarvingFamily::describe() const {
    std::ostringstream os;
    os << "ball_carving(t=" << params_.t << ",w=" << params_.w << ",M=" << params_.max_grids << ",d=" << dim_ << ")";
    return os.str();
}

std::unique_ptr<BallCarvingFunction> sample_ball_carving(const BallCarvingParams& params, std::size_t dim,
                                                         std::uint64_t seed) {
    return std::make_unique<BallCarvingFunction>(params, dim, seed);
}

} // namespace dalsh
