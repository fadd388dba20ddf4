#include "dalsh/gaussian_lsh.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "dalsh/random.hpp"

namespace dalsh {

namespace {

constexpr double kShellSlack = 1e-9;

double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

// Pr[X >= s and cos(a) X + sin(a) Y >= s] for 0 < a < pi. Integrates
// phi(x)/phi(s) * Pr[Y >= (s - cos(a) x)/sin(a)] over x = s + u, u >= 0; the
// integrand is below e^{-s u}.
double joint_tail(double s, double alpha) {
    const double ca = std::cos(alpha);
    const double sa = std::sin(alpha);
    auto f = [&](double u) {
        const double x = s + u;
        return std::exp(-u * (s + u / 2.0)) * upper_tail((s - ca * x) / sa);
    };
    const double width = std::min(60.0 / s, 40.0);
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, width, 15, 1e-13);
    return std::exp(-0.5 * s * s) / std::sqrt(2.0 * std::numbers::pi) * integral;
}

// Dimension check, plus the shell check in strict mode. Returns the norm.
double checked_norm(const SphericalParams& params, ConstVec x) {
    if (x.size() != params.d) {
        throw Error("spherical family expects dimension " + std::to_string(params.d) + ", got " +
                    std::to_string(x.size()));
    }
    const double len = norm(x);
    if (params.strict) {
        const double r = params.radius();
        if (len == 0.0) {
            throw Error("strict spherical family got the zero vector");
        }
        if (len < r - 1.0 - kShellSlack || len > r + 1.0 + kShellSlack) {
            throw Error("point norm " + std::to_string(len) + " is outside the shell");
        }
    }
    return len;
}

} // namespace

SphericalParams SphericalParams::make(double eta, double c, std::size_t d) {
    SphericalParams p;
    p.eta = eta;
    p.c = c;
    p.d = d;
    p.validate();
    return p;
}

double SphericalParams::eps() const noexcept {
    return epsilon > 0.0 ? epsilon : std::pow(static_cast<double>(d), -0.25);
}

double SphericalParams::unit_threshold() const noexcept { return eps() * std::sqrt(static_cast<double>(d)); }

void SphericalParams::validate() const {
    if (!(eta >= 0.5)) {
        throw Error("spherical family needs eta >= 1/2");
    }
    if (!(c > 1.0)) {
        throw Error("spherical family needs c > 1");
    }
    if (d < 2) {
        throw Error("spherical family needs d >= 2");
    }
    const double e = eps();
    if (!(e > 1.0 / std::sqrt(static_cast<double>(d)) && e < 1.0)) {
        throw Error("spherical epsilon must lie in (d^{-1/2}, 1)");
    }
    if (max_parts < 1) {
        throw Error("spherical family needs max_parts >= 1");
    }
}

SphericalFunction::SphericalFunction(const SphericalParams& params, std::uint64_t seed)
    : params_(params), seed_(derive_seed(seed, {0x5F4Eull})), threshold_(params.unit_threshold()) {
    params_.validate();
}

void SphericalFunction::direction(std::size_t i, std::span<double> out) const {
    CounterRng rng(seed_, i);
    for (double& v : out) {
        v = rng.normal();
    }
}

std::vector<double> SphericalFunction::unit(ConstVec x) const {
    const double len = checked_norm(params_, x);
    if (len == 0.0) {
        return {};
    }
    std::vector<double> u(x.begin(), x.end());
    for (double& v : u) {
        v /= len;
    }
    return u;
}

std::int64_t SphericalFunction::part(ConstVec x) const {
    const std::vector<double> u = unit(x);
    if (u.empty()) {
        return -1;
    }
    const std::size_t d = params_.d;
    for (std::size_t i = 1; i <= params_.max_parts; ++i) {
        CounterRng rng(seed_, i);
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            s += rng.normal() * u[j];
        }
        if (s >= threshold_) {
            return static_cast<std::int64_t>(i);
        }
    }
    return 0;
}

HashKey SphericalFunction::eval(ConstVec x) const {
    const std::int64_t i = part(x);
    if (i == 0) {
        return HashKey::overflow();
    }
    // The zero vector gets the reserved key 0.
    return HashKey{std::max<std::int64_t>(i, 0)};
}

PairOutcome SphericalFunction::compare(ConstVec u, ConstVec v) const {
    const std::vector<double> a = unit(u);
    const std::vector<double> b = unit(v);
    if (a.empty() || b.empty()) {
        return HashFunction::compare(u, v);
    }
    const std::size_t d = params_.d;
    for (std::size_t i = 1; i <= params_.max_parts; ++i) {
        CounterRng rng(seed_, i);
        double sa = 0.0;
        double sb = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double g = rng.normal();
            sa += g * a[j];
            sb += g * b[j];
        }
        const bool ha = sa >= threshold_;
        const bool hb = sb >= threshold_;
        if (ha || hb) {
            return PairOutcome{ha && hb, false};
        }
    }
    return PairOutcome{true, true};
}

std::vector<HashKey> SphericalFunction::eval_batch(std::span<const ConstVec> xs) const {
    std::vector<HashKey> keys(xs.size());
    std::vector<std::vector<double>> units;
    units.reserve(xs.size());
    std::vector<std::size_t> pending;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        units.push_back(unit(xs[k]));
        if (units.back().empty()) {
            keys[k] = HashKey{0};
        } else {
            pending.push_back(k);
        }
    }
    std::vector<double> w(params_.d);
    for (std::size_t i = 1; i <= params_.max_parts && !pending.empty(); ++i) {
        direction(i, w);
        std::size_t kept = 0;
        for (std::size_t k : pending) {
            if (dot(w, units[k]) >= threshold_) {
                keys[k] = HashKey{static_cast<std::int64_t>(i)};
            } else {
                pending[kept++] = k;
            }
        }
        pending.resize(kept);
    }
    for (std::size_t k : pending) {
        keys[k] = HashKey::overflow();
    }
    return keys;
}

SphericalFamily::SphericalFamily(SphericalParams params) : params_(params) { params_.validate(); }

std::unique_ptr<HashFunction> SphericalFamily::sample(std::uint64_t seed) const {
    return std::make_unique<SphericalFunction>(params_, seed);
}

std::string SphericalFamily::describe() const {
    std::ostringstream os;
    os << "spherical(eta=" << params_.eta << ",c=" << params_.c << ",d=" << params_.d << ",eps=" << params_.eps()
       << ",M=" << params_.max_parts << ")";
    return os.str();
}

void SphericalFamily::check_domain(ConstVec x) const {
    checked_norm(params_, x);
}

std::optional<double> SphericalFamily::collision_curve(double distance) const {
    if (distance == 0.0) {
        return 1.0;
    }
    return spherical_collision_exact(params_.unit_threshold(), chord_angle(distance, params_.radius()));
}

std::unique_ptr<SphericalFunction> sample_spherical(const SphericalParams& params, std::uint64_t seed) {
    return std::make_unique<SphericalFunction>(params, seed);
}

double chord_angle(double s, double r) {
    if (!(r > 0.0)) {
        throw Error("sphere radius must be positive");
    }
    if (!(s >= 0.0 && s <= 2.0 * r)) {
        throw Error("chord length must lie in [0, 2r]");
    }
    return 2.0 * std::asin(std::min(1.0, s / (2.0 * r)));
}

double tan_sq_half_angle(double s, double eta, double c) {
    const double r = eta * c;
    if (!(r > 0.0)) {
        throw Error("shell radius must be positive");
    }
    if (!(s >= 0.0)) {
        throw Error("chord length must be nonnegative");
    }
    if (!(s < 2.0 * r)) {
        throw Error("chord length must be below the diameter 2 eta c");
    }
    const double x = s * s / (r * r);
    return x / (4.0 - x);
}

LogInvBracket predicted_log_inv_p(double s, const SphericalParams& params, double slack,
                                  std::optional<double> alpha0) {
    params.validate();
    const double scale = params.eps() * params.eps() * static_cast<double>(params.d) / 2.0;
    const double alpha = chord_angle(s, params.radius());
    const double a0 = alpha0.value_or(alpha);
    if (a0 < alpha) {
        throw Error("alpha0 must be at least the pair angle");
    }
    if (!(a0 < std::numbers::pi / 2.0)) {
        throw Error("upper bracket needs an angle below pi/2");
    }
    const double t0 = std::tan(a0 / 2.0);
    const double log_term = std::max(0.0, std::log(params.unit_threshold() * t0));
    return LogInvBracket{scale * tan_sq_half_angle(s, params.eta, params.c) - slack,
                         scale * t0 * t0 + log_term + slack};
}

double predicted_rho(double eta, double c) {
    if (!(eta >= 0.5)) {
        throw Error("predicted_rho needs eta >= 1/2");
    }
    if (!(c > 1.0)) {
        throw Error("predicted_rho needs c > 1");
    }
    const double ec = eta * c;
    return (4.0 - 1.0 / (eta * eta)) / (4.0 - 1.0 / (ec * ec)) / (c * c);
}

double orthant_exact(double s, double alpha) {
    if (!(s > 0.0)) {
        throw Error("orthant threshold must be positive");
    }
    if (!(alpha >= 0.0 && alpha < std::numbers::pi / 2.0)) {
        throw Error("orthant angle must lie in [0, pi/2)");
    }
    if (alpha == 0.0) {
        return upper_tail(s);
    }
    return joint_tail(s, alpha);
}

CollisionEstimate orthant_prob(double s, double alpha, std::uint64_t trials, std::uint64_t seed, unsigned threads) {
    if (!(s > 0.0)) {
        throw Error("orthant threshold must be positive");
    }
    if (!(alpha >= 0.0 && alpha < std::numbers::pi / 2.0)) {
        throw Error("orthant angle must lie in [0, pi/2)");
    }
    if (trials == 0) {
        throw Error("orthant_prob needs trials >= 1");
    }
    const double ca = std::cos(alpha);
    const double sa = std::sin(alpha);
    std::atomic<std::uint64_t> total{0};
    parallel_chunks(trials, std::max(1u, threads), [&](std::uint64_t begin, std::uint64_t end) {
        std::uint64_t hits = 0;
        for (std::uint64_t i = begin; i < end; ++i) {
            CounterRng rng(seed, i);
            const double x = rng.normal();
            const double y = rng.normal();
            hits += (x >= s && ca * x - sa * y >= s) ? 1 : 0;
        }
        total += hits;
    });
    return make_estimate(total, trials);
}

double orthant_upper_bound(double s, double alpha, double constant) {
    if (!(s > 0.0) || !(alpha >= 0.0 && alpha < std::numbers::pi / 2.0)) {
        throw Error("orthant bound needs s > 0 and alpha in [0, pi/2)");
    }
    const double t = std::tan(alpha / 2.0);
    return constant * std::exp(-s * s * (1.0 + t * t) / 2.0) / s;
}

double orthant_lower_bound(double s, double alpha0, double constant) {
    if (!(s > 0.0) || !(alpha0 > 0.0 && alpha0 < std::numbers::pi / 2.0)) {
        throw Error("orthant bound needs s > 0 and alpha0 in (0, pi/2)");
    }
    const double t = std::tan(alpha0 / 2.0);
    return constant * std::exp(-s * s * (1.0 + t * t) / 2.0) / (s * s * t);
}

double spherical_collision_exact(double s, double alpha) {
    if (!(s > 0.0)) {
        throw Error("threshold must be positive");
    }
    if (!(alpha >= 0.0 && alpha <= std::numbers::pi)) {
        throw Error("angle must lie in [0, pi]");
    }
    if (alpha == 0.0) {
        return 1.0;
    }
    if (alpha == std::numbers::pi) {
        return 0.0;
    }
    const double both = joint_tail(s, alpha);
    const double tail = upper_tail(s);
    return both / (2.0 * tail - both);
}

} // namespace dalsh
