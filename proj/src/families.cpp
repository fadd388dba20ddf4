#include "dalsh/families.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "dalsh/random.hpp"

namespace dalsh {

HashKey HashKey::overflow() {
    HashKey k;
    k.overflow_ = true;
    return k;
}

HashKey HashKey::concat(std::span<const HashKey> components) {
    std::vector<std::int64_t> parts;
    for (const auto& c : components) {
        // -1 marks an OVERFLOW component; otherwise the component length.
        parts.push_back(c.is_overflow() ? -1 : static_cast<std::int64_t>(c.parts_.size()));
        parts.insert(parts.end(), c.parts_.begin(), c.parts_.end());
    }
    return HashKey(std::move(parts));
}

KeyDigest HashKey::digest() const noexcept {
    std::uint64_t hi = mix64(0x6A09E667F3BCC909ull ^ (overflow_ ? 1u : 0u) ^ (parts_.size() << 1));
    std::uint64_t lo = mix64(0xBB67AE8584CAA73Bull + parts_.size() + (overflow_ ? 0x51u : 0u));
    for (std::int64_t p : parts_) {
        const auto w = static_cast<std::uint64_t>(p);
        hi = mix64(hi ^ (w + 0x9E3779B97F4A7C15ull));
        lo = mix64(lo + w * 0xD6E8FEB86659FD93ull + 0x3C6EF372FE94F82Bull);
    }
    return KeyDigest{hi, lo};
}

std::string HashKey::to_string() const {
    if (overflow_) {
        return "OVERFLOW";
    }
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < parts_.size(); ++i) {
        os << (i ? "," : "") << parts_[i];
    }
    os << ')';
    return os.str();
}

PairOutcome HashFunction::compare(ConstVec u, ConstVec v) const {
    const HashKey a = eval(u);
    const HashKey b = eval(v);
    return PairOutcome{a == b, a.is_overflow() && b.is_overflow()};
}

void LshFamily::check_domain(ConstVec x) const {
    if (x.size() != input_dim()) {
        throw Error("family expects dimension " + std::to_string(input_dim()) + ", got " + std::to_string(x.size()));
    }
}

TensoredFunction::TensoredFunction(std::vector<std::unique_ptr<HashFunction>> components)
    : components_(std::move(components)) {
    if (components_.empty()) {
        throw Error("tensored function needs at least one component");
    }
}

HashKey TensoredFunction::eval(ConstVec x) const {
    std::vector<HashKey> keys;
    keys.reserve(components_.size());
    for (const auto& c : components_) {
        keys.push_back(c->eval(x));
    }
    return HashKey::concat(keys);
}

PairOutcome TensoredFunction::compare(ConstVec u, ConstVec v) const {
    bool all_overflow = true;
    for (const auto& c : components_) {
        const PairOutcome o = c->compare(u, v);
        if (!o.collide) {
            return PairOutcome{false, false};
        }
        all_overflow = all_overflow && o.overflow;
    }
    return PairOutcome{true, all_overflow};
}

TensoredFamily::TensoredFamily(std::shared_ptr<const LshFamily> base, std::size_t k)
    : base_(std::move(base)), k_(k) {
    if (!base_) {
        throw Error("tensor of a null family");
    }
    if (k == 0) {
        throw Error("tensoring power k must be at least 1");
    }
}

std::uint64_t TensoredFamily::component_seed(std::uint64_t seed, std::size_t j) {
    return derive_seed(seed, {0x7E45ull, j});
}

std::unique_ptr<TensoredFunction> TensoredFamily::sample_tensored(std::uint64_t seed) const {
    std::vector<std::unique_ptr<HashFunction>> comps;
    comps.reserve(k_);
    for (std::size_t j = 0; j < k_; ++j) {
        comps.push_back(base_->sample(component_seed(seed, j)));
    }
    return std::make_unique<TensoredFunction>(std::move(comps));
}

std::unique_ptr<HashFunction> TensoredFamily::sample(std::uint64_t seed) const { return sample_tensored(seed); }

std::string TensoredFamily::describe() const { return base_->describe() + "^" + std::to_string(k_); }

std::optional<double> TensoredFamily::collision_curve(double distance) const {
    auto p = base_->collision_curve(distance);
    if (!p) {
        return std::nullopt;
    }
    return std::pow(*p, static_cast<double>(k_));
}

std::shared_ptr<TensoredFamily> tensor(std::shared_ptr<const LshFamily> family, std::size_t k) {
    return std::make_shared<TensoredFamily>(std::move(family), k);
}

double CollisionEstimate::upper(double z) const noexcept {
    if (trials == 0) {
        return 1.0;
    }
    const double n = static_cast<double>(trials);
    const double p = std::max(p_hat, 1.0 / n);
    const double se = std::sqrt(p * (1.0 - std::min(p, 1.0 - 1.0 / n)) / n);
    return std::min(1.0, p_hat + z * std::max(se, std_error));
}

double CollisionEstimate::lower(double z) const noexcept { return std::max(0.0, p_hat - z * std_error); }

CollisionEstimate make_estimate(std::uint64_t collisions, std::uint64_t trials, std::uint64_t overflow) {
    if (trials == 0) {
        throw Error("an estimate needs at least one trial");
    }
    CollisionEstimate e;
    e.trials = trials;
    e.collisions = collisions;
    e.overflow_collisions = overflow;
    e.p_hat = static_cast<double>(collisions) / static_cast<double>(trials);
    e.std_error = std::sqrt(e.p_hat * (1.0 - e.p_hat) / static_cast<double>(trials));
    return e;
}

void parallel_chunks(std::uint64_t count, unsigned threads,
                     const std::function<void(std::uint64_t, std::uint64_t)>& body) {
    if (threads <= 1 || count < 2) {
        body(0, count);
        return;
    }
    const std::uint64_t chunks = std::min<std::uint64_t>(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (std::uint64_t c = 0; c < chunks; ++c) {
        const std::uint64_t begin = count * c / chunks;
        const std::uint64_t end = count * (c + 1) / chunks;
        pool.emplace_back([&body, begin, end] { body(begin, end); });
    }
    for (auto& t : pool) {
        t.join();
    }
}

CollisionEstimate estimate_collision(const LshFamily& family, ConstVec u, ConstVec v, std::uint64_t trials,
                                     std::uint64_t seed, unsigned threads) {
    if (trials == 0) {
        throw Error("estimate_collision needs trials >= 1");
    }
    family.check_domain(u);
    family.check_domain(v);
    std::atomic<std::uint64_t> total{0};
    std::atomic<std::uint64_t> total_overflow{0};
    parallel_chunks(trials, std::max(1u, threads), [&](std::uint64_t begin, std::uint64_t end) {
        std::uint64_t h = 0;
        std::uint64_t o = 0;
        for (std::uint64_t i = begin; i < end; ++i) {
            const auto fn = family.sample(derive_seed(seed, {i}));
            const PairOutcome out = fn->compare(u, v);
            h += out.collide ? 1 : 0;
            o += (out.collide && out.overflow) ? 1 : 0;
        }
        total += h;
        total_overflow += o;
    });
    return make_estimate(total, trials, total_overflow);
}

double gaussian_tail(double t) {
    if (!(t > 0.0)) {
        throw Error("gaussian_tail requires t > 0");
    }
    return 0.5 * std::erfc(t / std::numbers::sqrt2);
}

TailBounds gaussian_tail_bounds(double t) {
    if (!(t > 0.0)) {
        throw Error("gaussian_tail_bounds requires t > 0");
    }
    const double density = std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
    return TailBounds{density * (1.0 / t - 1.0 / (t * t * t)), density / t};
}

double rho_from_probs(double p1, double p2) {
    if (!(p1 > 0.0 && p1 < 1.0 && p2 > 0.0 && p2 < 1.0)) {
        throw Error("collision probabilities must lie in (0, 1)");
    }
    if (!(p1 > p2)) {
        throw Error("rho needs p1 > p2");
    }
    return std::log(1.0 / p1) / std::log(1.0 / p2);
}

} // namespace dalsh
