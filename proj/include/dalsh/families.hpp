#pragma once

#include <compare>
#include <functional>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dalsh/geometry.hpp"

namespace dalsh {

/// 128-bit fingerprint of a HashKey, used as the bucket address in tables.
struct KeyDigest {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
    auto operator<=>(const KeyDigest&) const = default;
};

/// Discrete hash value: a tuple of integers, or the reserved OVERFLOW symbol
/// produced by capped partitioning procedures.
class HashKey {
public:
    HashKey() = default;
    explicit HashKey(std::vector<std::int64_t> parts) : parts_(std::move(parts)) {}
    HashKey(std::initializer_list<std::int64_t> parts) : parts_(parts) {}

    static HashKey overflow();
    /// Length-prefixed concatenation, so equal concatenations imply equal components.
    static HashKey concat(std::span<const HashKey> components);

    bool is_overflow() const noexcept { return overflow_; }
    std::span<const std::int64_t> parts() const noexcept { return parts_; }
    KeyDigest digest() const noexcept;
    std::string to_string() const;

    bool operator==(const HashKey&) const = default;
    auto operator<=>(const HashKey&) const = default;

private:
    bool overflow_ = false;
    std::vector<std::int64_t> parts_;
};

struct HashKeyHasher {
    std::size_t operator()(const HashKey& k) const noexcept { return static_cast<std::size_t>(k.digest().lo); }
};

/// Outcome of hashing a pair with the same function.
struct PairOutcome {
    bool collide = false;
    /// Both points were left uncovered (the collision, if any, is OVERFLOW == OVERFLOW).
    bool overflow = false;
};

class HashFunction {
public:
    virtual ~HashFunction() = default;

    virtual std::size_t input_dim() const noexcept = 0;
    virtual HashKey eval(ConstVec x) const = 0;

    /// Same answer as comparing eval(u) and eval(v); families override it when
    /// the comparison can stop early.
    virtual PairOutcome compare(ConstVec u, ConstVec v) const;
};

class LshFamily {
public:
    virtual ~LshFamily() = default;

    virtual std::size_t input_dim() const noexcept = 0;
    virtual std::unique_ptr<HashFunction> sample(std::uint64_t seed) const = 0;
    virtual std::string describe() const = 0;

    /// Throws if x is outside the family's domain.
    virtual void check_domain(ConstVec x) const;

    /// Collision probability as a function of distance, when the family has
    /// a closed form or a numerically exact one.
    virtual std::optional<double> collision_curve(double /*distance*/) const { return std::nullopt; }
};

/// k independent components; evaluates to the k-tuple of component keys.
class TensoredFunction final : public HashFunction {
public:
    explicit TensoredFunction(std::vector<std::unique_ptr<HashFunction>> components);

    std::size_t input_dim() const noexcept override { return components_.front()->input_dim(); }
    HashKey eval(ConstVec x) const override;
    PairOutcome compare(ConstVec u, ConstVec v) const override;

    std::size_t k() const noexcept { return components_.size(); }
    const HashFunction& component(std::size_t j) const { return *components_.at(j); }

private:
    std::vector<std::unique_ptr<HashFunction>> components_;
};

class TensoredFamily final : public LshFamily {
public:
    TensoredFamily(std::shared_ptr<const LshFamily> base, std::size_t k);

    std::size_t input_dim() const noexcept override { return base_->input_dim(); }
    std::unique_ptr<HashFunction> sample(std::uint64_t seed) const override;
    std::unique_ptr<TensoredFunction> sample_tensored(std::uint64_t seed) const;
    std::string describe() const override;
    void check_domain(ConstVec x) const override { base_->check_domain(x); }
    std::optional<double> collision_curve(double distance) const override;

    std::size_t k() const noexcept { return k_; }
    const LshFamily& base() const noexcept { return *base_; }
    /// Seed of component j for a tensored function sampled with `seed`.
    static std::uint64_t component_seed(std::uint64_t seed, std::size_t j);

private:
    std::shared_ptr<const LshFamily> base_;
    std::size_t k_;
};

std::shared_ptr<TensoredFamily> tensor(std::shared_ptr<const LshFamily> family, std::size_t k);

struct CollisionEstimate {
    double p_hat = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t collisions = 0;
    /// Trials whose collision was OVERFLOW == OVERFLOW.
    std::uint64_t overflow_collisions = 0;
    double std_error = 0.0;

    double overflow_fraction() const noexcept {
        return trials == 0 ? 0.0 : static_cast<double>(overflow_collisions) / static_cast<double>(trials);
    }
    /// p_hat + z * stderr, with the stderr floored at the one-success level so a
    /// zero count still yields a positive bound.
    double upper(double z = 3.0) const noexcept;
    double lower(double z = 3.0) const noexcept;
};

CollisionEstimate make_estimate(std::uint64_t collisions, std::uint64_t trials, std::uint64_t overflow = 0);

/// Fraction of independently sampled functions with eval(u) == eval(v).
/// Trial i uses the function sampled with derive_seed(seed, {i}), so the
/// result does not depend on the thread count.
CollisionEstimate estimate_collision(const LshFamily& family, ConstVec u, ConstVec v, std::uint64_t trials,
                                     std::uint64_t seed, unsigned threads = 1);

/// Pr[X >= t] for standard normal X.
double gaussian_tail(double t);

struct TailBounds {
    double lower = 0.0;
    double upper = 0.0;
};

/// (1/sqrt(2 pi)) (1/t - 1/t^3) e^{-t^2/2} and (1/sqrt(2 pi)) (1/t) e^{-t^2/2}.
TailBounds gaussian_tail_bounds(double t);

/// ln(1/p1) / ln(1/p2), requiring 0 < p2 < p1 < 1.
double rho_from_probs(double p1, double p2);

/// Runs body(begin, end) over [0, count) split into contiguous chunks.
void parallel_chunks(std::uint64_t count, unsigned threads,
                     const std::function<void(std::uint64_t, std::uint64_t)>& body);

} // namespace dalsh
