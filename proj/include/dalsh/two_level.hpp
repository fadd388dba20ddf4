#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dalsh/ball_carving.hpp"
#include "dalsh/gaussian_lsh.hpp"
#include "dalsh/geometry.hpp"

namespace dalsh {

enum class ParamMode { Analytic, Empirical };
enum class Variant { Meb, Pivot };

std::string to_string(ParamMode m);
std::string to_string(Variant v);
ParamMode parse_param_mode(const std::string& s);
Variant parse_variant(const std::string& s);

struct TwoLevelParams {
    double c = 2.0;
    double tau = 1.4142135623730951;
    double delta_meb = 0.01;
    ParamMode param_mode = ParamMode::Empirical;
    Variant variant = Variant::Meb;
    /// Near radius; inputs are divided by it so the index works at r = 1.
    double r = 1.0;

    bool jl = false;
    /// Zero means 1/(2c).
    double epsilon_jl = 0.0;
    double jl_constant = 24.0;

    std::uint64_t seed = 1;
    std::optional<std::size_t> tables_override;
    std::optional<std::size_t> k_override;
    std::optional<std::size_t> k_tilde_override;
    /// Outer family; t = 0 means BallCarvingParams::for_n(n).
    BallCarvingParams outer{0, 0.0, 4096, 0.5, 0.0};
    std::size_t inner_max_parts = 1'000'000;
    /// Zero means d^{-1/4}.
    double inner_epsilon = 0.0;

    /// Monte-Carlo trials for the empirical outer collision estimates.
    std::uint64_t calibration_trials = 20000;
    /// Trials for estimate_Q when the table count is not overridden.
    std::uint64_t q_trials = 200;
    /// build() refuses plans needing more tables than this.
    std::size_t max_tables = 100000;
    unsigned threads = 1;

    void validate() const;
};

/// ceil((1 + delta) tau c / sqrt(2) - c/2) + 1.
std::size_t choose_T(double tau, double c, double delta_meb);
/// ceil(tau c - c/2) + 1: annulus range around a pivot whose ball has radius tau c.
std::size_t choose_T_pivot(double tau, double c);
/// Smallest k >= 1 with ratio^k <= 1/(2n).
std::size_t choose_k(std::size_t n, double ratio);
/// Smallest k >= 1 with outer_factor * p2_worst^k <= 1/(3n).
std::size_t choose_k_l(std::size_t n, double p2_worst, double outer_factor);

/// Inner far-pair collision probability at the worst admissible geometry of
/// annulus l: both norms c/2 + l + 1, distance c.
double inner_p2_worst(std::size_t l, double c, const SphericalParams& base);
double inner_eta(std::size_t l, double c);

/// (1 - 1/(2 tau^2) + 1/(2 tau^4)) / c^2.
double rho_two_level(double tau, double c);
/// Minimizer of the bracket of rho_two_level over tau > 1.
double optimal_tau();
/// 15/(16 c^2).
double pivot_rho_bound(double c);

/// Outer family collision estimate for a pair at the given distance.
CollisionEstimate outer_collision(const BallCarvingParams& p, std::size_t dim, double distance,
                                  std::uint64_t trials, std::uint64_t seed, unsigned threads = 1);

/// Everything build() derives before hashing the data.
struct Plan {
    std::size_t n = 0;
    std::size_t dim = 0;       // dimension the index works in (post-JL)
    double c_work = 2.0;       // approximation factor used inside the index
    BallCarvingParams outer;
    std::size_t k = 1;
    std::size_t T = 1;
    std::vector<std::size_t> k_tilde;  // per annulus l = 0..T
    std::vector<double> p2_worst;
    double outer_ratio = 0.0;   // U(tau c - 1)/L or its empirical counterpart
    double outer_far_pow_k = 0.0;
    CollisionEstimate p_near;   // outer p at distance 1 (empirical mode)
    CollisionEstimate p_sep;    // at tau c - 1
    CollisionEstimate p_far;    // at c
    std::size_t tables = 1;
    std::optional<double> Q;
    std::size_t jl_dim = 0;     // 0 when JL is off
};

struct QueryResult {
    std::optional<std::uint32_t> answer;
    std::size_t points_examined = 0;
    /// Examined points that failed the distance check.
    std::size_t non_answers = 0;
    std::size_t tables_probed = 0;
    std::size_t annuli_probed = 0;
    /// Largest number of annuli probed within one table.
    std::size_t max_annuli_per_table = 0;
    bool budget_exhausted = false;
};

struct DigestHasher {
    std::size_t operator()(const KeyDigest& d) const noexcept { return static_cast<std::size_t>(d.lo ^ (d.hi << 1)); }
};

using BucketMap = std::unordered_map<KeyDigest, std::vector<std::uint32_t>, DigestHasher>;

struct Annulus {
    std::uint32_t l = 0;
    std::uint32_t k_tilde = 1;
    std::uint64_t seed = 0;
    BucketMap buckets;  // translated members p - u_i, by inner key
};

struct OuterBucket {
    std::vector<std::uint32_t> members;  // post-pruning, ascending
    Point center;                        // u_i; empty for singleton buckets (the member itself)
    std::uint32_t pivot = 0;             // s_i
    std::vector<Annulus> annuli;
};

struct Table {
    std::uint64_t seed = 0;
    std::unique_ptr<TensoredFunction> outer;
    std::unordered_map<KeyDigest, OuterBucket, DigestHasher> buckets;
};

class TwoLevelIndex {
public:
    /// Plans (estimating Q when needed) and builds.
    static TwoLevelIndex build(const Dataset& data, const TwoLevelParams& params);
    static TwoLevelIndex build(const Dataset& data, const TwoLevelParams& params, const Plan& plan);

    /// Single-table query; stops scanning once `budget` non-answers have been seen.
    QueryResult query_table(std::size_t table, ConstVec q,
                            std::size_t budget = std::numeric_limits<std::size_t>::max()) const;
    /// Probes tables in order; gives up once more than ceil(3/Q) + 1 non-answers were examined.
    QueryResult query(ConstVec q) const;
    std::size_t stop_budget() const noexcept;

    const TwoLevelParams& params() const noexcept { return params_; }
    const Plan& plan() const noexcept { return plan_; }
    std::size_t tables() const noexcept { return tables_.size(); }
    const Table& table(std::size_t i) const { return tables_.at(i); }
    /// Point set in index coordinates (rescaled, and projected when JL is on).
    const Dataset& work_data() const noexcept { return jl_ ? mapped_ : data_; }
    /// Rescaled input points; answers are checked here.
    const Dataset& data() const noexcept { return data_; }
    ConstVec center_of(const OuterBucket& b) const;

    void save(std::ostream& out) const;
    static TwoLevelIndex load(std::istream& in);
    void save(const std::string& path) const;
    static TwoLevelIndex load(const std::string& path);

private:
    TwoLevelIndex() = default;
    void prepare(const Dataset& data);
    Point to_work(ConstVec q) const;

    TwoLevelParams params_;
    Plan plan_;
    Dataset data_;
    Dataset mapped_;
    std::optional<JlMap> jl_;
    std::vector<Table> tables_;
};

/// Parameter selection only (no hashing of the data besides Q estimation).
Plan make_plan(const Dataset& data, const TwoLevelParams& params);

enum class QMethod { Direct, Factored };

struct QEstimate {
    double Q = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t successes = 0;
    /// Factored method: outer near-collision probability and its k-th power.
    double p_near = 0.0;
    double p_near_pow_k = 1.0;
    double conditional = 0.0;
    double std_error = 0.0;
    QMethod method = QMethod::Factored;
};

/// Per-table success probability on planted pairs at distance exactly 1 from
/// random sample points, whose other neighbours are all at distance >= c.
/// Direct: fraction of (table, query) trials that return an answer.
/// Factored: p(1)^k times the success frequency of tables whose outer function
/// is conditioned to collide on the pair.
QEstimate estimate_Q(const Dataset& sample, const TwoLevelParams& params, const Plan& plan, std::uint64_t trials,
                     std::uint64_t seed, QMethod method = QMethod::Factored);

/// Single-level multi-table index over a tensored outer family. Keeps a
/// reference to the dataset.
class ClassicIndex {
public:
    static ClassicIndex build(const Dataset& data, double c, const BallCarvingParams& family, std::size_t k,
                              std::size_t R, std::uint64_t seed, unsigned threads = 1);
    QueryResult query(ConstVec q) const;

    std::size_t k() const noexcept { return k_; }
    std::size_t tables() const noexcept { return tables_.size(); }

private:
    struct ClassicTable {
        std::unique_ptr<TensoredFunction> fn;
        BucketMap buckets;
    };
    const Dataset* data_ = nullptr;
    double c_ = 2.0;
    std::size_t k_ = 1;
    std::vector<ClassicTable> tables_;
};

struct ClassicPlan {
    std::size_t k = 1;
    std::size_t R = 1;
    CollisionEstimate p_near;
    CollisionEstimate p_far;
};

/// k smallest with p_far^k <= 1/n, R = ceil(1 / p_near^k).
ClassicPlan classic_plan(std::size_t n, std::size_t dim, double c, const BallCarvingParams& family,
                         std::uint64_t trials, std::uint64_t seed, unsigned threads = 1);

} // namespace dalsh
