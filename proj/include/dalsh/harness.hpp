#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dalsh/families.hpp"
#include "dalsh/geometry.hpp"
#include "dalsh/two_level.hpp"

namespace dalsh {

struct PlantedInstance {
    Dataset data;
    Dataset queries;
    /// Id of the point within distance r of each query.
    std::vector<std::uint32_t> planted;
    double c = 2.0;
    /// Near radius; every non-planted point is at distance >= c r.
    double r = 1.0;
};

/// Gaussian base points with typical pairwise distance 3c; each query sits at
/// distance U[near_lo, near_hi] from a distinct random base point, and every
/// other point is at distance >= c from it.
PlantedInstance gen_planted(std::size_t n, std::size_t d, double c, std::size_t queries, std::uint64_t seed,
                            double near_lo = 0.5, double near_hi = 1.0);

/// Uniform points in a ball of the given radius.
Dataset gen_ball(std::size_t n, std::size_t d, double radius, std::uint64_t seed);

/// Exact audit of the planted guarantee; returns the number of violations.
std::size_t audit_planted(const PlantedInstance& inst);

/// Binary vectors as 0/1 coordinates; |x - y|_2 = sqrt(Hamming(x, y)).
Point embed_hamming_to_l2(std::span<const std::uint8_t> bits);
std::size_t hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// Planted (c, r)-Hamming instance embedded into R^d: the result has near
/// radius sqrt(r) and approximation factor sqrt(c).
PlantedInstance gen_planted_hamming(std::size_t n, std::size_t d, double c, std::size_t r, std::size_t queries,
                                    std::uint64_t seed);

Dataset read_fvecs(const std::string& path);
void write_fvecs(const std::string& path, const Dataset& data);
std::vector<std::vector<std::int32_t>> read_ivecs(const std::string& path);
void write_ivecs(const std::string& path, const std::vector<std::vector<std::int32_t>>& rows);

struct Neighbor {
    std::uint32_t id = 0;
    double distance = 0.0;
};

/// Exact nearest neighbour by linear scan.
Neighbor brute_force_nn(const Dataset& data, ConstVec q);

struct BenchmarkConfig {
    std::size_t n = 10000;
    std::size_t d = 64;
    double c = 2.0;
    double tau = 1.4142135623730951;
    Variant variant = Variant::Meb;
    ParamMode param_mode = ParamMode::Empirical;
    std::optional<std::size_t> tables;
    std::size_t queries = 1000;
    std::uint64_t trials = 200;
    std::uint64_t seed = 1;
    bool jl = false;
    bool classic = true;
    unsigned threads = 1;
    std::string out;

    TwoLevelParams index_params() const;
};

struct QueryStats {
    double recall = 0.0;
    double mean_examined = 0.0;
    double median_examined = 0.0;
    double mean_non_answers = 0.0;
    std::size_t max_non_answers = 0;
    std::size_t soundness_violations = 0;
    std::size_t max_annuli_per_table = 0;
    std::size_t queries = 0;
};

/// Runs every query and checks each answer against exact distances in `data`.
QueryStats evaluate(const TwoLevelIndex& index, const Dataset& data, const Dataset& queries, double c,
                    unsigned threads = 1);
QueryStats evaluate(const ClassicIndex& index, const Dataset& data, const Dataset& queries, double c,
                    unsigned threads = 1);
/// Fraction of queries with some point within c, by linear scan.
double oracle_recall(const Dataset& data, const Dataset& queries, double c);

/// One measured or computed quantity.
struct Metric {
    std::string name;
    double value = 0.0;
    /// "artifact" for measured targets, "formula" for closed-form values.
    std::string provenance = "artifact";
    std::optional<std::uint64_t> trials;
    std::optional<double> std_error;
    bool timing = false;
};

struct RhoEntry {
    std::string family;
    double d1 = 1.0;
    double d2 = 2.0;
    CollisionEstimate p1;
    CollisionEstimate p2;
    double rho = 0.0;
    double rho_std_error = 0.0;
    /// "ok", "lower_bound_only" (p2 = 0) or "degenerate" (p1 <= p2).
    std::string status = "ok";
    std::optional<double> predicted;
};

struct Report {
    static constexpr const char* kSchema = "dalsh.report/1";
    std::string title;
    std::vector<Metric> metrics;
    std::vector<RhoEntry> rho;

    void add(Metric m) { metrics.push_back(std::move(m)); }
    void add(std::string name, double value, std::string provenance = "artifact") {
        metrics.push_back(Metric{std::move(name), value, std::move(provenance), std::nullopt, std::nullopt, false});
    }
    void add_estimate(std::string name, double value, std::uint64_t trials, std::optional<double> std_error) {
        metrics.push_back(Metric{std::move(name), value, "artifact", trials, std_error, false});
    }
    void add_timing(std::string name, double seconds) {
        metrics.push_back(Metric{std::move(name), seconds, "artifact", std::nullopt, std::nullopt, true});
    }
    const Metric* find(const std::string& name) const;
    nlohmann::json to_json(bool with_timings = true) const;
    std::string to_text() const;
    void write(const std::string& path) const;
};

/// Builds the two-level index (and the classic baseline) on a planted instance
/// and measures recall, work and timings.
Report run_recall(const BenchmarkConfig& config);

struct FamilySpec {
    /// "spherical" or "ball_carving".
    std::string kind = "spherical";
    double eta = 1.0;
    double epsilon = 0.0;
    std::size_t t = 0;
    double w = 0.0;
};

/// rho = ln(1/p1) / ln(1/p2) at distances 1 and c, with a delta-method stderr.
RhoEntry estimate_rho_report(const FamilySpec& family, double c, std::size_t d, std::uint64_t trials,
                             std::uint64_t seed, unsigned threads = 1);
RhoEntry rho_entry(std::string family, double d1, double d2, const CollisionEstimate& p1,
                   const CollisionEstimate& p2);

struct MinhashResult {
    std::size_t s = 0;
    std::size_t overlap = 0;
    CollisionEstimate estimate;
    double jaccard = 0.0;
    /// (1 - x)/(1 + x) with x = |p - q|_1 / (2s).
    double formula = 0.0;
};

MinhashResult minhash_demo(std::size_t s, std::size_t overlap, std::uint64_t trials, std::uint64_t seed);

/// Fraction of rows whose norm is preserved within (1 +- eps) by the map.
double jl_norm_fraction(const JlMap& map, const Dataset& rows, double eps);

} // namespace dalsh
