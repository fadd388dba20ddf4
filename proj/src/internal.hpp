#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dalsh/two_level.hpp"

namespace dalsh::detail {

struct Ctx {
    const Dataset& work;   // index coordinates
    const Dataset& check;  // answers are verified here
    const TwoLevelParams& params;
    const Plan& plan;
};

bool in_shell(double dist, std::size_t l, double c);
SphericalParams inner_params(const Plan& plan, const TwoLevelParams& params, std::size_t l);
std::unique_ptr<TensoredFunction> outer_function(const Plan& plan, std::uint64_t seed);
ConstVec center_of(const Ctx& ctx, const OuterBucket& b);
std::optional<OuterBucket> make_bucket(const Ctx& ctx, std::vector<std::uint32_t> members, std::uint64_t seed);
void probe_bucket(const Ctx& ctx, const OuterBucket& b, ConstVec qw, ConstVec qc, std::size_t budget,
                  QueryResult& res);
Table build_table(const Ctx& ctx, std::uint64_t seed);

} // namespace dalsh::detail
