#include "dalsh/two_level.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <numbers>

#include <boost/math/tools/minima.hpp>

#include "dalsh/random.hpp"
#include "internal.hpp"

namespace dalsh {

namespace {

constexpr double kShellSlack = 1e-9;
constexpr double kCeilSlack = 1e-9;

std::size_t ceil_index(double x) { return static_cast<std::size_t>(std::max(0.0, std::ceil(x - kCeilSlack))); }

Dataset rescale(const Dataset& data, double r) {
    if (r == 1.0) {
        return data;
    }
    std::vector<double> rows = data.raw();
    for (double& v : rows) {
        v /= r;
    }
    return Dataset(data.dim(), std::move(rows));
}

} // namespace

std::string to_string(ParamMode m) { return m == ParamMode::Analytic ? "analytic" : "empirical"; }
std::string to_string(Variant v) { return v == Variant::Meb ? "meb" : "pivot"; }

ParamMode parse_param_mode(const std::string& s) {
    if (s == "analytic") {
        return ParamMode::Analytic;
    }
    if (s == "empirical") {
        return ParamMode::Empirical;
    }
    throw Error("unknown parameter mode '" + s + "'");
}

Variant parse_variant(const std::string& s) {
    if (s == "meb") {
        return Variant::Meb;
    }
    if (s == "pivot") {
        return Variant::Pivot;
    }
    throw Error("unknown variant '" + s + "'");
}

void TwoLevelParams::validate() const {
    if (!(c > 1.0)) {
        throw Error("approximation factor c must exceed 1");
    }
    if (!(tau > 1.0)) {
        throw Error("tau must exceed 1");
    }
    if (!(delta_meb >= 0.0 && delta_meb <= 0.5)) {
        throw Error("delta_meb must lie in [0, 0.5]");
    }
    if (!(r > 0.0)) {
        throw Error("near radius r must be positive");
    }
    if (tables_override && *tables_override == 0) {
        throw Error("table count must be at least 1");
    }
    if ((k_override && *k_override == 0) || (k_tilde_override && *k_tilde_override == 0)) {
        throw Error("tensoring powers must be at least 1");
    }
    if (epsilon_jl < 0.0 || !(jl_constant > 0.0)) {
        throw Error("invalid JL settings");
    }
}

std::size_t choose_T(double tau, double c, double delta_meb) {
    if (!(tau > 1.0) || !(c > 1.0)) {
        throw Error("choose_T needs tau > 1 and c > 1");
    }
    return ceil_index((1.0 + delta_meb) * tau * c / std::numbers::sqrt2 - c / 2.0) + 1;
}

std::size_t choose_T_pivot(double tau, double c) {
    if (!(tau > 1.0) || !(c > 1.0)) {
        throw Error("choose_T_pivot needs tau > 1 and c > 1");
    }
    return ceil_index(tau * c - c / 2.0) + 1;
}

namespace {

// Smallest k >= 1 with factor * base^k <= target.
std::size_t smallest_power(double base, double factor, double target) {
    if (factor <= target || base <= 0.0) {
        return 1;
    }
    std::size_t k = static_cast<std::size_t>(std::max(1.0, std::floor(std::log(target / factor) / std::log(base))));
    while (k > 1 && factor * std::pow(base, static_cast<double>(k - 1)) <= target) {
        --k;
    }
    while (factor * std::pow(base, static_cast<double>(k)) > target) {
        ++k;
    }
    return k;
}

} // namespace

std::size_t choose_k(std::size_t n, double ratio) {
    if (n < 1) {
        throw Error("choose_k needs n >= 1");
    }
    if (!(ratio < 1.0) || std::isnan(ratio)) {
        throw Error("outer family cannot separate scales at these parameters");
    }
    return smallest_power(ratio, 1.0, 1.0 / (2.0 * static_cast<double>(n)));
}

std::size_t choose_k_l(std::size_t n, double p2_worst, double outer_factor) {
    if (n < 1) {
        throw Error("choose_k_l needs n >= 1");
    }
    if (!(p2_worst < 1.0) || std::isnan(p2_worst)) {
        throw Error("inner family cannot separate scales at these parameters");
    }
    return smallest_power(p2_worst, outer_factor, 1.0 / (3.0 * static_cast<double>(n)));
}

double inner_eta(std::size_t l, double c) { return 0.5 + static_cast<double>(l) / c; }

double inner_p2_worst(std::size_t l, double c, const SphericalParams& base) {
    const double radius = c / 2.0 + static_cast<double>(l) + 1.0;
    return spherical_collision_exact(base.unit_threshold(), chord_angle(c, radius));
}

double rho_two_level(double tau, double c) {
    if (!(tau > 1.0)) {
        throw Error("rho_two_level needs tau > 1");
    }
    if (!(c > 1.0)) {
        throw Error("rho_two_level needs c > 1");
    }
    const double t2 = tau * tau;
    return (1.0 - 1.0 / (2.0 * t2) + 1.0 / (2.0 * t2 * t2)) / (c * c);
}

double optimal_tau() {
    auto bracket = [](double tau) { return rho_two_level(tau, 2.0) * 4.0; };
    return boost::math::tools::brent_find_minima(bracket, 1.0 + 1e-9, 10.0, 40).first;
}

double pivot_rho_bound(double c) {
    if (!(c > 1.0)) {
        throw Error("pivot_rho_bound needs c > 1");
    }
    return 15.0 / (16.0 * c * c);
}

CollisionEstimate outer_collision(const BallCarvingParams& p, std::size_t dim, double dist, std::uint64_t trials,
                                  std::uint64_t seed, unsigned threads) {
    if (!(dist >= 0.0)) {
        throw Error("distance must be nonnegative");
    }
    BallCarvingFamily family(p, dim);
    std::vector<double> u(dim, 0.0);
    std::vector<double> v(dim, 0.0);
    v[0] = dist;
    return estimate_collision(family, u, v, trials, seed, threads);
}

namespace detail {

bool in_shell(double dist, std::size_t l, double c) {
    const double lo = l == 0 ? 0.0 : c / 2.0 + static_cast<double>(l) - 1.0;
    const double hi = c / 2.0 + static_cast<double>(l) + 1.0;
    return dist >= lo - kShellSlack && dist <= hi + kShellSlack;
}

SphericalParams inner_params(const Plan& plan, const TwoLevelParams& params, std::size_t l) {
    SphericalParams p;
    p.eta = inner_eta(l, plan.c_work);
    p.c = plan.c_work;
    p.d = plan.dim;
    p.epsilon = params.inner_epsilon;
    p.max_parts = params.inner_max_parts;
    return p;
}

std::vector<std::unique_ptr<SphericalFunction>> inner_components(const Plan& plan, const TwoLevelParams& params,
                                                                 const Annulus& a) {
    const SphericalParams sp = inner_params(plan, params, a.l);
    std::vector<std::unique_ptr<SphericalFunction>> out;
    for (std::size_t j = 0; j < a.k_tilde; ++j) {
        out.push_back(sample_spherical(sp, TensoredFamily::component_seed(a.seed, j)));
    }
    return out;
}

KeyDigest inner_key(const std::vector<std::unique_ptr<SphericalFunction>>& comps, ConstVec x) {
    std::vector<HashKey> keys;
    keys.reserve(comps.size());
    for (const auto& f : comps) {
        keys.push_back(f->eval(x));
    }
    return HashKey::concat(keys).digest();
}

std::vector<std::uint32_t> prune(const Ctx& ctx, std::vector<std::uint32_t> members) {
    const double limit = ctx.params.tau * ctx.plan.c_work;
    const double limit2 = limit * limit;
    std::vector<char> alive(members.size(), 1);
    if (ctx.params.variant == Variant::Pivot) {
        const ConstVec pivot = ctx.work.point(members.front());
        for (std::size_t j = 1; j < members.size(); ++j) {
            alive[j] = distance_sq(pivot, ctx.work.point(members[j])) <= limit2;
        }
    } else {
        // Deleting the first far pair (i, j) in lexicographic order and
        // rescanning resumes at the next surviving i.
        for (std::size_t i = 0; i < members.size(); ++i) {
            if (!alive[i]) {
                continue;
            }
            const ConstVec pi = ctx.work.point(members[i]);
            for (std::size_t j = i + 1; j < members.size(); ++j) {
                if (alive[j] && distance_sq(pi, ctx.work.point(members[j])) > limit2) {
                    alive[i] = 0;
                    alive[j] = 0;
                    break;
                }
            }
        }
    }
    std::vector<std::uint32_t> kept;
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (alive[i]) {
            kept.push_back(members[i]);
        }
    }
    return kept;
}

ConstVec center_of(const Ctx& ctx, const OuterBucket& b) {
    return b.center.dim() == 0 ? ctx.work.point(b.pivot) : ConstVec(b.center);
}

std::optional<OuterBucket> make_bucket(const Ctx& ctx, std::vector<std::uint32_t> members, std::uint64_t seed) {
    members = prune(ctx, std::move(members));
    if (members.empty()) {
        return std::nullopt;
    }
    OuterBucket b;
    b.members = std::move(members);
    if (b.members.size() == 1) {
        b.pivot = b.members.front();
        return b;
    }
    if (ctx.params.variant == Variant::Pivot) {
        b.pivot = b.members.front();
    } else {
        const double delta = ctx.params.delta_meb > 0.0 ? ctx.params.delta_meb : 1e-6;
        b.center = smallest_enclosing_ball(ctx.work, b.members, delta).center;
        double best = std::numeric_limits<double>::infinity();
        // Near-ties (within 1e-12) go to the smallest id.
        for (std::uint32_t id : b.members) {
            const double d = distance(b.center, ctx.work.point(id));
            if (d < best - 1e-12) {
                best = d;
                b.pivot = id;
            }
        }
    }
    const ConstVec u = center_of(ctx, b);
    std::vector<double> dist(b.members.size());
    for (std::size_t i = 0; i < b.members.size(); ++i) {
        dist[i] = distance(u, ctx.work.point(b.members[i]));
    }
    for (std::size_t l = 0; l <= ctx.plan.T; ++l) {
        std::vector<std::uint32_t> ids;
        std::vector<Point> shifted;
        for (std::size_t i = 0; i < b.members.size(); ++i) {
            // s_i is always checked first, so it needs no annulus entry.
            if (b.members[i] != b.pivot && in_shell(dist[i], l, ctx.plan.c_work)) {
                ids.push_back(b.members[i]);
                shifted.push_back(subtract(ctx.work.point(b.members[i]), u));
            }
        }
        if (ids.empty()) {
            continue;
        }
        Annulus a;
        a.l = static_cast<std::uint32_t>(l);
        a.k_tilde = static_cast<std::uint32_t>(ctx.plan.k_tilde.at(l));
        a.seed = derive_seed(seed, {0xA7ull, l});
        const auto comps = inner_components(ctx.plan, ctx.params, a);
        std::vector<ConstVec> views(shifted.begin(), shifted.end());
        std::vector<std::vector<HashKey>> keys;
        for (const auto& f : comps) {
            keys.push_back(f->eval_batch(views));
        }
        std::vector<HashKey> parts(comps.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            for (std::size_t j = 0; j < comps.size(); ++j) {
                parts[j] = keys[j][i];
            }
            a.buckets[HashKey::concat(parts).digest()].push_back(ids[i]);
        }
        b.annuli.push_back(std::move(a));
    }
    return b;
}

void probe_bucket(const Ctx& ctx, const OuterBucket& b, ConstVec qw, ConstVec qc, std::size_t budget,
                  QueryResult& res) {
    const double c2 = ctx.params.c * ctx.params.c;
    auto check = [&](std::uint32_t id) {
        ++res.points_examined;
        if (distance_sq(qc, ctx.check.point(id)) <= c2) {
            res.answer = id;
            return true;
        }
        ++res.non_answers;
        if (res.non_answers >= budget) {
            res.budget_exhausted = true;
        }
        return false;
    };
    if (check(b.pivot) || res.budget_exhausted || b.annuli.empty()) {
        return;
    }
    const ConstVec u = center_of(ctx, b);
    const double dq = distance(qw, u);
    const Point shifted = subtract(qw, u);
    std::size_t probed = 0;
    for (const Annulus& a : b.annuli) {
        if (!in_shell(dq, a.l, ctx.plan.c_work)) {
            continue;
        }
        ++probed;
        ++res.annuli_probed;
        res.max_annuli_per_table = std::max(res.max_annuli_per_table, probed);
        const auto it = a.buckets.find(inner_key(inner_components(ctx.plan, ctx.params, a), shifted));
        if (it == a.buckets.end()) {
            continue;
        }
        for (std::uint32_t id : it->second) {
            if (check(id) || res.budget_exhausted) {
                return;
            }
        }
    }
}

std::unique_ptr<TensoredFunction> outer_function(const Plan& plan, std::uint64_t seed) {
    auto base = std::make_shared<BallCarvingFamily>(plan.outer, plan.dim);
    return TensoredFamily(base, plan.k).sample_tensored(seed);
}

Table build_table(const Ctx& ctx, std::uint64_t seed) {
    Table t;
    t.seed = seed;
    t.outer = outer_function(ctx.plan, derive_seed(seed, {0x0Bull}));
    std::map<KeyDigest, std::vector<std::uint32_t>> groups;
    for (std::size_t i = 0; i < ctx.work.size(); ++i) {
        groups[t.outer->eval(ctx.work.point(i)).digest()].push_back(static_cast<std::uint32_t>(i));
    }
    for (auto& [key, members] : groups) {
        auto b = make_bucket(ctx, std::move(members), derive_seed(seed, {key.hi, key.lo}));
        if (b) {
            t.buckets.emplace(key, std::move(*b));
        }
    }
    return t;
}

} // namespace detail

Plan make_plan(const Dataset& data, const TwoLevelParams& params) {
    params.validate();
    if (data.empty()) {
        throw Error("cannot build an index over an empty dataset");
    }
    Plan plan;
    plan.n = data.size();
    plan.dim = data.dim();
    plan.c_work = params.c;
    const Dataset scaled = rescale(data, params.r);
    Dataset work = scaled;
    if (params.jl && plan.n >= 2) {
        const double eps = params.epsilon_jl > 0.0 ? params.epsilon_jl : 1.0 / (2.0 * params.c);
        const std::size_t m = jl_dimension(plan.n, eps, params.jl_constant);
        if (m < data.dim()) {
            if (!(params.c - 1.0 > 1.0)) {
                throw Error("JL reduction builds at c - 1 and needs c > 2");
            }
            plan.jl_dim = m;
            plan.dim = m;
            plan.c_work = params.c - 1.0;
            work = JlMap(data.dim(), m, derive_seed(params.seed, {0x1Aull})).apply(scaled);
        }
    }
    const double c = plan.c_work;

    if (params.outer.t == 0) {
        plan.outer = BallCarvingParams::for_t(std::min(default_t(std::max<std::size_t>(plan.n, 2)), plan.dim));
        plan.outer.max_grids = params.outer.max_grids;
        plan.outer.A = params.outer.A;
    } else {
        plan.outer = params.outer;
    }
    plan.outer.validate();

    const double sep = params.tau * c - 1.0;
    auto est = [&](double dist, std::uint64_t tag) {
        return outer_collision(plan.outer, plan.dim, dist, params.calibration_trials,
                               derive_seed(params.seed, {0xCA11ull, tag}), params.threads);
    };
    if (params.param_mode == ParamMode::Empirical) {
        plan.p_near = est(1.0, 1);
        plan.p_sep = est(sep, 2);
        plan.p_far = est(c, 3);
        const double pn = plan.p_near.p_hat;
        if (pn == 0.0) {
            throw Error("outer family never collides at distance 1; increase calibration trials or w");
        }
        const double ps = std::max(plan.p_sep.p_hat, 1.0 / static_cast<double>(plan.p_sep.trials));
        const double rel = std::hypot(plan.p_near.std_error / pn, plan.p_sep.std_error / ps);
        plan.outer_ratio = ps / pn * (1.0 + 3.0 * rel);
    } else {
        if (!(sep > 1.0)) {
            throw Error("analytic mode needs tau c - 1 > 1");
        }
        const AnalyticBounds b{plan.outer.t, plan.outer.epsilon, plan.outer.A};
        plan.outer_ratio = std::exp(log_U_bound(sep, b) - log_L_bound(b));
    }
    plan.k = params.k_override ? *params.k_override : choose_k(plan.n, plan.outer_ratio);
    const double far_one = params.param_mode == ParamMode::Empirical
                               ? std::min(1.0, plan.p_far.p_hat + 3.0 * plan.p_far.std_error)
                               : U_bound(c, AnalyticBounds{plan.outer.t, plan.outer.epsilon, plan.outer.A});
    plan.outer_far_pow_k = std::pow(far_one, static_cast<double>(plan.k));

    plan.T = params.variant == Variant::Meb ? choose_T(params.tau, c, params.delta_meb) : choose_T_pivot(params.tau, c);
    for (std::size_t l = 0; l <= plan.T; ++l) {
        const double p2 = inner_p2_worst(l, c, detail::inner_params(plan, params, l));
        plan.p2_worst.push_back(p2);
        plan.k_tilde.push_back(params.k_tilde_override ? *params.k_tilde_override
                                                       : choose_k_l(plan.n, p2, plan.outer_far_pow_k));
    }

    if (params.tables_override) {
        plan.tables = *params.tables_override;
    } else {
        const QEstimate q =
            estimate_Q(work, params, plan, params.q_trials, derive_seed(params.seed, {0x0Eull}), QMethod::Factored);
        plan.Q = q.Q;
        const double R = std::ceil(1.0 / q.Q);
        plan.tables = R > 1e15 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(R);
    }
    return plan;
}

void TwoLevelIndex::prepare(const Dataset& data) {
    data_ = rescale(data, params_.r);
    if (plan_.jl_dim > 0) {
        jl_.emplace(data.dim(), plan_.jl_dim, derive_seed(params_.seed, {0x1Aull}));
        mapped_ = jl_->apply(data_);
    }
}

TwoLevelIndex TwoLevelIndex::build(const Dataset& data, const TwoLevelParams& params) {
    return build(data, params, make_plan(data, params));
}

TwoLevelIndex TwoLevelIndex::build(const Dataset& data, const TwoLevelParams& params, const Plan& plan) {
    params.validate();
    if (data.empty()) {
        throw Error("cannot build an index over an empty dataset");
    }
    if (plan.tables > params.max_tables) {
        throw Error("plan needs " + std::to_string(plan.tables) + " tables, above max_tables " +
                    std::to_string(params.max_tables));
    }
    TwoLevelIndex index;
    index.params_ = params;
    index.plan_ = plan;
    index.prepare(data);
    index.tables_.resize(plan.tables);
    const detail::Ctx ctx{index.work_data(), index.data_, index.params_, index.plan_};
    parallel_chunks(plan.tables, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            index.tables_[t] = detail::build_table(ctx, derive_seed(params.seed, {0x7Aull, t}));
        }
    });
    return index;
}

ConstVec TwoLevelIndex::center_of(const OuterBucket& b) const {
    return detail::center_of(detail::Ctx{work_data(), data_, params_, plan_}, b);
}

Point TwoLevelIndex::to_work(ConstVec q) const { return jl_ ? jl_->apply(q) : Point(std::vector<double>(q.begin(), q.end())); }

std::size_t TwoLevelIndex::stop_budget() const noexcept {
    const double Q = plan_.Q ? *plan_.Q : 1.0 / static_cast<double>(std::max<std::size_t>(tables_.size(), 1));
    const double b = std::ceil(3.0 / Q) + 1.0;
    return b > 1e18 ? std::numeric_limits<std::size_t>::max() : static_cast<std::size_t>(b);
}

QueryResult TwoLevelIndex::query_table(std::size_t table, ConstVec q, std::size_t budget) const {
    if (q.size() != data_.dim()) {
        throw Error("query dimension " + std::to_string(q.size()) + " does not match index dimension " +
                    std::to_string(data_.dim()));
    }
    const Point qc = scale(q, 1.0 / params_.r);
    const Point qw = to_work(qc);
    QueryResult res;
    res.tables_probed = 1;
    const Table& t = tables_.at(table);
    const auto it = t.buckets.find(t.outer->eval(qw).digest());
    if (it != t.buckets.end()) {
        detail::probe_bucket(detail::Ctx{work_data(), data_, params_, plan_}, it->second, qw, qc, budget, res);
    }
    return res;
}

QueryResult TwoLevelIndex::query(ConstVec q) const {
    if (q.size() != data_.dim()) {
        throw Error("query dimension " + std::to_string(q.size()) + " does not match index dimension " +
                    std::to_string(data_.dim()));
    }
    const Point qc = scale(q, 1.0 / params_.r);
    const Point qw = to_work(qc);
    const detail::Ctx ctx{work_data(), data_, params_, plan_};
    const std::size_t budget = stop_budget();
    QueryResult res;
    for (const Table& t : tables_) {
        ++res.tables_probed;
        const auto it = t.buckets.find(t.outer->eval(qw).digest());
        if (it == t.buckets.end()) {
            continue;
        }
        detail::probe_bucket(ctx, it->second, qw, qc, budget, res);
        if (res.answer || res.budget_exhausted) {
            break;
        }
    }
    return res;
}

QEstimate estimate_Q(const Dataset& sample, const TwoLevelParams& params, const Plan& plan, std::uint64_t trials,
                     std::uint64_t seed, QMethod method) {
    if (trials < 100) {
        throw Error("estimate_Q needs at least 100 trials");
    }
    if (sample.empty() || sample.dim() != plan.dim) {
        throw Error("estimate_Q sample does not match the plan dimension");
    }
    const double c2 = plan.c_work * plan.c_work;
    const detail::Ctx ctx{sample, sample, params, plan};
    // The sample is already in index coordinates, so answers are checked there
    // against c_work.
    TwoLevelParams local = params;
    local.c = plan.c_work;
    const detail::Ctx qctx{sample, sample, local, plan};

    auto planted = [&](std::uint64_t i, std::uint32_t& pid) {
        CounterRng rng(seed, i);
        for (int attempt = 0; attempt < 1000; ++attempt) {
            pid = static_cast<std::uint32_t>(rng() % sample.size());
            std::vector<double> dir(sample.dim());
            for (double& v : dir) {
                v = rng.normal();
            }
            const Point step = normalize_to_radius(dir, 1.0);
            std::vector<double> q(sample.dim());
            const ConstVec p = sample.point(pid);
            for (std::size_t j = 0; j < q.size(); ++j) {
                q[j] = p[j] + step[j];
            }
            bool isolated = true;
            for (std::size_t o = 0; o < sample.size() && isolated; ++o) {
                isolated = o == pid || distance_sq(q, sample.point(o)) >= c2;
            }
            if (isolated) {
                return Point(std::move(q));
            }
        }
        throw Error("could not plant an isolated query pair in the sample");
    };

    std::atomic<std::uint64_t> successes{0};
    QEstimate out;
    out.method = method;
    out.trials = trials;
    if (method == QMethod::Direct) {
        parallel_chunks(trials, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
            std::uint64_t hits = 0;
            for (std::uint64_t i = begin; i < end; ++i) {
                std::uint32_t pid = 0;
                const Point q = planted(i, pid);
                const Table t = detail::build_table(ctx, derive_seed(seed, {0xD1ull, i}));
                const auto it = t.buckets.find(t.outer->eval(q).digest());
                if (it != t.buckets.end()) {
                    QueryResult res;
                    detail::probe_bucket(qctx, it->second, q, q, std::numeric_limits<std::size_t>::max(), res);
                    hits += res.answer ? 1 : 0;
                }
            }
            successes += hits;
        });
        const CollisionEstimate e = make_estimate(successes, trials);
        out.successes = e.collisions;
        out.Q = e.p_hat;
        out.std_error = e.std_error;
        out.conditional = e.p_hat;
    } else {
        const CollisionEstimate pn =
            plan.p_near.trials > 0
                ? plan.p_near
                : outer_collision(plan.outer, plan.dim, 1.0, params.calibration_trials,
                                  derive_seed(seed, {0xCA11ull}), params.threads);
        parallel_chunks(trials, params.threads, [&](std::uint64_t begin, std::uint64_t end) {
            std::uint64_t hits = 0;
            for (std::uint64_t i = begin; i < end; ++i) {
                std::uint32_t pid = 0;
                const Point q = planted(i, pid);
                const ConstVec p = sample.point(pid);
                // Condition each outer component on colliding on (q, p).
                std::vector<std::unique_ptr<BallCarvingFunction>> comps;
                for (std::size_t j = 0; j < plan.k; ++j) {
                    for (std::uint64_t a = 0;; ++a) {
                        if (a > 10'000'000) {
                            throw Error("outer component never collides on a near pair");
                        }
                        auto f = sample_ball_carving(plan.outer, plan.dim, derive_seed(seed, {0xFAull, i, j, a}));
                        if (f->compare(q, p).collide) {
                            comps.push_back(std::move(f));
                            break;
                        }
                    }
                }
                std::vector<HashKey> pkeys;
                for (const auto& f : comps) {
                    pkeys.push_back(f->eval(p));
                }
                std::vector<std::uint32_t> members;
                for (std::size_t o = 0; o < sample.size(); ++o) {
                    bool same = true;
                    for (std::size_t j = 0; j < comps.size() && same; ++j) {
                        same = o == pid || comps[j]->eval(sample.point(o)) == pkeys[j];
                    }
                    if (same) {
                        members.push_back(static_cast<std::uint32_t>(o));
                    }
                }
                const auto b = detail::make_bucket(ctx, std::move(members), derive_seed(seed, {0xB0ull, i}));
                if (b) {
                    QueryResult res;
                    detail::probe_bucket(qctx, *b, q, q, std::numeric_limits<std::size_t>::max(), res);
                    hits += res.answer ? 1 : 0;
                }
            }
            successes += hits;
        });
        const CollisionEstimate cond = make_estimate(successes, trials);
        out.successes = cond.collisions;
        out.p_near = pn.p_hat;
        out.p_near_pow_k = std::pow(pn.p_hat, static_cast<double>(plan.k));
        out.conditional = cond.p_hat;
        out.Q = out.p_near_pow_k * cond.p_hat;
        const double rel_p = pn.p_hat > 0.0 ? pn.std_error / pn.p_hat : 0.0;
        const double rel_c = cond.p_hat > 0.0 ? cond.std_error / cond.p_hat : 0.0;
        out.std_error = out.Q * std::hypot(static_cast<double>(plan.k) * rel_p, rel_c);
    }
    if (out.Q == 0.0) {
        throw Error("estimated Q is zero; increase trials or adjust parameters");
    }
    return out;
}

ClassicPlan classic_plan(std::size_t n, std::size_t dim, double c, const BallCarvingParams& family,
                         std::uint64_t trials, std::uint64_t seed, unsigned threads) {
    if (n < 1 || !(c > 1.0)) {
        throw Error("classic_plan needs n >= 1 and c > 1");
    }
    ClassicPlan plan;
    plan.p_near = outer_collision(family, dim, 1.0, trials, derive_seed(seed, {1}), threads);
    plan.p_far = outer_collision(family, dim, c, trials, derive_seed(seed, {2}), threads);
    if (plan.p_near.p_hat == 0.0) {
        throw Error("family never collides at distance 1");
    }
    if (!(plan.p_far.p_hat < plan.p_near.p_hat)) {
        throw Error("family does not separate distances 1 and c");
    }
    const double p2 = std::max(plan.p_far.p_hat, 1.0 / static_cast<double>(trials));
    plan.k = smallest_power(p2, 1.0, 1.0 / static_cast<double>(n));
    plan.R = static_cast<std::size_t>(std::ceil(std::pow(plan.p_near.p_hat, -static_cast<double>(plan.k)) - kCeilSlack));
    return plan;
}

ClassicIndex ClassicIndex::build(const Dataset& data, double c, const BallCarvingParams& family, std::size_t k,
                                 std::size_t R, std::uint64_t seed, unsigned threads) {
    if (data.empty()) {
        throw Error("cannot build an index over an empty dataset");
    }
    if (k == 0 || R == 0) {
        throw Error("classic index needs k >= 1 and R >= 1");
    }
    ClassicIndex index;
    index.data_ = &data;
    index.c_ = c;
    index.k_ = k;
    index.tables_.resize(R);
    auto base = std::make_shared<BallCarvingFamily>(family, data.dim());
    const TensoredFamily tf(base, k);
    parallel_chunks(R, threads, [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t t = begin; t < end; ++t) {
            ClassicTable& table = index.tables_[t];
            table.fn = tf.sample_tensored(derive_seed(seed, {0xC1ull, t}));
            for (std::size_t i = 0; i < data.size(); ++i) {
                table.buckets[table.fn->eval(data.point(i)).digest()].push_back(static_cast<std::uint32_t>(i));
            }
        }
    });
    return index;
}

QueryResult ClassicIndex::query(ConstVec q) const {
    if (q.size() != data_->dim()) {
        throw Error("query dimension does not match the index");
    }
    const double c2 = c_ * c_;
    QueryResult res;
    for (const ClassicTable& t : tables_) {
        ++res.tables_probed;
        const auto it = t.buckets.find(t.fn->eval(q).digest());
        if (it == t.buckets.end()) {
            continue;
        }
        for (std::uint32_t id : it->second) {
            ++res.points_examined;
            if (distance_sq(q, data_->point(id)) <= c2) {
                res.answer = id;
                return res;
            }
            ++res.non_answers;
        }
    }
    return res;
}

} // namespace dalsh
