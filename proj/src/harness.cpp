#include "dalsh/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "dalsh/random.hpp"

namespace dalsh {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> gaussian_vector(CounterRng& rng, std::size_t d) {
    std::vector<double> v(d);
    for (double& x : v) {
        x = rng.normal();
    }
    return v;
}

} // namespace

PlantedInstance gen_planted(std::size_t n, std::size_t d, double c, std::size_t queries, std::uint64_t seed,
                            double near_lo, double near_hi) {
    if (n < 2 || d < 2) {
        throw Error("gen_planted needs n >= 2 and d >= 2");
    }
    if (!(c > 1.0)) {
        throw Error("gen_planted needs c > 1");
    }
    if (!(near_lo > 0.0 && near_lo <= near_hi && near_hi <= 1.0)) {
        throw Error("planted distance range must lie in (0, 1]");
    }
    if (queries > n) {
        throw Error("more queries than base points");
    }
    PlantedInstance inst;
    inst.c = c;
    const double sigma = 3.0 * c / std::sqrt(2.0 * static_cast<double>(d));
    std::vector<double> rows(n * d);
    CounterRng base(seed, 1);
    for (double& x : rows) {
        x = sigma * base.normal();
    }
    inst.data = Dataset(d, std::move(rows));
    inst.queries = Dataset(d);
    std::vector<char> used(n, 0);
    const double c2 = c * c;
    for (std::size_t j = 0; j < queries; ++j) {
        CounterRng rng(derive_seed(seed, {2, j}));
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const auto pid = static_cast<std::uint32_t>(rng() % n);
            if (used[pid]) {
                continue;
            }
            const double radius = near_lo + (near_hi - near_lo) * rng.uniform();
            const Point step = normalize_to_radius(gaussian_vector(rng, d), radius);
            std::vector<double> q(d);
            const ConstVec p = inst.data.point(pid);
            for (std::size_t k = 0; k < d; ++k) {
                q[k] = p[k] + step[k];
            }
            bool ok = distance(q, p) <= 1.0;
            for (std::size_t o = 0; o < n && ok; ++o) {
                ok = o == pid || distance_sq(q, inst.data.point(o)) >= c2;
            }
            if (ok) {
                used[pid] = 1;
                inst.queries.add(q);
                inst.planted.push_back(pid);
                placed = true;
            }
        }
        if (!placed) {
            throw Error("could not plant query " + std::to_string(j) + " with all decoys beyond c");
        }
    }
    return inst;
}

Dataset gen_ball(std::size_t n, std::size_t d, double radius, std::uint64_t seed) {
    if (n == 0 || d == 0 || !(radius > 0.0)) {
        throw Error("gen_ball needs n, d >= 1 and a positive radius");
    }
    Dataset out(d);
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        CounterRng rng(seed, i);
        const double len = radius * std::pow(rng.uniform(), 1.0 / static_cast<double>(d));
        std::vector<double> v = gaussian_vector(rng, d);
        if (norm(v) == 0.0) {
            v[0] = 1.0;
        }
        out.add(normalize_to_radius(v, std::max(len, 1e-12)));
    }
    return out;
}

std::size_t audit_planted(const PlantedInstance& inst) {
    std::size_t bad = 0;
    const double far = inst.c * inst.r;
    for (std::size_t j = 0; j < inst.queries.size(); ++j) {
        const ConstVec q = inst.queries.point(j);
        for (std::size_t o = 0; o < inst.data.size(); ++o) {
            const double dist = distance(q, inst.data.point(o));
            if (o == inst.planted[j] ? dist > inst.r : dist < far) {
                ++bad;
            }
        }
    }
    return bad;
}

Point embed_hamming_to_l2(std::span<const std::uint8_t> bits) {
    std::vector<double> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] > 1) {
            throw Error("hamming embedding needs a 0/1 vector");
        }
        out[i] = bits[i];
    }
    return Point(std::move(out));
}

std::size_t hamming(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    if (a.size() != b.size()) {
        throw Error("hamming distance needs equal lengths");
    }
    std::size_t h = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        h += a[i] != b[i] ? 1 : 0;
    }
    return h;
}

PlantedInstance gen_planted_hamming(std::size_t n, std::size_t d, double c, std::size_t r, std::size_t queries,
                                    std::uint64_t seed) {
    if (n < 2 || d < 2 || r < 1 || !(c > 1.0) || queries > n) {
        throw Error("gen_planted_hamming needs n, d >= 2, r >= 1, c > 1 and queries <= n");
    }
    std::vector<std::vector<std::uint8_t>> bits(n, std::vector<std::uint8_t>(d));
    CounterRng base(seed, 3);
    for (auto& row : bits) {
        for (auto& b : row) {
            b = static_cast<std::uint8_t>(base() >> 63);
        }
    }
    PlantedInstance inst;
    inst.c = std::sqrt(c);
    inst.r = std::sqrt(static_cast<double>(r));
    inst.data = Dataset(d);
    for (const auto& row : bits) {
        inst.data.add(embed_hamming_to_l2(row));
    }
    inst.queries = Dataset(d);
    std::vector<char> used(n, 0);
    const double far = c * static_cast<double>(r);
    for (std::size_t j = 0; j < queries; ++j) {
        CounterRng rng(derive_seed(seed, {4, j}));
        bool placed = false;
        for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
            const auto pid = static_cast<std::uint32_t>(rng() % n);
            if (used[pid]) {
                continue;
            }
            std::vector<std::uint8_t> q = bits[pid];
            const std::size_t flips = 1 + rng() % r;
            std::vector<std::size_t> order(d);
            for (std::size_t k = 0; k < d; ++k) {
                order[k] = k;
            }
            for (std::size_t k = 0; k < flips; ++k) {
                std::swap(order[k], order[k + rng() % (d - k)]);
                q[order[k]] ^= 1u;
            }
            bool ok = true;
            for (std::size_t o = 0; o < n && ok; ++o) {
                ok = o == pid || static_cast<double>(hamming(q, bits[o])) >= far;
            }
            if (ok) {
                used[pid] = 1;
                inst.queries.add(embed_hamming_to_l2(q));
                inst.planted.push_back(pid);
                placed = true;
            }
        }
        if (!placed) {
            throw Error("could not plant hamming query " + std::to_string(j));
        }
    }
    return inst;
}

Neighbor brute_force_nn(const Dataset& data, ConstVec q) {
    if (data.empty()) {
        throw Error("nearest neighbour of an empty dataset");
    }
    Neighbor best{0, std::numeric_limits<double>::infinity()};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double d2 = distance_sq(q, data.point(i));
        if (d2 < best.distance) {
            best = Neighbor{static_cast<std::uint32_t>(i), d2};
        }
    }
    best.distance = std::sqrt(best.distance);
    return best;
}

double oracle_recall(const Dataset& data, const Dataset& queries, double c) {
    if (queries.empty()) {
        return 0.0;
    }
    std::size_t hits = 0;
    for (std::size_t j = 0; j < queries.size(); ++j) {
        hits += brute_force_nn(data, queries.point(j)).distance <= c ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(queries.size());
}

namespace {

template <typename Run>
QueryStats collect(const Dataset& data, const Dataset& queries, double c, unsigned threads, Run run) {
    QueryStats s;
    s.queries = queries.size();
    if (queries.empty()) {
        return s;
    }
    std::vector<QueryResult> results(queries.size());
    parallel_chunks(queries.size(), threads, [&](std::uint64_t begin, std::uint64_t end) {
        for (std::uint64_t j = begin; j < end; ++j) {
            results[j] = run(queries.point(j));
        }
    });
    std::vector<double> examined;
    double hits = 0;
    double non = 0;
    for (std::size_t j = 0; j < results.size(); ++j) {
        const QueryResult& r = results[j];
        if (r.answer) {
            if (*r.answer >= data.size() || distance(queries.point(j), data.point(*r.answer)) > c) {
                ++s.soundness_violations;
            } else {
                hits += 1;
            }
        }
        examined.push_back(static_cast<double>(r.points_examined));
        non += static_cast<double>(r.non_answers);
        s.max_non_answers = std::max(s.max_non_answers, r.non_answers);
        s.max_annuli_per_table = std::max(s.max_annuli_per_table, r.max_annuli_per_table);
    }
    const double q = static_cast<double>(queries.size());
    s.recall = hits / q;
    s.mean_non_answers = non / q;
    double total = 0.0;
    for (double e : examined) {
        total += e;
    }
    s.mean_examined = total / q;
    std::sort(examined.begin(), examined.end());
    const std::size_t m = examined.size();
    s.median_examined = m % 2 ? examined[m / 2] : 0.5 * (examined[m / 2 - 1] + examined[m / 2]);
    return s;
}

} // namespace

QueryStats evaluate(const TwoLevelIndex& index, const Dataset& data, const Dataset& queries, double c,
                    unsigned threads) {
    return collect(data, queries, c, threads, [&](ConstVec q) { return index.query(q); });
}

QueryStats evaluate(const ClassicIndex& index, const Dataset& data, const Dataset& queries, double c,
                    unsigned threads) {
    return collect(data, queries, c, threads, [&](ConstVec q) { return index.query(q); });
}

const Metric* Report::find(const std::string& name) const {
    for (const Metric& m : metrics) {
        if (m.name == name) {
            return &m;
        }
    }
    return nullptr;
}

namespace {

nlohmann::json estimate_json(const CollisionEstimate& e) {
    return {{"p_hat", e.p_hat},
            {"trials", e.trials},
            {"collisions", e.collisions},
            {"stderr", e.std_error},
            {"overflow_fraction", e.overflow_fraction()}};
}

} // namespace

nlohmann::json Report::to_json(bool with_timings) const {
    nlohmann::json j;
    j["schema"] = kSchema;
    j["title"] = title;
    j["metrics"] = nlohmann::json::array();
    for (const Metric& m : metrics) {
        if (m.timing && !with_timings) {
            continue;
        }
        nlohmann::json e{{"name", m.name}, {"value", m.value}, {"provenance", m.provenance}};
        if (m.trials) {
            e["trials"] = *m.trials;
        }
        if (m.std_error) {
            e["stderr"] = *m.std_error;
        }
        if (m.timing) {
            e["timing"] = true;
        }
        j["metrics"].push_back(e);
    }
    j["rho"] = nlohmann::json::array();
    for (const RhoEntry& r : rho) {
        nlohmann::json e{{"family", r.family},
                         {"d1", r.d1},
                         {"d2", r.d2},
                         {"p1", estimate_json(r.p1)},
                         {"p2", estimate_json(r.p2)},
                         {"rho", r.rho},
                         {"rho_stderr", r.rho_std_error},
                         {"status", r.status}};
        if (r.predicted) {
            e["predicted"] = *r.predicted;
        }
        j["rho"].push_back(e);
    }
    return j;
}

std::string Report::to_text() const {
    std::ostringstream os;
    os << "# " << title << " (" << kSchema << ")\n";
    os << std::setprecision(6);
    for (const Metric& m : metrics) {
        os << m.name << " = " << m.value;
        if (m.std_error) {
            os << " +- " << *m.std_error;
        }
        if (m.trials) {
            os << " (" << *m.trials << " trials)";
        }
        os << " [" << m.provenance << "]\n";
    }
    for (const RhoEntry& r : rho) {
        os << "rho " << r.family << " at (" << r.d1 << ", " << r.d2 << "): p1 = " << r.p1.p_hat << " +- "
           << r.p1.std_error << ", p2 = " << r.p2.p_hat << " +- " << r.p2.std_error << ", rho = " << r.rho
           << " +- " << r.rho_std_error << " [" << r.status << "]";
        if (r.predicted) {
            os << " predicted " << *r.predicted;
        }
        os << " (" << r.p1.trials << " trials)\n";
    }
    return os.str();
}

void Report::write(const std::string& path) const {
    std::ofstream js(path);
    js << to_json().dump(2) << '\n';
    std::ofstream txt(path + ".txt");
    txt << to_text();
    if (!js || !txt) {
        throw Error("cannot write report to " + path);
    }
}

TwoLevelParams BenchmarkConfig::index_params() const {
    TwoLevelParams p;
    p.c = c;
    p.tau = tau;
    p.variant = variant;
    p.param_mode = param_mode;
    p.tables_override = tables;
    p.q_trials = trials;
    p.seed = seed;
    p.jl = jl;
    p.threads = threads;
    return p;
}

Report run_recall(const BenchmarkConfig& config) {
    Report rep;
    rep.title = "recall benchmark";
    const auto t0 = std::chrono::steady_clock::now();
    const PlantedInstance inst = gen_planted(config.n, config.d, config.c, config.queries, config.seed);
    rep.add("instance.n", static_cast<double>(config.n));
    rep.add("instance.d", static_cast<double>(config.d));
    rep.add("instance.c", config.c);
    rep.add("instance.queries", static_cast<double>(config.queries));
    rep.add_timing("time.generate_s", seconds_since(t0));
    rep.add("oracle.recall", oracle_recall(inst.data, inst.queries, config.c));
    rep.add("bound.success_floor", 1.0 - 1.0 / 3.0 - std::exp(-1.0), "formula");
    rep.add("bound.rho_two_level", rho_two_level(config.tau, config.c), "formula");

    const TwoLevelParams params = config.index_params();
    const auto t1 = std::chrono::steady_clock::now();
    const Plan plan = make_plan(inst.data, params);
    rep.add_timing("time.plan_s", seconds_since(t1));
    rep.add("two_level.k", static_cast<double>(plan.k));
    rep.add("two_level.T", static_cast<double>(plan.T));
    rep.add("two_level.outer_t", static_cast<double>(plan.outer.t));
    rep.add("two_level.outer_ratio", plan.outer_ratio);
    if (plan.p_near.trials > 0) {
        rep.add_estimate("two_level.p_near", plan.p_near.p_hat, plan.p_near.trials, plan.p_near.std_error);
        rep.add_estimate("two_level.p_sep", plan.p_sep.p_hat, plan.p_sep.trials, plan.p_sep.std_error);
        rep.add_estimate("two_level.p_far", plan.p_far.p_hat, plan.p_far.trials, plan.p_far.std_error);
    }
    for (std::size_t l = 0; l < plan.k_tilde.size(); ++l) {
        rep.add("two_level.k_tilde." + std::to_string(l), static_cast<double>(plan.k_tilde[l]));
    }
    if (plan.Q) {
        rep.add_estimate("two_level.Q", *plan.Q, config.trials, std::nullopt);
    }
    rep.add("two_level.tables", static_cast<double>(plan.tables));

    if (plan.tables <= params.max_tables) {
        const auto t2 = std::chrono::steady_clock::now();
        const TwoLevelIndex index = TwoLevelIndex::build(inst.data, params, plan);
        rep.add_timing("time.build_s", seconds_since(t2));
        const auto t3 = std::chrono::steady_clock::now();
        const QueryStats s = evaluate(index, inst.data, inst.queries, config.c, config.threads);
        rep.add_timing("time.query_s", seconds_since(t3));
        rep.add("two_level.recall", s.recall);
        rep.add("two_level.mean_examined", s.mean_examined);
        rep.add("two_level.median_examined", s.median_examined);
        rep.add("two_level.mean_non_answers", s.mean_non_answers);
        rep.add("two_level.stop_budget", static_cast<double>(index.stop_budget()));
        rep.add("two_level.soundness_violations", static_cast<double>(s.soundness_violations));
    } else {
        rep.add("two_level.infeasible", 1.0);
    }

    if (config.classic) {
        const auto t4 = std::chrono::steady_clock::now();
        const ClassicPlan cp = classic_plan(config.n, config.d, config.c, plan.outer, params.calibration_trials,
                                            derive_seed(config.seed, {0xC0ull}), config.threads);
        rep.add("classic.k", static_cast<double>(cp.k));
        rep.add("classic.tables", static_cast<double>(cp.R));
        if (cp.R <= params.max_tables) {
            const ClassicIndex ci = ClassicIndex::build(inst.data, config.c, plan.outer, cp.k, cp.R,
                                                        derive_seed(config.seed, {0xC1ull}), config.threads);
            const QueryStats s = evaluate(ci, inst.data, inst.queries, config.c, config.threads);
            rep.add_timing("time.classic_s", seconds_since(t4));
            rep.add("classic.recall", s.recall);
            rep.add("classic.mean_examined", s.mean_examined);
            rep.add("classic.median_examined", s.median_examined);
            rep.add("classic.soundness_violations", static_cast<double>(s.soundness_violations));
        } else {
            rep.add("classic.infeasible", 1.0);
        }
    }
    rep.add_timing("time.total_s", seconds_since(t0));
    return rep;
}

RhoEntry rho_entry(std::string family, double d1, double d2, const CollisionEstimate& p1,
                   const CollisionEstimate& p2) {
    RhoEntry e;
    e.family = std::move(family);
    e.d1 = d1;
    e.d2 = d2;
    e.p1 = p1;
    e.p2 = p2;
    const double a = p1.p_hat;
    const double b = p2.p_hat;
    if (!(a > 0.0 && a < 1.0) || !(a > b)) {
        e.status = "degenerate";
        e.rho = std::numeric_limits<double>::quiet_NaN();
        return e;
    }
    if (b == 0.0) {
        // Only ln(1/p2) >= ln(1/upper) is known, so rho is bounded above.
        e.status = "lower_bound_only";
        e.rho = std::log(a) / std::log(p2.upper(3.0));
        return e;
    }
    const double la = std::log(a);
    const double lb = std::log(b);
    e.rho = la / lb;
    const double g1 = 1.0 / (a * lb);
    const double g2 = -la / (b * lb * lb);
    e.rho_std_error = std::hypot(g1 * p1.std_error, g2 * p2.std_error);
    return e;
}

RhoEntry estimate_rho_report(const FamilySpec& family, double c, std::size_t d, std::uint64_t trials,
                             std::uint64_t seed, unsigned threads) {
    if (!(c > 1.0)) {
        throw Error("rho report needs c > 1");
    }
    if (family.kind == "spherical") {
        SphericalParams p = SphericalParams::make(family.eta, c, d);
        p.epsilon = family.epsilon;
        p.validate();
        const SphericalFamily fam(p);
        const double R = p.radius();
        auto pair_at = [&](double chord, std::uint64_t tag) {
            const double a = chord_angle(chord, R);
            std::vector<double> u(d, 0.0);
            std::vector<double> v(d, 0.0);
            u[0] = R;
            v[0] = R * std::cos(a);
            v[1] = R * std::sin(a);
            return estimate_collision(fam, u, v, trials, derive_seed(seed, {tag}), threads);
        };
        RhoEntry e = rho_entry(fam.describe(), 1.0, c, pair_at(1.0, 1), pair_at(c, 2));
        e.predicted = predicted_rho(p.eta, c);
        return e;
    }
    if (family.kind == "ball_carving") {
        BallCarvingParams p = BallCarvingParams::for_t(family.t ? family.t : 4);
        if (family.w > 0.0) {
            p.w = family.w;
        }
        return rho_entry(BallCarvingFamily(p, d).describe(), 1.0, c,
                         outer_collision(p, d, 1.0, trials, derive_seed(seed, {1}), threads),
                         outer_collision(p, d, c, trials, derive_seed(seed, {2}), threads));
    }
    throw Error("unknown family '" + family.kind + "'");
}

MinhashResult minhash_demo(std::size_t s, std::size_t overlap, std::uint64_t trials, std::uint64_t seed) {
    if (overlap > s) {
        throw Error("overlap cannot exceed the set size");
    }
    if (s == 0 || trials == 0) {
        throw Error("minhash demo needs s >= 1 and trials >= 1");
    }
    // p = {0..s-1}, q = {s-overlap .. 2s-overlap-1}.
    const std::size_t universe = 2 * s - overlap;
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < trials; ++i) {
        CounterRng rng(seed, i);
        std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
        std::size_t arg = 0;
        for (std::size_t x = 0; x < universe; ++x) {
            const std::uint64_t rank = rng();
            if (rank < best) {
                best = rank;
                arg = x;
            }
        }
        // Both sets share the minimum exactly when the union's minimum lies in the intersection.
        hits += (arg >= s - overlap && arg < s) ? 1 : 0;
    }
    MinhashResult r;
    r.s = s;
    r.overlap = overlap;
    r.estimate = make_estimate(hits, trials);
    r.jaccard = static_cast<double>(overlap) / static_cast<double>(universe);
    const double x = static_cast<double>(2 * (s - overlap)) / (2.0 * static_cast<double>(s));
    r.formula = (1.0 - x) / (1.0 + x);
    return r;
}

double jl_norm_fraction(const JlMap& map, const Dataset& rows, double eps) {
    if (rows.empty()) {
        return 1.0;
    }
    std::size_t ok = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double before = norm(rows.point(i));
        const double after = norm(map.apply(rows.point(i)));
        if (before == 0.0 ? after == 0.0 : std::abs(after / before - 1.0) <= eps) {
            ++ok;
        }
    }
    return static_cast<double>(ok) / static_cast<double>(rows.size());
}

} // namespace dalsh
