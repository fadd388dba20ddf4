// Command line front end: gen, build, query, bench, rho, demo-minhash.

#include <cmath>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dalsh/harness.hpp"
#include "dalsh/two_level.hpp"

namespace {

struct IndexFlags {
    double c = 2.0;
    double tau = 1.4142135623730951;
    double r = 1.0;
    std::string variant = "meb";
    std::string param_mode = "empirical";
    std::size_t tables = 0;
    std::uint64_t trials = 200;
    std::uint64_t seed = 1;
    std::string jl = "off";
    unsigned threads = 1;

    void attach(CLI::App* app) {
        app->add_option("--c", c, "approximation factor")->check(CLI::PositiveNumber);
        app->add_option("--tau", tau, "pruning factor");
        app->add_option("--r", r, "near radius");
        app->add_option("--variant", variant)->check(CLI::IsMember({"meb", "pivot"}));
        app->add_option("--param-mode", param_mode)->check(CLI::IsMember({"analytic", "empirical"}));
        app->add_option("--tables", tables, "table count (0: from the estimated Q)");
        app->add_option("--trials", trials, "Monte-Carlo trials");
        app->add_option("--seed", seed);
        app->add_option("--jl", jl)->check(CLI::IsMember({"on", "off"}));
        app->add_option("--threads", threads);
    }

    dalsh::TwoLevelParams params() const {
        dalsh::TwoLevelParams p;
        p.c = c;
        p.tau = tau;
        p.r = r;
        p.variant = dalsh::parse_variant(variant);
        p.param_mode = dalsh::parse_param_mode(param_mode);
        if (tables > 0) {
            p.tables_override = tables;
        }
        p.q_trials = trials;
        p.seed = seed;
        p.jl = jl == "on";
        p.threads = threads;
        return p;
    }
};

void print_plan(const dalsh::Plan& plan) {
    std::cout << "outer t=" << plan.outer.t << " w=" << plan.outer.w << " k=" << plan.k << " T=" << plan.T
              << " tables=" << plan.tables;
    if (plan.Q) {
        std::cout << " Q=" << *plan.Q;
    }
    std::cout << "\nk_tilde:";
    for (std::size_t k : plan.k_tilde) {
        std::cout << ' ' << k;
    }
    std::cout << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Data-aware two-level LSH for approximate near neighbours"};
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.set_config("--config", "", "key = value configuration file");
    app.require_subcommand(1);

    // gen
    auto* gen = app.add_subcommand("gen", "planted instance -> fvecs + ground-truth ivecs");
    std::size_t n = 10000;
    std::size_t d = 64;
    std::size_t queries = 1000;
    double c = 2.0;
    std::uint64_t seed = 1;
    std::size_t hamming_r = 0;
    std::string prefix = "planted";
    gen->add_option("--n", n);
    gen->add_option("--d", d);
    gen->add_option("--c", c);
    gen->add_option("--queries", queries);
    gen->add_option("--seed", seed);
    gen->add_option("--hamming-r", hamming_r, "generate a (c, r)-Hamming instance embedded into l2");
    gen->add_option("--out", prefix, "output prefix");

    // build
    auto* build = app.add_subcommand("build", "dataset -> index file");
    IndexFlags build_flags;
    build_flags.attach(build);
    std::string data_path;
    std::string index_path = "index.bin";
    build->add_option("--data", data_path)->required();
    build->add_option("--out", index_path);

    // query
    auto* query = app.add_subcommand("query", "index + queries -> answers");
    std::string query_index;
    std::string query_path;
    std::string answers_path = "answers.ivecs";
    query->add_option("--index", query_index)->required();
    query->add_option("--queries", query_path)->required();
    query->add_option("--out", answers_path);

    // bench
    auto* bench = app.add_subcommand("bench", "recall benchmark -> report");
    IndexFlags bench_flags;
    bench_flags.attach(bench);
    dalsh::BenchmarkConfig cfg;
    std::string report_path = "report.json";
    bench->add_option("--n", cfg.n);
    bench->add_option("--d", cfg.d);
    bench->add_option("--queries", cfg.queries);
    bench->add_option("--out", report_path);

    // rho
    auto* rho = app.add_subcommand("rho", "empirical exponent of a family");
    dalsh::FamilySpec family;
    double rho_c = 2.0;
    std::size_t rho_d = 128;
    std::uint64_t rho_trials = 10000;
    std::uint64_t rho_seed = 1;
    std::string rho_out;
    rho->add_option("--family", family.kind)->check(CLI::IsMember({"spherical", "ball_carving"}));
    rho->add_option("--eta", family.eta);
    rho->add_option("--t", family.t);
    rho->add_option("--w", family.w);
    rho->add_option("--c", rho_c);
    rho->add_option("--d", rho_d);
    rho->add_option("--trials", rho_trials);
    rho->add_option("--seed", rho_seed);
    rho->add_option("--out", rho_out);

    // demo-minhash
    auto* minhash = app.add_subcommand("demo-minhash", "min-hash collision frequency versus Jaccard");
    std::size_t s = 3;
    std::size_t overlap = 2;
    std::uint64_t mh_trials = 100000;
    std::uint64_t mh_seed = 1;
    minhash->add_option("--s", s);
    minhash->add_option("--overlap", overlap);
    minhash->add_option("--trials", mh_trials);
    minhash->add_option("--seed", mh_seed);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            dalsh::PlantedInstance inst = hamming_r > 0
                                              ? dalsh::gen_planted_hamming(n, d, c, hamming_r, queries, seed)
                                              : dalsh::gen_planted(n, d, c, queries, seed);
            dalsh::write_fvecs(prefix + ".base.fvecs", inst.data);
            dalsh::write_fvecs(prefix + ".query.fvecs", inst.queries);
            std::vector<std::vector<std::int32_t>> gt;
            for (auto id : inst.planted) {
                gt.push_back({static_cast<std::int32_t>(id)});
            }
            dalsh::write_ivecs(prefix + ".gt.ivecs", gt);
            std::cout << "wrote " << inst.data.size() << " points, " << inst.queries.size()
                      << " queries; near radius r=" << inst.r << ", approximation c=" << inst.c << '\n';
        } else if (*build) {
            const dalsh::Dataset data = dalsh::read_fvecs(data_path);
            const dalsh::TwoLevelParams params = build_flags.params();
            const dalsh::Plan plan = dalsh::make_plan(data, params);
            print_plan(plan);
            dalsh::TwoLevelIndex::build(data, params, plan).save(index_path);
            std::cout << "saved " << index_path << '\n';
        } else if (*query) {
            const dalsh::TwoLevelIndex index = dalsh::TwoLevelIndex::load(query_index);
            const dalsh::Dataset qs = dalsh::read_fvecs(query_path);
            std::vector<std::vector<std::int32_t>> out;
            std::size_t answered = 0;
            for (std::size_t j = 0; j < qs.size(); ++j) {
                const dalsh::QueryResult r = index.query(qs.point(j));
                out.push_back({r.answer ? static_cast<std::int32_t>(*r.answer) : -1});
                answered += r.answer ? 1 : 0;
            }
            dalsh::write_ivecs(answers_path, out);
            std::cout << answered << " of " << qs.size() << " queries answered\n";
        } else if (*bench) {
            const dalsh::TwoLevelParams p = bench_flags.params();
            cfg.c = p.c;
            cfg.tau = p.tau;
            cfg.variant = p.variant;
            cfg.param_mode = p.param_mode;
            cfg.tables = p.tables_override;
            cfg.trials = p.q_trials;
            cfg.seed = p.seed;
            cfg.jl = p.jl;
            cfg.threads = p.threads;
            const dalsh::Report rep = dalsh::run_recall(cfg);
            rep.write(report_path);
            std::cout << rep.to_text();
        } else if (*rho) {
            dalsh::Report rep;
            rep.title = "rho report";
            rep.rho.push_back(dalsh::estimate_rho_report(family, rho_c, rho_d, rho_trials, rho_seed));
            if (!rho_out.empty()) {
                rep.write(rho_out);
            }
            std::cout << rep.to_text();
        } else if (*minhash) {
            const dalsh::MinhashResult r = dalsh::minhash_demo(s, overlap, mh_trials, mh_seed);
            std::cout << "s=" << r.s << " overlap=" << r.overlap << " collision=" << r.estimate.p_hat << " +- "
                      << r.estimate.std_error << " jaccard=" << r.jaccard << " (1-x)/(1+x)=" << r.formula << '\n';
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
