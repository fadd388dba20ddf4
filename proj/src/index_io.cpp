#include <algorithm>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dalsh/random.hpp"
#include "dalsh/two_level.hpp"
#include "internal.hpp"

namespace dalsh {

namespace {

constexpr char kMagic[8] = {'D', 'A', 'L', 'S', 'H', 'I', 'X', '\0'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    template <typename T>
    void pod(const T& v) {
        out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    void u64(std::size_t v) { pod<std::uint64_t>(v); }
    void f64(double v) { pod(v); }
    void flag(bool v) { pod<std::uint8_t>(v ? 1 : 0); }
    void opt(const std::optional<std::size_t>& v) {
        flag(v.has_value());
        u64(v.value_or(0));
    }
    void doubles(std::span<const double> xs) {
        u64(xs.size());
        out_.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size_bytes()));
    }
    void ids(const std::vector<std::uint32_t>& xs) {
        u64(xs.size());
        out_.write(reinterpret_cast<const char*>(xs.data()), static_cast<std::streamsize>(xs.size() * 4));
    }
    void sizes(const std::vector<std::size_t>& xs) {
        u64(xs.size());
        for (std::size_t x : xs) {
            u64(x);
        }
    }

private:
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    template <typename T>
    T pod() {
        T v{};
        in_.read(reinterpret_cast<char*>(&v), sizeof(T));
        if (!in_) {
            throw Error("index file is truncated");
        }
        return v;
    }
    std::size_t u64() { return static_cast<std::size_t>(pod<std::uint64_t>()); }
    double f64() { return pod<double>(); }
    bool flag() { return pod<std::uint8_t>() != 0; }
    std::optional<std::size_t> opt() {
        const bool has = flag();
        const std::size_t v = u64();
        return has ? std::optional<std::size_t>(v) : std::nullopt;
    }
    std::size_t length(std::size_t elem) {
        const std::size_t n = u64();
        if (n > (std::size_t{1} << 40) / elem) {
            throw Error("index file has an implausible length field");
        }
        return n;
    }
    std::vector<double> doubles() {
        std::vector<double> xs(length(8));
        in_.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * 8));
        if (!in_) {
            throw Error("index file is truncated");
        }
        return xs;
    }
    std::vector<std::uint32_t> ids() {
        std::vector<std::uint32_t> xs(length(4));
        in_.read(reinterpret_cast<char*>(xs.data()), static_cast<std::streamsize>(xs.size() * 4));
        if (!in_) {
            throw Error("index file is truncated");
        }
        return xs;
    }
    std::vector<std::size_t> sizes() {
        std::vector<std::size_t> xs(length(8));
        for (auto& x : xs) {
            x = u64();
        }
        return xs;
    }

private:
    std::istream& in_;
};

void put(Writer& w, const BallCarvingParams& p) {
    w.u64(p.t);
    w.f64(p.w);
    w.u64(p.max_grids);
    w.f64(p.A);
    w.f64(p.epsilon);
}

BallCarvingParams get_outer(Reader& r) {
    BallCarvingParams p;
    p.t = r.u64();
    p.w = r.f64();
    p.max_grids = r.u64();
    p.A = r.f64();
    p.epsilon = r.f64();
    return p;
}

void put(Writer& w, const CollisionEstimate& e) {
    w.f64(e.p_hat);
    w.u64(e.trials);
    w.u64(e.collisions);
    w.u64(e.overflow_collisions);
    w.f64(e.std_error);
}

CollisionEstimate get_estimate(Reader& r) {
    CollisionEstimate e;
    e.p_hat = r.f64();
    e.trials = r.u64();
    e.collisions = r.u64();
    e.overflow_collisions = r.u64();
    e.std_error = r.f64();
    return e;
}

template <typename Map>
std::vector<KeyDigest> sorted_keys(const Map& m) {
    std::vector<KeyDigest> keys;
    keys.reserve(m.size());
    for (const auto& kv : m) {
        keys.push_back(kv.first);
    }
    std::sort(keys.begin(), keys.end());
    return keys;
}

} // namespace

void TwoLevelIndex::save(std::ostream& out) const {
    Writer w(out);
    out.write(kMagic, sizeof kMagic);
    w.pod(kVersion);

    const TwoLevelParams& p = params_;
    w.f64(p.c);
    w.f64(p.tau);
    w.f64(p.delta_meb);
    w.pod<std::uint8_t>(p.param_mode == ParamMode::Analytic ? 0 : 1);
    w.pod<std::uint8_t>(p.variant == Variant::Meb ? 0 : 1);
    w.f64(p.r);
    w.flag(p.jl);
    w.f64(p.epsilon_jl);
    w.f64(p.jl_constant);
    w.pod(p.seed);
    w.opt(p.tables_override);
    w.opt(p.k_override);
    w.opt(p.k_tilde_override);
    put(w, p.outer);
    w.u64(p.inner_max_parts);
    w.f64(p.inner_epsilon);
    w.u64(p.calibration_trials);
    w.u64(p.q_trials);
    w.u64(p.max_tables);
    w.pod<std::uint32_t>(p.threads);

    const Plan& q = plan_;
    w.u64(q.n);
    w.u64(q.dim);
    w.f64(q.c_work);
    put(w, q.outer);
    w.u64(q.k);
    w.u64(q.T);
    w.sizes(q.k_tilde);
    w.doubles(q.p2_worst);
    w.f64(q.outer_ratio);
    w.f64(q.outer_far_pow_k);
    put(w, q.p_near);
    put(w, q.p_sep);
    put(w, q.p_far);
    w.u64(q.tables);
    w.flag(q.Q.has_value());
    w.f64(q.Q.value_or(0.0));
    w.u64(q.jl_dim);

    w.u64(data_.dim());
    w.doubles(data_.raw());

    w.u64(tables_.size());
    for (const Table& t : tables_) {
        w.pod(t.seed);
        w.u64(t.buckets.size());
        for (const KeyDigest& key : sorted_keys(t.buckets)) {
            const OuterBucket& b = t.buckets.at(key);
            w.pod(key.hi);
            w.pod(key.lo);
            w.ids(b.members);
            w.doubles(b.center.coords());
            w.pod(b.pivot);
            w.u64(b.annuli.size());
            for (const Annulus& a : b.annuli) {
                w.pod(a.l);
                w.pod(a.k_tilde);
                w.pod(a.seed);
                w.u64(a.buckets.size());
                for (const KeyDigest& ak : sorted_keys(a.buckets)) {
                    w.pod(ak.hi);
                    w.pod(ak.lo);
                    w.ids(a.buckets.at(ak));
                }
            }
        }
    }
    if (!out) {
        throw Error("failed to write index");
    }
}

TwoLevelIndex TwoLevelIndex::load(std::istream& in) {
    char magic[sizeof kMagic];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
        throw Error("not an index file");
    }
    Reader r(in);
    const auto version = r.pod<std::uint32_t>();
    if (version != kVersion) {
        throw Error("unsupported index version " + std::to_string(version));
    }
    TwoLevelIndex index;
    TwoLevelParams& p = index.params_;
    p.c = r.f64();
    p.tau = r.f64();
    p.delta_meb = r.f64();
    p.param_mode = r.pod<std::uint8_t>() == 0 ? ParamMode::Analytic : ParamMode::Empirical;
    p.variant = r.pod<std::uint8_t>() == 0 ? Variant::Meb : Variant::Pivot;
    p.r = r.f64();
    p.jl = r.flag();
    p.epsilon_jl = r.f64();
    p.jl_constant = r.f64();
    p.seed = r.pod<std::uint64_t>();
    p.tables_override = r.opt();
    p.k_override = r.opt();
    p.k_tilde_override = r.opt();
    p.outer = get_outer(r);
    p.inner_max_parts = r.u64();
    p.inner_epsilon = r.f64();
    p.calibration_trials = r.u64();
    p.q_trials = r.u64();
    p.max_tables = r.u64();
    p.threads = r.pod<std::uint32_t>();
    p.validate();

    Plan& q = index.plan_;
    q.n = r.u64();
    q.dim = r.u64();
    q.c_work = r.f64();
    q.outer = get_outer(r);
    q.k = r.u64();
    q.T = r.u64();
    q.k_tilde = r.sizes();
    q.p2_worst = r.doubles();
    q.outer_ratio = r.f64();
    q.outer_far_pow_k = r.f64();
    q.p_near = get_estimate(r);
    q.p_sep = get_estimate(r);
    q.p_far = get_estimate(r);
    q.tables = r.u64();
    const bool has_q = r.flag();
    const double Q = r.f64();
    if (has_q) {
        q.Q = Q;
    }
    q.jl_dim = r.u64();

    const std::size_t dim = r.u64();
    index.data_ = Dataset(dim, r.doubles());
    if (q.jl_dim > 0) {
        index.jl_.emplace(dim, q.jl_dim, derive_seed(p.seed, {0x1Aull}));
        index.mapped_ = index.jl_->apply(index.data_);
    }

    const std::size_t tables = r.u64();
    index.tables_.resize(tables);
    for (Table& t : index.tables_) {
        t.seed = r.pod<std::uint64_t>();
        t.outer = detail::outer_function(q, derive_seed(t.seed, {0x0Bull}));
        const std::size_t nb = r.u64();
        for (std::size_t i = 0; i < nb; ++i) {
            KeyDigest key;
            key.hi = r.pod<std::uint64_t>();
            key.lo = r.pod<std::uint64_t>();
            OuterBucket b;
            b.members = r.ids();
            std::vector<double> center = r.doubles();
            if (!center.empty()) {
                b.center = Point(std::move(center));
            }
            b.pivot = r.pod<std::uint32_t>();
            const std::size_t na = r.u64();
            for (std::size_t j = 0; j < na; ++j) {
                Annulus a;
                a.l = r.pod<std::uint32_t>();
                a.k_tilde = r.pod<std::uint32_t>();
                a.seed = r.pod<std::uint64_t>();
                const std::size_t nk = r.u64();
                for (std::size_t m = 0; m < nk; ++m) {
                    KeyDigest ak;
                    ak.hi = r.pod<std::uint64_t>();
                    ak.lo = r.pod<std::uint64_t>();
                    a.buckets.emplace(ak, r.ids());
                }
                b.annuli.push_back(std::move(a));
            }
            t.buckets.emplace(key, std::move(b));
        }
    }
    return index;
}

void TwoLevelIndex::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot open " + path + " for writing");
    }
    save(out);
}

TwoLevelIndex TwoLevelIndex::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    return load(in);
}

} // namespace dalsh
