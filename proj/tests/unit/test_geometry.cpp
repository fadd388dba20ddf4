#include <cmath>
#include <vector>

#include <doctest.h>

#include "dalsh/geometry.hpp"
#include "dalsh/random.hpp"

using namespace dalsh;

namespace {

Point gaussian_point(CounterRng& rng, std::size_t d, double scale = 1.0) {
    std::vector<double> v(d);
    for (double& x : v) {
        x = scale * rng.normal();
    }
    return Point(std::move(v));
}

double loop_distance(const Point& u, const Point& v) {
    long double s = 0.0L;
    for (std::size_t i = 0; i < u.dim(); ++i) {
        const long double diff = static_cast<long double>(u[i]) - v[i];
        s += diff * diff;
    }
    return static_cast<double>(std::sqrt(s));
}

// Circumcenter of the points within their affine hull, or false if degenerate.
bool circumcenter(const std::vector<Point>& pts, std::vector<double>& center) {
    const std::size_t d = pts[0].dim();
    const std::size_t m = pts.size() - 1;
    std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < d; ++k) {
                s += (pts[i + 1][k] - pts[0][k]) * (pts[j + 1][k] - pts[0][k]);
            }
            a[i][j] = 2.0 * s;
        }
        double s = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            const double e = pts[i + 1][k] - pts[0][k];
            s += e * e;
        }
        a[i][m] = s;
    }
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < m; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) {
                piv = r;
            }
        }
        if (std::abs(a[piv][col]) < 1e-12) {
            return false;
        }
        std::swap(a[col], a[piv]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r != col) {
                const double f = a[r][col] / a[col][col];
                for (std::size_t k = col; k <= m; ++k) {
                    a[r][k] -= f * a[col][k];
                }
            }
        }
    }
    center.assign(pts[0].coords().begin(), pts[0].coords().end());
    for (std::size_t i = 0; i < m; ++i) {
        const double lambda = a[i][m] / a[i][i];
        for (std::size_t k = 0; k < d; ++k) {
            center[k] += lambda * (pts[i + 1][k] - pts[0][k]);
        }
    }
    return true;
}

// Exact MEB radius: the optimum is the circumball of at most d + 1 points.
double exact_meb_radius(const std::vector<Point>& pts) {
    const std::size_t n = pts.size();
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const std::vector<Point>& subset) {
        std::vector<double> c;
        if (!circumcenter(subset, c)) {
            return;
        }
        double r = 0.0;
        for (const Point& p : pts) {
            r = std::max(r, distance(c, p));
        }
        best = std::min(best, r);
    };
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            consider({pts[i], pts[j]});
            for (std::size_t k = j + 1; k < n; ++k) {
                consider({pts[i], pts[j], pts[k]});
                for (std::size_t l = k + 1; l < n; ++l) {
                    consider({pts[i], pts[j], pts[k], pts[l]});
                }
            }
        }
    }
    return best;
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("point rejects non-finite coordinates") {
    CHECK_THROWS_AS(Point({1.0, std::nan("")}), Error);
    CHECK_THROWS_AS(Point({INFINITY}), Error);
}

TEST_CASE("distance examples") {
    CHECK(distance(Point{0, 0}, Point{3, 4}) == 5.0);
    CHECK(distance(Point{1, 1}, Point{1, 1}) == 0.0);
    CHECK_THROWS_AS(distance(Point{1, 2}, Point{1, 2, 3}), Error);

    CounterRng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Point u = gaussian_point(rng, 8);
        const Point v = gaussian_point(rng, 8);
        CHECK(distance(u, v) == doctest::Approx(loop_distance(u, v)).epsilon(1e-14));
        CHECK(distance(u, v) == distance(v, u));
    }
}

TEST_CASE("triangle inequality on random triples") {
    CounterRng rng(12);
    for (int i = 0; i < 1000; ++i) {
        const Point a = gaussian_point(rng, 5);
        const Point b = gaussian_point(rng, 5);
        const Point c = gaussian_point(rng, 5);
        CHECK(distance(a, c) <= distance(a, b) + distance(b, c) + 1e-9);
    }
}

TEST_CASE("normalize_to_radius") {
    const Point r = normalize_to_radius(Point{3, 4}, 10.0);
    CHECK(r[0] == doctest::Approx(6.0).epsilon(1e-15));
    CHECK(r[1] == doctest::Approx(8.0).epsilon(1e-15));
    CHECK(normalize_to_radius(Point{1, 0}, 1.0) == Point{1, 0});
    CHECK_THROWS_AS(normalize_to_radius(Point{0, 0}, 1.0), Error);

    CounterRng rng(13);
    for (int i = 0; i < 100; ++i) {
        const Point x = gaussian_point(rng, 17, 5.0);
        CHECK(std::abs(norm(normalize_to_radius(x, 2.5)) / 2.5 - 1.0) <= 1e-12);
    }
}

TEST_CASE("normalized_distance_sq identity") {
    CHECK(normalized_distance_sq(Point{3, 0}, Point{0, 4}) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(normalized_distance_sq(Point{1, 2, 3}, Point{1, 2, 3}) == doctest::Approx(0.0));
    CHECK_THROWS_AS(normalized_distance_sq(Point{0, 0}, Point{1, 0}), Error);

    CounterRng rng(14);
    double worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Point u = gaussian_point(rng, 16, 1.0 + rng.uniform() * 4.0);
        const Point v = gaussian_point(rng, 16, 1.0 + rng.uniform() * 4.0);
        const double lhs = distance_sq(scale(u, 1.0 / norm(u)), scale(v, 1.0 / norm(v)));
        worst = std::max(worst, std::abs(normalized_distance_sq(u, v) - lhs) / lhs);
    }
    CHECK(worst <= 1e-9);
}

TEST_CASE("smallest enclosing ball: degenerate inputs") {
    const std::vector<Point> one{Point{1, 2, 3}};
    const Ball b1 = smallest_enclosing_ball(std::span<const Point>(one));
    CHECK(b1.center == one[0]);
    CHECK(b1.radius == 0.0);

    const std::vector<Point> two{Point{0, 0}, Point{2, 0}};
    const Ball b2 = smallest_enclosing_ball(std::span<const Point>(two), 0.01);
    CHECK(b2.radius <= 1.0 * 1.01);
    CHECK(b2.radius >= 1.0);
    CHECK(distance(b2.center, Point{1, 0}) <= 0.15);

    CHECK_THROWS_AS(smallest_enclosing_ball(std::span<const Point>()), Error);
    CHECK_THROWS_AS(smallest_enclosing_ball(std::span<const Point>(two), 0.0), Error);
    CHECK_THROWS_AS(smallest_enclosing_ball(std::span<const Point>(two), 0.6), Error);
}

TEST_CASE("smallest enclosing ball versus exhaustive circumball oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CounterRng rng(100 + seed);
        std::vector<Point> pts;
        for (int i = 0; i < 20; ++i) {
            pts.push_back(gaussian_point(rng, 3));
        }
        const double exact = exact_meb_radius(pts);
        const Ball b = smallest_enclosing_ball(std::span<const Point>(pts), 0.01);
        CHECK(b.radius <= exact * 1.01);
        CHECK(b.radius >= exact * (1.0 - 1e-9));
        for (const Point& p : pts) {
            CHECK(distance(b.center, p) <= b.radius * 1.01);
        }
    }
}

TEST_CASE("jung bound and meb consistency") {
    CHECK(jung_radius_bound(0.0) == 0.0);
    CHECK(jung_radius_bound(std::sqrt(2.0)) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK_THROWS_AS(jung_radius_bound(-1.0), Error);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        CounterRng rng(200 + seed);
        const std::size_t d = 2 + seed % 10;
        std::vector<Point> pts;
        for (int i = 0; i < 15; ++i) {
            pts.push_back(gaussian_point(rng, d));
        }
        std::vector<ConstVec> views(pts.begin(), pts.end());
        const Ball b = smallest_enclosing_ball(std::span<const Point>(pts), 0.01);
        CHECK(b.radius <= 1.01 * jung_radius_bound(diameter(views)) + 1e-12);
    }
}

TEST_CASE("jl map: linearity, determinism, zero") {
    const JlMap a = sample_jl(20, 7, 5);
    const JlMap b = sample_jl(20, 7, 5);
    CounterRng rng(15);
    const Point x = gaussian_point(rng, 20);
    const Point y = gaussian_point(rng, 20);
    CHECK(a.apply(x) == b.apply(x));
    CHECK(norm(a.apply(Point::zeros(20))) == 0.0);
    std::vector<double> comb(20);
    for (std::size_t i = 0; i < 20; ++i) {
        comb[i] = 2.0 * x[i] - 3.0 * y[i];
    }
    const Point lhs = a.apply(comb);
    const Point ax = a.apply(x);
    const Point ay = a.apply(y);
    for (std::size_t i = 0; i < 7; ++i) {
        CHECK(lhs[i] == doctest::Approx(2.0 * ax[i] - 3.0 * ay[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(a.apply(Point::zeros(3)), Error);
}

TEST_CASE("jl norm preservation") {
    const std::size_t m = jl_dimension(1000, 0.2, 8.0);
    CHECK(m == static_cast<std::size_t>(std::ceil(8.0 * std::log(1000.0) / 0.04)));
    const JlMap map = sample_jl(512, m, 21);
    CounterRng rng(16);
    int ok = 0;
    for (int i = 0; i < 1000; ++i) {
        const Point x = normalize_to_radius(gaussian_point(rng, 512), 1.0);
        const double len = norm(map.apply(x));
        ok += (len > 0.8 && len < 1.2) ? 1 : 0;
    }
    CHECK(ok >= 970);

    const JlMap small = sample_jl(64, 32, 22);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Point x = gaussian_point(rng, 64);
        const double r = norm(small.apply(x)) / norm(x);
        mean += r * r;
    }
    CHECK(mean / 10000.0 == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("dataset") {
    Dataset d(2);
    d.add(Point{1, 2});
    d.add(Point{3, 4});
    CHECK(d.size() == 2);
    CHECK(d.point(1)[0] == 3.0);
    CHECK_THROWS_AS(d.add(Point{1, 2, 3}), Error);
    CHECK_THROWS_AS(Dataset(2, {1.0, 2.0, 3.0}), Error);
}

}
