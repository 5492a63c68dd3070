#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "oracles.hpp"
#include "uavsim/trajectory.hpp"

using namespace uavsim;

TEST_CASE("eval: endpoints and midpoint of the first reference path") {
    const BezierPath path = table1_paths()[0];
    CHECK((eval(path, 0.0) - Vec2(0, 0)).norm() == doctest::Approx(0));
    CHECK((eval(path, 1.0) - Vec2(190, 400)).norm() == doctest::Approx(0));

    const Vec2 mid = eval(path, 0.5);
    const Vec2 expect = oracle::de_casteljau(path.p0, path.p1, path.p2, path.p3, 0.5);
    CHECK((mid - expect).norm() < 1e-12);
    CHECK(mid[0] == doctest::Approx(65.0));
    CHECK(mid[1] == doctest::Approx(200.0));
}

TEST_CASE("eval: agrees with de Casteljau across paths and parameters") {
    for (const BezierPath& path : table1_paths()) {
        for (int i = 0; i <= 100; ++i) {
            const double s = i / 100.0;
            const Vec2 expect = oracle::de_casteljau(path.p0, path.p1, path.p2, path.p3, s);
            CHECK((eval(path, s) - expect).norm() < 1e-10);
        }
    }
}

TEST_CASE("eval: clamps s outside [0, 1]") {
    const BezierPath path = table1_paths()[1];
    CHECK((eval(path, -0.5) - eval(path, 0.0)).norm() == doctest::Approx(0));
    CHECK((eval(path, 1.5) - eval(path, 1.0)).norm() == doctest::Approx(0));
}

TEST_CASE("eval: NaN control points rejected") {
    BezierPath path = table1_paths()[0];
    path.p2[0] = std::nan("");
    CHECK_THROWS_AS(eval(path, 0.5), ConfigError);
    CHECK_THROWS_AS(eval_tangent(path, 0.5), ConfigError);
}

TEST_CASE("eval_tangent: endpoint identities") {
    for (const BezierPath& path : table1_paths()) {
        CHECK((eval_tangent(path, 0.0) - 3.0 * (path.p1 - path.p0)).norm() < 1e-12);
        CHECK((eval_tangent(path, 1.0) - 3.0 * (path.p3 - path.p2)).norm() < 1e-12);
    }
}

TEST_CASE("eval_tangent: direct evaluation at the midpoint of path 1") {
    const BezierPath path = table1_paths()[0];
    const Vec2 expect = 0.75 * (path.p1 - path.p0) + 1.5 * (path.p2 - path.p1) +
                        0.75 * (path.p3 - path.p2);
    const Vec2 got = eval_tangent(path, 0.5);
    CHECK((got - expect).norm() < 1e-12);
    CHECK(got[0] == doctest::Approx(75.0));
    CHECK(got[1] == doctest::Approx(450.0));
}

TEST_CASE("eval_tangent: matches central differences of eval") {
    const double h = 1e-6;
    for (const BezierPath& path : table1_paths()) {
        for (int i = 1; i < 100; ++i) {
            const double s = i / 100.0;
            const Vec2 fd = (eval(path, s + h) - eval(path, s - h)) / (2.0 * h);
            const Vec2 an = eval_tangent(path, s);
            CHECK((fd - an).norm() <= 1e-6 * std::max(1.0, an.norm()));
        }
    }
}

TEST_CASE("eval: Lipschitz continuity under dense sampling") {
    for (const BezierPath& path : table1_paths()) {
        const double L = lipschitz_bound(path);
        const double eps = 1e-4;
        for (int i = 0; i < 10000; ++i) {
            const double s = i / 10000.0 * (1.0 - eps);
            CHECK((eval(path, s + eps) - eval(path, s)).norm() <= L * eps * (1 + 1e-9));
        }
    }
}

TEST_CASE("table1_paths: simultaneous-arrival geometry at the destinations") {
    const auto paths = table1_paths();
    CHECK((eval(paths[0], 1.0) - Vec2(190, 400)).norm() == doctest::Approx(0));
    CHECK((eval(paths[1], 1.0) - Vec2(200, 400)).norm() == doctest::Approx(0));
    CHECK((eval(paths[2], 1.0) - Vec2(210, 400)).norm() == doctest::Approx(0));
}
