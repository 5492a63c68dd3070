#include "uavsim/trajectory.hpp"

#include <algorithm>
#include <cmath>

namespace uavsim {

namespace {

void check_finite(const BezierPath& path) {
    for (const Vec2* p : {&path.p0, &path.p1, &path.p2, &path.p3})
        if (!p->allFinite()) throw ConfigError("BezierPath: control points must be finite");
}

}  // namespace

Vec2 eval(const BezierPath& path, double s) {
    check_finite(path);
    s = std::clamp(s, 0.0, 1.0);
    const double t = 1.0 - s;
    return t * t * t * path.p0 + 3.0 * t * t * s * path.p1 + 3.0 * t * s * s * path.p2 +
           s * s * s * path.p3;
}

Vec2 eval_tangent(const BezierPath& path, double s) {
    check_finite(path);
    s = std::clamp(s, 0.0, 1.0);
    const double t = 1.0 - s;
    return 3.0 * t * t * (path.p1 - path.p0) + 6.0 * t * s * (path.p2 - path.p1) +
           3.0 * s * s * (path.p3 - path.p2);
}

double lipschitz_bound(const BezierPath& path) {
    const double d0 = (path.p1 - path.p0).norm();
    const double d1 = (path.p2 - path.p1).norm();
    const double d2 = (path.p3 - path.p2).norm();
    return 3.0 * std::max({d0, d1, d2});
}

std::array<BezierPath, 3> table1_paths() {
    return {
        BezierPath{{0, 0}, {100, 100}, {10, 300}, {190, 400}},
        BezierPath{{200, 0}, {100, 100}, {250, 200}, {200, 400}},
        BezierPath{{400, 0}, {450, 150}, {300, 300}, {210, 400}},
    };
}

}  // namespace uavsim
