#pragma once

#include <array>

#include "uavsim/linalg.hpp"

namespace uavsim {

/// Cubic Bezier desired trajectory over the normalized parameter s in [0, 1].
struct BezierPath {
    Vec2 p0, p1, p2, p3;
};

/// Point on the curve. s is clamped to [0, 1].
Vec2 eval(const BezierPath& path, double s);

/// dg/ds = 3(1-s)^2 (p1-p0) + 6(1-s)s (p2-p1) + 3s^2 (p3-p2), s clamped.
Vec2 eval_tangent(const BezierPath& path, double s);

/// Lipschitz bound on eval: sup ||dg/ds|| <= 3 max segment length.
double lipschitz_bound(const BezierPath& path);

/// The three reference paths used by the simulation scenarios.
std::array<BezierPath, 3> table1_paths();

}  // namespace uavsim
