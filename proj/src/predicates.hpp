#pragma once

#include <ccm/mesh.hpp>

namespace ccm::detail {

/// Sign of the orientation determinant of (a, b, c): +1 counter-clockwise,
/// -1 clockwise, 0 collinear. Exact: a floating-point filter falls back to
/// rational arithmetic when the result is uncertain.
int orient2d(const Vec2& a, const Vec2& b, const Vec2& c);

/// Sign of the in-circle determinant: +1 when d lies strictly inside the
/// circumcircle of the counter-clockwise triangle (a, b, c). Exact.
int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

} // namespace ccm::detail
