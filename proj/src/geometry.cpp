#include "fml/geometry.hpp"

#include <algorithm>
#include <limits>

namespace fml {

namespace {

// Area of [0,X] x [0,Y] intersect the disc of radius R centered at the origin,
// for X, Y >= 0. Piecewise circular-segment formula.
double corner_disc_area(double X, double Y, double R) {
    if (X <= 0.0 || Y <= 0.0 || R <= 0.0) return 0.0;
    X = std::min(X, R);
    Y = std::min(Y, R);
    const double R2 = R * R;
    if (X * X + Y * Y <= R2) return X * Y;  // corner inside the disc
    // integral of min(Y, sqrt(R^2 - t^2)) over t in [0, X].
    // crossing point xc where sqrt(R^2 - t^2) == Y.
    const double xc = std::sqrt(std::max(R2 - Y * Y, 0.0));
    // area = xc * Y + int_{xc}^{X} sqrt(R^2 - t^2) dt
    auto antider = [&](double t) {
        t = std::clamp(t, -R, R);
        return 0.5 * (t * std::sqrt(std::max(R2 - t * t, 0.0)) + R2 * std::asin(t / R));
    };
    return xc * Y + (antider(X) - antider(xc));
}

// Signed version: odd in each argument.
double corner_disc_area_signed(double X, double Y, double R) {
    const double s = ((X < 0.0) ? -1.0 : 1.0) * ((Y < 0.0) ? -1.0 : 1.0);
    return s * corner_disc_area(std::abs(X), std::abs(Y), R);
}

}  // namespace

double box_ball_area(const Box& b, const Point& x, double R) {
    const double x1 = b.lo[0] - x[0], x2 = b.hi[0] - x[0];
    const double y1 = b.lo[1] - x[1], y2 = b.hi[1] - x[1];
    double a = corner_disc_area_signed(x2, y2, R) - corner_disc_area_signed(x1, y2, R) -
               corner_disc_area_signed(x2, y1, R) + corner_disc_area_signed(x1, y1, R);
    return std::clamp(a, 0.0, b.volume());
}

std::array<double, 2> box_ball_area_bracket(const Box& b, const Point& x, double R, int max_gen) {
    if (!box_meets_ball(b, x, R)) return {0.0, 0.0};
    if (box_in_ball(b, x, R)) {
        const double v = b.volume();
        return {v, v};
    }
    if (max_gen == 0) return {0.0, b.volume()};
    std::array<double, 2> acc{0.0, 0.0};
    const Point c = b.center();
    for (int iy = 0; iy < (b.q == 2 ? 2 : 1); ++iy) {
        for (int ix = 0; ix < 2; ++ix) {
            Box sub = b;
            if (ix == 0) sub.hi[0] = c[0]; else sub.lo[0] = c[0];
            if (b.q == 2) {
                if (iy == 0) sub.hi[1] = c[1]; else sub.lo[1] = c[1];
            }
            if (sub.empty()) continue;
            const auto r = box_ball_area_bracket(sub, x, R, max_gen - 1);
            acc[0] += r[0];
            acc[1] += r[1];
        }
    }
    return acc;
}

}  // namespace fml
