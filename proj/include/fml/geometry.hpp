#ifndef FML_GEOMETRY_HPP
#define FML_GEOMETRY_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace fml {

// Points live in [0,1)^q with q in {1,2}. The second coordinate is 0 when q == 1.
using Point = std::array<double, 2>;

inline double dist2(const Point& a, const Point& b, int q) {
    double s = 0.0;
    for (int i = 0; i < q; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

inline double dist(const Point& a, const Point& b, int q) { return std::sqrt(dist2(a, b, q)); }

// Half-open axis-aligned box [lo, hi). Degenerate (lo >= hi in some axis) boxes are empty.
struct Box {
    Point lo{0.0, 0.0};
    Point hi{0.0, 0.0};
    int q = 1;

    double side(int i) const { return hi[i] - lo[i]; }
    double volume() const {
        double v = 1.0;
        for (int i = 0; i < q; ++i) v *= side(i);
        return v;
    }
    bool empty() const {
        for (int i = 0; i < q; ++i)
            if (!(lo[i] < hi[i])) return true;
        return false;
    }
    Point center() const {
        Point c{0.0, 0.0};
        for (int i = 0; i < q; ++i) c[i] = lo[i] + 0.5 * (hi[i] - lo[i]);
        return c;
    }
    // Radius of the largest ball around x staying inside the closed box.
    double inradius_at(const Point& x) const {
        double r = std::numeric_limits<double>::infinity();
        for (int i = 0; i < q; ++i) {
            r = std::min(r, x[i] - lo[i]);
            r = std::min(r, hi[i] - x[i]);
        }
        return r;
    }
    double inradius() const { return inradius_at(center()); }

    bool contains(const Point& p) const {
        for (int i = 0; i < q; ++i)
            if (!(p[i] >= lo[i] && p[i] < hi[i])) return false;
        return true;
    }
};

// Squared distance from x to the closed box (0 if inside).
inline double box_min_dist2(const Box& b, const Point& x) {
    double s = 0.0;
    for (int i = 0; i < b.q; ++i) {
        double d = 0.0;
        if (x[i] < b.lo[i]) d = b.lo[i] - x[i];
        else if (x[i] > b.hi[i]) d = x[i] - b.hi[i];
        s += d * d;
    }
    return s;
}

// Supremum of squared distance from x over the closed box, plus whether that
// supremum is attained at a point of the half-open box. The farthest corner
// uses, per axis, whichever edge is farther; ties go to lo (which is the
// included edge, hence attained).
struct FarCorner {
    double d2;
    bool attained;
};
inline FarCorner box_max_dist2(const Box& b, const Point& x) {
    double s = 0.0;
    bool attained = true;
    for (int i = 0; i < b.q; ++i) {
        const double dl = std::abs(x[i] - b.lo[i]);
        const double dh = std::abs(b.hi[i] - x[i]);
        if (dl >= dh) {
            s += dl * dl;
        } else {
            s += dh * dh;
            attained = false;  // farthest coordinate sits on the open edge
        }
    }
    return {s, attained};
}

// box subset of the open ball B(x, r), exact for half-open boxes.
inline bool box_in_ball(const Box& b, const Point& x, double r) {
    if (b.empty()) return true;
    const FarCorner f = box_max_dist2(b, x);
    const double r2 = r * r;
    return f.attained ? (f.d2 < r2) : (f.d2 <= r2);
}

// box meets the open ball B(x, r). inf distance < r is exact regardless of
// where the infimum is attained.
inline bool box_meets_ball(const Box& b, const Point& x, double r) {
    if (b.empty()) return false;
    return box_min_dist2(b, x) < r * r;
}

// open ball B(x, r) a subset of the half-open box.
inline bool ball_in_box(const Box& b, const Point& x, double r, int q) {
    for (int i = 0; i < q; ++i) {
        if (!(x[i] - r >= b.lo[i])) return false;
        if (!(x[i] + r <= b.hi[i])) return false;
    }
    return true;
}

inline Box box_intersect(const Box& a, const Box& b) {
    Box r;
    r.q = a.q;
    for (int i = 0; i < a.q; ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
        if (r.hi[i] < r.lo[i]) r.hi[i] = r.lo[i];
    }
    for (int i = a.q; i < 2; ++i) { r.lo[i] = 0.0; r.hi[i] = 0.0; }
    return r;
}

// Disjoint union of up to four half-open boxes, stored inline so cubes copy
// without heap traffic. Almost every cube is a single box; the distorted
// carpet adds cubes made of a box plus a detached box, and holes made of a
// box minus an interior box (stored as its slab decomposition, <= 4 slabs).
class BoxList {
  public:
    static constexpr int kCapacity = 4;

    void push_back(const Box& b) {
        if (n_ == kCapacity) throw std::length_error("BoxList: capacity exceeded");
        items_[n_++] = b;
    }
    int size() const { return n_; }
    bool empty() const { return n_ == 0; }
    const Box& operator[](int i) const { return items_[i]; }
    Box& operator[](int i) { return items_[i]; }
    const Box& front() const { return items_[0]; }
    const Box* begin() const { return items_.data(); }
    const Box* end() const { return items_.data() + n_; }

  private:
    std::array<Box, kCapacity> items_{};
    int n_ = 0;
};

struct Region {
    BoxList boxes;

    double volume() const {
        double v = 0.0;
        for (const Box& b : boxes) v += b.volume();
        return v;
    }
    bool contains(const Point& p) const {
        for (const Box& b : boxes)
            if (b.contains(p)) return true;
        return false;
    }
    bool in_ball(const Point& x, double r) const {
        for (const Box& b : boxes)
            if (!box_in_ball(b, x, r)) return false;
        return true;
    }
    bool meets_ball(const Point& x, double r) const {
        for (const Box& b : boxes)
            if (box_meets_ball(b, x, r)) return true;
        return false;
    }
    // sup distance from x over the region closure (for fitting C1).
    double max_dist(const Point& x) const {
        double m = 0.0;
        for (const Box& b : boxes) m = std::max(m, box_max_dist2(b, x).d2);
        return std::sqrt(m);
    }
    bool single_box() const { return boxes.size() == 1; }
    const Box& box() const { return boxes.front(); }
};

inline Region region_of(const Box& b) {
    Region r;
    r.boxes.push_back(b);
    return r;
}

// box minus an interior box, decomposed into at most 4 disjoint half-open
// slabs (x-slabs full height, y-slabs clipped to the cut x-range).
inline Region box_minus_box(const Box& outer, const Box& cut) {
    Region r;
    const int q = outer.q;
    if (q == 1) {
        Box left = outer; left.hi[0] = cut.lo[0];
        Box right = outer; right.lo[0] = cut.hi[0];
        if (!left.empty()) r.boxes.push_back(left);
        if (!right.empty()) r.boxes.push_back(right);
        return r;
    }
    Box left = outer; left.hi[0] = cut.lo[0];
    Box right = outer; right.lo[0] = cut.hi[0];
    Box bottom = outer;
    bottom.lo[0] = cut.lo[0]; bottom.hi[0] = cut.hi[0]; bottom.hi[1] = cut.lo[1];
    Box top = outer;
    top.lo[0] = cut.lo[0]; top.hi[0] = cut.hi[0]; top.lo[1] = cut.hi[1];
    for (const Box& b : {left, right, bottom, top})
        if (!b.empty()) r.boxes.push_back(b);
    return r;
}

// Exact length of [a,b) intersect (x-r, x+r).
inline double interval_ball_overlap(double a, double b, double x, double r) {
    const double lo = std::max(a, x - r);
    const double hi = std::min(b, x + r);
    return hi > lo ? hi - lo : 0.0;
}

// Exact area of box intersect disc B(x, R), via the standard signed-corner
// reduction to F(X, Y) = area([0,X] x [0,Y] intersect disc(R)) for X,Y >= 0.
double box_ball_area(const Box& b, const Point& x, double R);

// Same quantity by quadtree subdivision, bracketing undecided cells after
// max_gen generations. Returns {lower, upper}. Kept as an independent route
// for cross-checking box_ball_area.
std::array<double, 2> box_ball_area_bracket(const Box& b, const Point& x, double R, int max_gen);

// Volume of box intersect ball, dimension-dispatched and exact.
inline double box_ball_volume(const Box& b, const Point& x, double R) {
    if (b.q == 1) return interval_ball_overlap(b.lo[0], b.hi[0], x[0], R);
    return box_ball_area(b, x, R);
}

}  // namespace fml

#endif
