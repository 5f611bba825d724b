#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "lbs/rng.hpp"

namespace lbs {

// Boundary tolerance for distance and space-consistency comparisons.
// Contact positions produced by glue sit on the boundary up to rounding;
// comparisons must not reject them.
inline constexpr double kGeomEps = 1e-9;

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Point {
    double x = 0.0, y = 0.0, z = 0.0;

    friend Point operator+(const Point& a, const Point& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Point operator-(const Point& a, const Point& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Point operator*(double s, const Point& p) { return {s * p.x, s * p.y, s * p.z}; }
    friend bool operator==(const Point& a, const Point& b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double distance(const Point& a, const Point& b) { return (a - b).norm(); }

// Barycentre-relative shape. Entities use spheres; cuboids appear only as
// confinement spaces (anchored at their bottom-left vertex via Space).
struct Shape {
    enum class Kind { Sphere, Cuboid };
    Kind kind = Kind::Sphere;
    double radius = 1.0;          // Sphere
    double w = 0.0, h = 0.0, d = 0.0; // Cuboid

    static Shape sphere(double r) {
        if (!(r > 0.0) || !std::isfinite(r))
            throw GeometryError("sphere radius must be positive, got " + std::to_string(r));
        Shape s;
        s.kind = Kind::Sphere;
        s.radius = r;
        return s;
    }

    static Shape cuboid(double w, double h, double d) {
        if (!(w > 0.0 && h > 0.0 && d > 0.0) || !(std::isfinite(w) && std::isfinite(h) && std::isfinite(d)))
            throw GeometryError("cuboid dimensions must be positive");
        Shape s;
        s.kind = Kind::Cuboid;
        s.w = w;
        s.h = h;
        s.d = d;
        return s;
    }

    bool is_sphere() const { return kind == Kind::Sphere; }
};

// Confinement region. For a cuboid the anchor is the bottom-left vertex;
// for a sphere it is the centre.
struct Space {
    Shape shape;
    Point anchor;
};

// A shape placed in world space: point set {centre + scale*q | q in shape}.
struct PlacedShape {
    Shape shape;
    Point centre;
    double scale = 1.0;
};

// Minimum Euclidean distance between the point sets of two placed shapes,
// clamped at zero when they touch or overlap. Entity shapes are spheres in
// this version, so the analytic centre-line formula is exact.
inline double min_distance(const PlacedShape& a, const PlacedShape& b) {
    if (!a.shape.is_sphere() || !b.shape.is_sphere())
        throw GeometryError("min_distance: only sphere entity shapes are supported");
    // summing the radii first keeps the result exactly symmetric in a and b
    double gap = distance(a.centre, b.centre) - (a.scale * a.shape.radius + b.scale * b.shape.radius);
    return gap > 0.0 ? gap : 0.0;
}

// True iff every point of the placed shape lies inside the space, with the
// boundary tolerance applied so shapes touching the wall from inside count
// as contained.
inline bool contains(const Space& space, const PlacedShape& e) {
    if (!e.shape.is_sphere())
        throw GeometryError("contains: only sphere entity shapes are supported");
    const double r = e.scale * e.shape.radius;
    if (space.shape.kind == Shape::Kind::Cuboid) {
        const Point& a = space.anchor;
        return e.centre.x - a.x >= r - kGeomEps && a.x + space.shape.w - e.centre.x >= r - kGeomEps &&
               e.centre.y - a.y >= r - kGeomEps && a.y + space.shape.h - e.centre.y >= r - kGeomEps &&
               e.centre.z - a.z >= r - kGeomEps && a.z + space.shape.d - e.centre.z >= r - kGeomEps;
    }
    return distance(space.anchor, e.centre) + r <= space.shape.radius + kGeomEps;
}

// True iff the interiors of the two point sets intersect. Tangency (contact
// within the boundary tolerance) is not an overlap, so glued assemblies in
// contact remain space consistent.
inline bool overlaps(const PlacedShape& a, const PlacedShape& b) {
    if (!a.shape.is_sphere() || !b.shape.is_sphere())
        throw GeometryError("overlaps: only sphere entity shapes are supported");
    double reach = a.scale * a.shape.radius + b.scale * b.shape.radius;
    return reach - distance(a.centre, b.centre) > kGeomEps;
}

// A point at the given distance from the origin, direction uniform on the
// unit sphere. The norm is renormalized so it matches `length` to full
// double precision.
inline Point rand_point(double length, Rng& rng) {
    if (length < 0.0 || !std::isfinite(length))
        throw GeometryError("rand_point: length must be finite and nonnegative");
    if (length == 0.0)
        return {0.0, 0.0, 0.0};
    double z = 1.0 - 2.0 * rng.uniform();
    double phi = 2.0 * M_PI * rng.uniform();
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    Point dir{rho * std::cos(phi), rho * std::sin(phi), z};
    double n = dir.norm();
    return (length / n) * dir;
}

// The point on the ray from q towards p at exactly contact_distance from q.
// Placing two spheres whose radii sum to contact_distance at q and at the
// result puts them in contact.
inline Point glue_point(const Point& p, const Point& q, double contact_distance) {
    if (!(contact_distance > 0.0) || !std::isfinite(contact_distance))
        throw GeometryError("glue: contact distance must be positive");
    Point dir = p - q;
    double n = dir.norm();
    if (n == 0.0)
        throw GeometryError("degenerate glue direction");
    return q + (contact_distance / n) * dir;
}

} // namespace lbs
