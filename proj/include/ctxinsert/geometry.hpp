#pragma once

#include <Eigen/Core>
#include <array>

namespace ctxinsert {

// Axis-aligned box anchored at its bottom-left corner in a y-up coordinate
// system. File formats use the usual top-left y-down image convention; they
// are converted at ingestion and converted back on output.
struct BBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    double area() const { return w * h; }
    double center_x() const { return x + 0.5 * w; }
    double center_y() const { return y + 0.5 * h; }
    double longer_side() const { return w > h ? w : h; }

    bool operator==(const BBox&) const = default;
};

// Relative geometry of box `b1` against reference box `b2`:
//   [ (x1-x2)/w2, (y1-y2)/h2, w1/w2, h1/h2 ]
// Offsets are between bottom-left corners, normalized by the reference size.
using PairFeature = Eigen::Vector4d;

// Throws InvalidGeometryError when either box has a non-positive extent or a
// non-finite coordinate.
PairFeature pair_feature(const BBox& b1, const BBox& b2);

bool box_is_finite(const BBox& box);

// Throws InvalidGeometryError unless w > 0, h > 0 and all fields are finite.
void validate_box(const BBox& box, const char* what);

// Converts a top-left y-down box to the internal bottom-left y-up convention.
BBox box_from_topdown(double x, double y_top, double w, double h, double image_height);

// Inverse of box_from_topdown; returns {x, y_top, w, h}.
std::array<double, 4> box_to_topdown(const BBox& box, double image_height);

// Intersects the box with [0, width] x [0, height] in place. Returns false
// (leaving the box untouched) when the intersection has no area.
bool clamp_box(BBox& box, double width, double height);

// Intersection-over-union of two boxes; 0 when either has no area.
double box_iou(const BBox& a, const BBox& b);

}  // namespace ctxinsert
