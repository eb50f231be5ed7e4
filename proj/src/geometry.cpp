#include "ctxinsert/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ctxinsert/errors.hpp"

namespace ctxinsert {

bool box_is_finite(const BBox& box) {
    return std::isfinite(box.x) && std::isfinite(box.y) && std::isfinite(box.w) &&
           std::isfinite(box.h);
}

void validate_box(const BBox& box, const char* what) {
    if (!box_is_finite(box)) {
        std::ostringstream msg;
        msg << what << ": box has non-finite coordinates";
        throw InvalidGeometryError(msg.str());
    }
    if (box.w <= 0.0 || box.h <= 0.0) {
        std::ostringstream msg;
        msg << what << ": box extent must be positive (w=" << box.w << ", h=" << box.h << ")";
        throw InvalidGeometryError(msg.str());
    }
}

PairFeature pair_feature(const BBox& b1, const BBox& b2) {
    validate_box(b1, "pair_feature");
    validate_box(b2, "pair_feature reference");
    return PairFeature((b1.x - b2.x) / b2.w, (b1.y - b2.y) / b2.h, b1.w / b2.w, b1.h / b2.h);
}

BBox box_from_topdown(double x, double y_top, double w, double h, double image_height) {
    BBox box{x, image_height - y_top - h, w, h};
    validate_box(box, "box_from_topdown");
    return box;
}

std::array<double, 4> box_to_topdown(const BBox& box, double image_height) {
    return {box.x, image_height - box.y - box.h, box.w, box.h};
}

bool clamp_box(BBox& box, double width, double height) {
    double x0 = std::max(box.x, 0.0);
    double y0 = std::max(box.y, 0.0);
    double x1 = std::min(box.x + box.w, width);
    double y1 = std::min(box.y + box.h, height);
    if (x1 <= x0 || y1 <= y0) return false;
    box = BBox{x0, y0, x1 - x0, y1 - y0};
    return true;
}

double box_iou(const BBox& a, const BBox& b) {
    double x0 = std::max(a.x, b.x);
    double y0 = std::max(a.y, b.y);
    double x1 = std::min(a.x + a.w, b.x + b.w);
    double y1 = std::min(a.y + a.h, b.y + b.h);
    if (x1 <= x0 || y1 <= y0) return 0.0;
    double inter = (x1 - x0) * (y1 - y0);
    double uni = a.area() + b.area() - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace ctxinsert
