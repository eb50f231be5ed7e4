#include "ctxinsert/scorer.hpp"

#include <algorithm>
#include <cmath>

#include "ctxinsert/errors.hpp"

namespace ctxinsert {

namespace {

// exp underflows to exactly 0.0 below this; blocks whose best exponent is
// smaller cannot contribute anything to the score matrix.
constexpr double kExpUnderflow = -746.0;

// Loaded models with essentially singular covariances would overflow the
// density exponential; anything this sharp is rejected as degenerate.
constexpr double kMaxLogNorm = 300.0;

}  // namespace

CandidateGrid sample_candidates(double width, double height, std::span<const double> scales,
                                double stride_ratio) {
    if (!(width > 0.0) || !(height > 0.0)) {
        throw ValidationError("sample_candidates: image dimensions must be positive");
    }
    if (!(stride_ratio > 0.0)) {
        throw ValidationError("sample_candidates: stride ratio must be positive");
    }
    CandidateGrid grid;
    double longer = std::max(width, height);
    for (double scale : scales) {
        if (!(scale > 0.0)) throw ValidationError("sample_candidates: scales must be positive");
        double w = scale * longer;
        if (w > width || w > height) continue;  // window does not fit this image
        double s = stride_ratio * w;

        auto axis_count = [&](double dim) {
            // Seed from the closed form, then correct in both directions so n
            // is exactly maximal under floating-point comparison: the division
            // can land one ulp on either side of an integer ratio.
            int n = static_cast<int>(std::floor((dim - w) / s)) + 1;
            while (n > 1 && (n - 1) * s + w > dim) --n;
            while (n * s + w <= dim) ++n;
            return n;
        };
        ScaleBlock block;
        block.window = w;
        block.stride = s;
        block.nx = axis_count(width);
        block.ny = axis_count(height);
        block.first = grid.boxes.size();
        for (int iy = 0; iy < block.ny; ++iy) {
            for (int ix = 0; ix < block.nx; ++ix) {
                grid.boxes.push_back(BBox{ix * s, iy * s, w, w});
            }
        }
        grid.blocks.push_back(block);
    }
    return grid;
}

double ScoreMatrix::total() const {
    double sum = 0.0;
    for (double v : data_) sum += v;
    return sum;
}

ContextModel::ContextModel(Vocabulary vocab, CountTables counts, std::vector<TripleGmm> gmms,
                           ScorerConfig config, FitConfig fit_config)
    : vocab_(std::move(vocab)),
      counts_(std::move(counts)),
      gmms_(std::move(gmms)),
      config_(std::move(config)),
      fit_config_(fit_config) {
    std::sort(gmms_.begin(), gmms_.end(),
              [](const TripleGmm& a, const TripleGmm& b) { return a.key < b.key; });

    triples_by_context_.resize(vocab_.context().size());
    for (const auto& entry : gmms_) {
        int c = vocab_.insertable_index(entry.key.subject);
        int r = vocab_.relation_index(entry.key.relation);
        int j = vocab_.context_index(entry.key.object);
        if (c < 0 || r < 0 || j < 0) {
            throw ValidationError("model triple " + to_string(entry.key) +
                                  " references names outside the vocabulary");
        }
        if (counts_.triple_count(entry.key) <= 0) {
            throw ValidationError("model triple " + to_string(entry.key) +
                                  " has no supporting count");
        }
        if (!(entry.context_weight > 0.0) || !std::isfinite(entry.context_weight)) {
            throw ValidationError("model triple " + to_string(entry.key) +
                                  " has a non-positive context weight");
        }
        validate_gmm(entry.gmm);

        PackedTriple packed;
        packed.insertable = c;
        packed.context_weight = entry.context_weight;
        packed.comp_begin = packed_components_.size();
        for (size_t k = 0; k < entry.gmm.k(); ++k) {
            const Gaussian& g = entry.gmm.components[k];
            if (g.log_norm() > kMaxLogNorm) {
                throw ValidationError("model triple " + to_string(entry.key) +
                                      " has a degenerate (near-singular) covariance");
            }
            Eigen::Matrix4d linv = g.chol_lower()
                                       .triangularView<Eigen::Lower>()
                                       .solve(Eigen::Matrix4d::Identity());
            PackedComponent pc;
            for (int i = 0; i < 4; ++i) pc.mean[i] = g.mean()[i];
            pc.l00 = linv(0, 0);
            pc.l10 = linv(1, 0);
            pc.l11 = linv(1, 1);
            pc.l20 = linv(2, 0);
            pc.l21 = linv(2, 1);
            pc.l22 = linv(2, 2);
            pc.l30 = linv(3, 0);
            pc.l31 = linv(3, 1);
            pc.l32 = linv(3, 2);
            pc.l33 = linv(3, 3);
            pc.log_const = std::log(entry.gmm.weights[k]) + g.log_norm();
            pc.inv_trace = 1.0 / g.covariance().trace();
            packed_components_.push_back(pc);
        }
        packed.comp_end = packed_components_.size();
        triples_by_context_[static_cast<size_t>(j)].push_back(packed);
    }
}

ScoreMatrix joint_score(const SceneDetections& scene, const CandidateGrid& grid,
                        const ContextModel& model) {
    size_t n_boxes = grid.boxes.size();
    size_t n_categories = model.vocab().insertable().size();
    size_t n_context = model.vocab().context().size();
    ScoreMatrix sm(n_boxes, n_categories);
    if (n_boxes == 0 || scene.detections.empty()) return sm;

    for (const auto& det : scene.detections) {
        if (det.scores.size() != n_context) {
            throw ContractViolationError(
                "joint_score: detection score vector does not match the context vocabulary");
        }
        validate_box(det.box, "joint_score detection");
    }

    const auto& packed = model.packed_components();
    const auto& by_context = model.triples_by_context();

    // Candidates laid out on a verified sliding-window lattice admit a
    // separable evaluation: with box = (ix*s, iy*s, w, w) the density
    // exponent is a quadratic in (ix, iy), so along a row consecutive
    // densities differ by a ratio that itself shrinks by the constant
    // factor exp(2*e20). That turns one exp per candidate into two exps
    // per row plus two multiplies per candidate. Boxes not covered by a
    // lattice block ("loose" boxes) keep the generic per-box pass.
    struct Lattice {
        size_t first = 0;
        size_t nx = 0, ny = 0;
        double stride = 0.0, window = 0.0;
    };
    std::vector<Lattice> lattices;
    std::vector<char> covered(n_boxes, 0);
    for (const auto& block : grid.blocks) {
        if (block.nx < 1 || block.ny < 1 || !(block.stride > 0.0)) continue;
        Lattice lat;
        lat.first = block.first;
        lat.nx = static_cast<size_t>(block.nx);
        lat.ny = static_cast<size_t>(block.ny);
        lat.stride = block.stride;
        lat.window = block.window;
        if (lat.first > n_boxes || lat.nx * lat.ny > n_boxes - lat.first) continue;
        // Trust the block only if the listed boxes really sit on its lattice;
        // anything inconsistent stays on the generic path.
        bool exact = true;
        for (size_t iy = 0; iy < lat.ny && exact; ++iy) {
            for (size_t ix = 0; ix < lat.nx; ++ix) {
                size_t idx = lat.first + iy * lat.nx + ix;
                const BBox& b = grid.boxes[idx];
                if (covered[idx] || b.x != static_cast<double>(ix) * lat.stride ||
                    b.y != static_cast<double>(iy) * lat.stride || b.w != lat.window ||
                    b.h != lat.window) {
                    exact = false;
                    break;
                }
            }
        }
        if (!exact) continue;
        for (size_t k = 0; k < lat.nx * lat.ny; ++k) covered[lat.first + k] = 1;
        lattices.push_back(lat);
    }
    std::vector<size_t> loose;
    for (size_t b = 0; b < n_boxes; ++b) {
        if (!covered[b]) loose.push_back(b);
    }
    size_t n_loose = loose.size();

    // Scratch: per-detection score buffer (for exact per-detection additivity)
    // and structure-of-arrays feature buffers for the loose boxes.
    std::vector<double> det_scores(n_boxes * n_categories);
    std::vector<double> f0(n_loose), f1(n_loose), f2(n_loose), f3(n_loose), exponents(n_loose);

    for (const auto& det : scene.detections) {
        double inv_w = 1.0 / det.box.w;
        double inv_h = 1.0 / det.box.h;
        double fmin[4] = {0, 0, 0, 0}, fmax[4] = {0, 0, 0, 0};
        if (n_loose > 0) {
            for (size_t b = 0; b < n_loose; ++b) {
                const BBox& box = grid.boxes[loose[b]];
                f0[b] = (box.x - det.box.x) * inv_w;
                f1[b] = (box.y - det.box.y) * inv_h;
                f2[b] = box.w * inv_w;
                f3[b] = box.h * inv_h;
            }
            const std::vector<double>* features[4] = {&f0, &f1, &f2, &f3};
            for (int d = 0; d < 4; ++d) {
                auto [lo, hi] = std::minmax_element(features[d]->begin(), features[d]->end());
                fmin[d] = *lo;
                fmax[d] = *hi;
            }
        }

        std::fill(det_scores.begin(), det_scores.end(), 0.0);
        bool any_term = false;

        for (size_t j = 0; j < n_context; ++j) {
            double p = det.scores[j];
            if (!(p > 0.0)) continue;
            for (const auto& triple : by_context[j]) {
                double coef = triple.context_weight * p;
                double* col = det_scores.data() + static_cast<size_t>(triple.insertable) * n_boxes;
                for (size_t ci = triple.comp_begin; ci < triple.comp_end; ++ci) {
                    const auto& pc = packed[ci];
                    if (pc.log_const < kExpUnderflow) continue;
                    const double m0 = pc.mean[0], m1 = pc.mean[1], m2 = pc.mean[2], m3 = pc.mean[3];

                    if (n_loose > 0) {
                        // Distance from the mean to the features' bounding
                        // region lower-bounds every quadratic form in this
                        // pass; skip it when even its largest term underflows.
                        double gap2 = 0.0;
                        for (int d = 0; d < 4; ++d) {
                            double gap =
                                std::max({fmin[d] - pc.mean[d], pc.mean[d] - fmax[d], 0.0});
                            gap2 += gap * gap;
                        }
                        if (pc.log_const - 0.5 * gap2 * pc.inv_trace >= kExpUnderflow) {
                            for (size_t b = 0; b < n_loose; ++b) {
                                double d0 = f0[b] - m0;
                                double d1 = f1[b] - m1;
                                double d2 = f2[b] - m2;
                                double d3 = f3[b] - m3;
                                double t0 = pc.l00 * d0;
                                double t1 = pc.l10 * d0 + pc.l11 * d1;
                                double t2 = pc.l20 * d0 + pc.l21 * d1 + pc.l22 * d2;
                                double t3 = pc.l30 * d0 + pc.l31 * d1 + pc.l32 * d2 + pc.l33 * d3;
                                double q = t0 * t0 + t1 * t1 + t2 * t2 + t3 * t3;
                                exponents[b] = pc.log_const - 0.5 * q;
                            }
                            Eigen::Map<Eigen::ArrayXd> e(exponents.data(),
                                                         static_cast<Eigen::Index>(n_loose));
                            e = e.exp();
                            for (size_t b = 0; b < n_loose; ++b) {
                                col[loose[b]] += coef * exponents[b];
                            }
                            any_term = true;
                        }
                    }

                    for (const auto& lat : lattices) {
                        // Whitened deviation t = c + ix*u + iy*v, so the
                        // exponent log_const - |t|^2/2 expands to
                        //   e00 + e10*ix + e20*ix^2 + e01*iy + e02*iy^2 + e11*ix*iy.
                        double h0 = lat.stride * inv_w;
                        double h1 = lat.stride * inv_h;
                        double d0c = -det.box.x * inv_w - m0;
                        double d1c = -det.box.y * inv_h - m1;
                        double d2 = lat.window * inv_w - m2;
                        double d3 = lat.window * inv_h - m3;
                        double c0 = pc.l00 * d0c;
                        double c1 = pc.l10 * d0c + pc.l11 * d1c;
                        double c2 = pc.l20 * d0c + pc.l21 * d1c + pc.l22 * d2;
                        double c3 = pc.l30 * d0c + pc.l31 * d1c + pc.l32 * d2 + pc.l33 * d3;
                        double u0 = pc.l00 * h0;
                        double u1 = pc.l10 * h0;
                        double u2 = pc.l20 * h0;
                        double u3 = pc.l30 * h0;
                        double v1 = pc.l11 * h1;
                        double v2 = pc.l21 * h1;
                        double v3 = pc.l31 * h1;
                        double e00 = pc.log_const - 0.5 * (c0 * c0 + c1 * c1 + c2 * c2 + c3 * c3);
                        double e10 = -(c0 * u0 + c1 * u1 + c2 * u2 + c3 * u3);
                        double e20 = -0.5 * (u0 * u0 + u1 * u1 + u2 * u2 + u3 * u3);
                        double e01 = -(c1 * v1 + c2 * v2 + c3 * v3);
                        double e02 = -0.5 * (v1 * v1 + v2 * v2 + v3 * v3);
                        double e11 = -(u1 * v1 + u2 * v2 + u3 * v3);
                        double rho = std::exp(2.0 * e20);
                        double* base = col + lat.first;
                        double fw = lat.window * inv_w;
                        double fh = lat.window * inv_h;

                        for (size_t iy = 0; iy < lat.ny; ++iy) {
                            double yd = static_cast<double>(iy);
                            double a_row = e00 + yd * (e01 + yd * e02);
                            double b_row = e10 + e11 * yd;
                            // Solve e20*x^2 + b_row*x + (a_row - cutoff) >= 0:
                            // the parabola opens downward, so the row only
                            // matters between the two roots.
                            double c_row = a_row - kExpUnderflow;
                            double disc = b_row * b_row - 4.0 * e20 * c_row;
                            if (!(disc > 0.0)) continue;
                            double sq = std::sqrt(disc);
                            double xlo = (-b_row + sq) / (2.0 * e20);
                            double xhi = (-b_row - sq) / (2.0 * e20);
                            double lo_d = std::ceil(std::max(xlo, 0.0));
                            double hi_d = std::floor(std::min(xhi, static_cast<double>(lat.nx - 1)));
                            if (lo_d > hi_d) continue;
                            size_t lo = static_cast<size_t>(lo_d);
                            size_t hi = static_cast<size_t>(hi_d);
                            double* row = base + iy * lat.nx;

                            // Seed at the lattice point nearest the row's
                            // vertex, evaluated from the box coordinates the
                            // way the generic pass does: the polynomial's
                            // coefficients cancel catastrophically, the local
                            // quadratic form does not. Every step away from
                            // the vertex descends, so the running ratios
                            // never overflow.
                            double xv = -b_row / (2.0 * e20);
                            double ad = std::min(static_cast<double>(hi),
                                                 std::max(static_cast<double>(lo), std::round(xv)));
                            size_t anchor = static_cast<size_t>(ad);
                            double g0 = (ad * lat.stride - det.box.x) * inv_w - m0;
                            double g1 = (yd * lat.stride - det.box.y) * inv_h - m1;
                            double g2 = fw - m2;
                            double g3 = fh - m3;
                            double t0 = pc.l00 * g0;
                            double t1 = pc.l10 * g0 + pc.l11 * g1;
                            double t2 = pc.l20 * g0 + pc.l21 * g1 + pc.l22 * g2;
                            double t3 = pc.l30 * g0 + pc.l31 * g1 + pc.l32 * g2 + pc.l33 * g3;
                            double q = t0 * t0 + t1 * t1 + t2 * t2 + t3 * t3;
                            double seed = coef * std::exp(pc.log_const - 0.5 * q);
                            row[anchor] += seed;
                            if (anchor < hi) {
                                double r = std::exp(b_row + e20 * (2.0 * ad + 1.0));
                                double val = seed;
                                for (size_t ix = anchor + 1; ix <= hi; ++ix) {
                                    val *= r;
                                    r *= rho;
                                    row[ix] += val;
                                }
                            }
                            if (anchor > lo) {
                                double l = std::exp(-(b_row + e20 * (2.0 * ad - 1.0)));
                                double val = seed;
                                for (size_t ix = anchor; ix > lo; --ix) {
                                    val *= l;
                                    l *= rho;
                                    row[ix - 1] += val;
                                }
                            }
                            any_term = true;
                        }
                    }
                }
            }
        }

        if (any_term) {
            for (size_t c = 0; c < n_categories; ++c) {
                auto column = sm.category_column(c);
                const double* src = det_scores.data() + c * n_boxes;
                for (size_t b = 0; b < n_boxes; ++b) column[b] += src[b];
            }
        }
    }
    return sm;
}

std::optional<ScoreMatrix> normalize_joint(const ScoreMatrix& sm) {
    double z = sm.total();
    if (!(z > 0.0)) return std::nullopt;
    ScoreMatrix out(sm.n_boxes(), sm.n_categories());
    for (size_t c = 0; c < sm.n_categories(); ++c) {
        auto src = sm.category_column(c);
        auto dst = out.category_column(c);
        for (size_t b = 0; b < sm.n_boxes(); ++b) dst[b] = src[b] / z;
    }
    return out;
}

std::vector<double> marginal_category(const ScoreMatrix& normalized) {
    std::vector<double> marginal(normalized.n_categories(), 0.0);
    for (size_t c = 0; c < normalized.n_categories(); ++c) {
        auto column = normalized.category_column(c);
        double sum = 0.0;
        for (double v : column) sum += v;
        marginal[c] = sum;
    }
    return marginal;
}

std::optional<std::vector<double>> conditional_box(const ScoreMatrix& sm, size_t category) {
    if (category >= sm.n_categories()) {
        throw ContractViolationError("conditional_box: category index out of range");
    }
    auto column = sm.category_column(category);
    double sum = 0.0;
    for (double v : column) sum += v;
    if (!(sum > 0.0)) return std::nullopt;
    std::vector<double> probs(column.begin(), column.end());
    for (double& v : probs) v /= sum;
    return probs;
}

BBox refine_size(const SceneDetections& scene, const ContextModel& model, size_t category,
                 const BBox& best, int n_values) {
    validate_box(best, "refine_size best box");
    if (n_values < 1) throw ValidationError("refine_size: n_values must be at least 1");
    if (category >= model.vocab().insertable().size()) {
        throw ContractViolationError("refine_size: category index out of range");
    }

    double longer = std::max(scene.width, scene.height);
    double max_scale = 0.0;
    for (double s : model.config().scales) max_scale = std::max(max_scale, s);
    double side_max = max_scale * longer;

    double cx = best.center_x();
    double cy = best.center_y();

    CandidateGrid sizes;
    for (int k = 1; k <= n_values; ++k) {
        double side = side_max * static_cast<double>(k) / static_cast<double>(n_values);
        BBox candidate{cx - 0.5 * side, cy - 0.5 * side, side, side};
        if (!clamp_box(candidate, scene.width, scene.height)) continue;
        sizes.boxes.push_back(candidate);
    }
    if (sizes.boxes.empty()) return best;

    ScoreMatrix scores = joint_score(scene, sizes, model);
    auto column = scores.category_column(category);
    size_t argmax = 0;
    for (size_t i = 1; i < column.size(); ++i) {
        if (column[i] > column[argmax]) argmax = i;  // ties keep the smaller side
    }
    return sizes.boxes[argmax];
}

Heatmap rasterize_heatmap(const CandidateGrid& grid, std::span<const double> box_probs, int width,
                          int height) {
    if (box_probs.size() != grid.boxes.size()) {
        throw ContractViolationError("rasterize_heatmap: probability count must match box count");
    }
    if (width < 1 || height < 1) {
        throw ContractViolationError("rasterize_heatmap: raster dimensions must be positive");
    }

    Heatmap heat;
    heat.width = width;
    heat.height = height;
    heat.raster.assign(static_cast<size_t>(width) * height, 0.0);

    // Difference array with one guard row/column; prefix sums turn the corner
    // deposits into full-box coverage.
    size_t stride = static_cast<size_t>(width) + 1;
    std::vector<double> diff(stride * (static_cast<size_t>(height) + 1), 0.0);

    for (size_t i = 0; i < grid.boxes.size(); ++i) {
        const BBox& box = grid.boxes[i];
        double p = box_probs[i];
        // Pixel (px, py) is covered when its center (px+0.5, py+0.5) lies in
        // [x, x+w) × [y, y+h).
        int x0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
        int x1 = std::min(width, static_cast<int>(std::ceil(box.x + box.w - 0.5)));
        int y0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
        int y1 = std::min(height, static_cast<int>(std::ceil(box.y + box.h - 0.5)));
        if (x1 <= x0 || y1 <= y0) continue;
        diff[static_cast<size_t>(y0) * stride + x0] += p;
        diff[static_cast<size_t>(y0) * stride + x1] -= p;
        diff[static_cast<size_t>(y1) * stride + x0] -= p;
        diff[static_cast<size_t>(y1) * stride + x1] += p;
    }

    for (int y = 0; y < height; ++y) {
        double* row = diff.data() + static_cast<size_t>(y) * stride;
        for (int x = 1; x <= width; ++x) row[x] += row[x - 1];
    }
    for (int x = 0; x < width; ++x) {
        double acc = 0.0;
        for (int y = 0; y < height; ++y) {
            acc += diff[static_cast<size_t>(y) * stride + x];
            heat.at(x, y) = acc;
        }
    }
    return heat;
}

}  // namespace ctxinsert
