#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "ctxinsert/geometry.hpp"

namespace oracle {

using namespace ctxinsert;

// ---- densities ---------------------------------------------------------------

double gauss_density(const Eigen::Vector4d& mean, const Eigen::Matrix4d& cov,
                     const Eigen::Vector4d& x) {
    Eigen::Vector4d d = x - mean;
    double quad = d.dot(cov.inverse() * d);
    double norm = std::pow(2.0 * std::numbers::pi, -2.0) / std::sqrt(cov.determinant());
    return norm * std::exp(-0.5 * quad);
}

double gmm_density(const GmmModel& gmm, const Eigen::Vector4d& x) {
    double total = 0.0;
    for (size_t k = 0; k < gmm.k(); ++k) {
        total += gmm.weights[k] *
                 gauss_density(gmm.components[k].mean(), gmm.components[k].covariance(), x);
    }
    return total;
}

// ---- scoring -------------------------------------------------------------------

std::vector<std::vector<double>> joint_score(const SceneDetections& scene,
                                             const CandidateGrid& grid,
                                             const ContextModel& model) {
    const Vocabulary& vocab = model.vocab();
    std::vector<std::vector<double>> out(grid.boxes.size(),
                                         std::vector<double>(vocab.insertable().size(), 0.0));
    for (size_t b = 0; b < grid.boxes.size(); ++b) {
        for (const DetectedObject& det : scene.detections) {
            Eigen::Vector4d f = pair_feature(grid.boxes[b], det.box);
            for (const TripleGmm& triple : model.gmms()) {
                int c = vocab.insertable_index(triple.key.subject);
                int j = vocab.context_index(triple.key.object);
                double p = det.scores[static_cast<size_t>(j)];
                double ratio = static_cast<double>(model.counts().triple_count(triple.key)) /
                               static_cast<double>(model.counts().category_count(triple.key.object));
                out[b][static_cast<size_t>(c)] += ratio * gmm_density(triple.gmm, f) * p;
            }
        }
    }
    return out;
}

std::vector<double> rasterize(const CandidateGrid& grid, std::span<const double> probs, int width,
                              int height) {
    std::vector<double> heat(static_cast<size_t>(width) * height, 0.0);
    for (size_t b = 0; b < grid.boxes.size(); ++b) {
        const BBox& box = grid.boxes[b];
        int x0 = std::max(0, static_cast<int>(std::ceil(box.x - 0.5)));
        int x1 = std::min(width, static_cast<int>(std::ceil(box.x + box.w - 0.5)));
        int y0 = std::max(0, static_cast<int>(std::ceil(box.y - 0.5)));
        int y1 = std::min(height, static_cast<int>(std::ceil(box.y + box.h - 0.5)));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                heat[static_cast<size_t>(y) * width + x] += probs[b];
            }
        }
    }
    return heat;
}

// ---- metrics --------------------------------------------------------------------

namespace {

double gain_of(double relevance, bool exponential_gain) {
    return exponential_gain ? std::exp2(relevance) - 1.0 : relevance;
}

}  // namespace

double ndcg(const RankedList& ranked, const std::map<std::string, double>& gains, size_t k,
            bool exponential_gain) {
    double dcg = 0.0;
    for (size_t i = 0; i < ranked.items.size() && i < k; ++i) {
        auto it = gains.find(ranked.items[i].id);
        if (it != gains.end()) {
            dcg += gain_of(it->second, exponential_gain) / std::log2(i + 2.0);
        }
    }
    std::vector<double> ideal;
    for (const auto& [id, relevance] : gains) ideal.push_back(gain_of(relevance, exponential_gain));
    std::sort(ideal.begin(), ideal.end(), std::greater<>());
    double idcg = 0.0;
    for (size_t i = 0; i < ideal.size() && i < k; ++i) idcg += ideal[i] / std::log2(i + 2.0);
    return idcg > 0.0 ? dcg / idcg : 0.0;
}

double avg_ndcg_objects(const std::map<std::string, RankedList>& results,
                        std::span<const AnnotationRecord> annotations, size_t k) {
    double total = 0.0;
    size_t images = 0;
    for (const auto& [image_id, ranked] : results) {
        std::set<std::string> annotators;
        for (const auto& a : annotations) {
            if (a.image_id == image_id) annotators.insert(a.annotator_id);
        }
        if (annotators.empty()) continue;
        double image_total = 0.0;
        for (const std::string& annotator : annotators) {
            std::map<std::string, double> gains;
            for (const auto& a : annotations) {
                if (a.image_id == image_id && a.annotator_id == annotator) {
                    gains[a.category] = a.preference;
                }
            }
            image_total += ndcg(ranked, gains, k);
        }
        total += image_total / static_cast<double>(annotators.size());
        ++images;
    }
    return images > 0 ? total / static_cast<double>(images) : 0.0;
}

double avg_ndcg_scenes(const std::map<std::string, RankedList>& results,
                       std::span<const AnnotationRecord> annotations, size_t k) {
    if (results.empty()) return 0.0;
    double total = 0.0;
    for (const auto& [category, ranked] : results) {
        std::map<std::string, double> gains;
        std::set<std::string> images;
        for (const auto& a : annotations) {
            if (a.category == category) images.insert(a.image_id);
        }
        for (const std::string& image_id : images) {
            double sum = 0.0;
            int count = 0;
            for (const auto& a : annotations) {
                if (a.category == category && a.image_id == image_id) {
                    sum += a.preference;
                    ++count;
                }
            }
            gains[image_id] = sum / count;
        }
        total += ndcg(ranked, gains, k);
    }
    return total / static_cast<double>(results.size());
}

namespace {

// Per-category mean over annotated images of a per-image term; images with no
// prediction are skipped, exactly like the library's aggregation contract.
template <typename Value, typename Term>
std::map<std::string, double> per_category(std::span<const AnnotationRecord> annotations,
                                           const std::map<std::pair<std::string, std::string>,
                                                          Value>& predictions,
                                           Term term) {
    std::set<std::string> categories;
    for (const auto& a : annotations) categories.insert(a.category);

    std::map<std::string, double> out;
    for (const std::string& category : categories) {
        std::set<std::string> images;
        for (const auto& a : annotations) {
            if (a.category == category) images.insert(a.image_id);
        }
        double total = 0.0;
        size_t counted = 0;
        for (const std::string& image_id : images) {
            auto it = predictions.find({image_id, category});
            if (it == predictions.end()) continue;
            std::vector<const AnnotationRecord*> records;
            for (const auto& a : annotations) {
                if (a.category == category && a.image_id == image_id) records.push_back(&a);
            }
            total += term(records, it->second);
            ++counted;
        }
        if (counted > 0) out[category] = total / static_cast<double>(counted);
    }
    return out;
}

}  // namespace

std::map<std::string, double> iou_size(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, double>& predicted_sizes) {
    return per_category(annotations, predicted_sizes,
                        [](const std::vector<const AnnotationRecord*>& records, double size) {
                            double total = 0.0;
                            for (const AnnotationRecord* a : records) {
                                double lo = std::min(a->box_size, size);
                                double hi = std::max(a->box_size, size);
                                total += hi > 0.0 ? lo / hi : 0.0;
                            }
                            return total / static_cast<double>(records.size());
                        });
}

std::map<std::string, LocAccuracy> accuracy_loc(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, BBox>& best_boxes) {
    std::map<std::string, std::pair<double, double>> sums;
    std::map<std::string, double> frac =
        per_category(annotations, best_boxes,
                     [&](const std::vector<const AnnotationRecord*>& records, const BBox& box) {
                         double frac_total = 0.0;
                         for (const AnnotationRecord* a : records) {
                             const RegionMask& mask = a->region;
                             int x0 = static_cast<int>(std::ceil(box.x - 0.5));
                             int x1 = static_cast<int>(std::ceil(box.x + box.w - 0.5));
                             int y0 = static_cast<int>(std::ceil(box.y - 0.5));
                             int y1 = static_cast<int>(std::ceil(box.y + box.h - 0.5));
                             long inside = 0;
                             long npix = 0;
                             for (int y = y0; y < y1; ++y) {
                                 for (int x = x0; x < x1; ++x) {
                                     ++npix;
                                     if (x >= 0 && x < mask.width && y >= 0 && y < mask.height &&
                                         mask.at(x, y)) {
                                         ++inside;
                                     }
                                 }
                             }
                             frac_total += npix > 0 ? static_cast<double>(inside) / npix : 0.0;
                         }
                         return frac_total / static_cast<double>(records.size());
                     });
    std::map<std::string, double> strict =
        per_category(annotations, best_boxes,
                     [&](const std::vector<const AnnotationRecord*>& records, const BBox& box) {
                         double strict_total = 0.0;
                         for (const AnnotationRecord* a : records) {
                             const RegionMask& mask = a->region;
                             int x0 = static_cast<int>(std::ceil(box.x - 0.5));
                             int x1 = static_cast<int>(std::ceil(box.x + box.w - 0.5));
                             int y0 = static_cast<int>(std::ceil(box.y - 0.5));
                             int y1 = static_cast<int>(std::ceil(box.y + box.h - 0.5));
                             bool contained = x1 > x0 && y1 > y0;
                             for (int y = y0; y < y1 && contained; ++y) {
                                 for (int x = x0; x < x1 && contained; ++x) {
                                     if (x < 0 || x >= mask.width || y < 0 || y >= mask.height ||
                                         !mask.at(x, y)) {
                                         contained = false;
                                     }
                                 }
                             }
                             strict_total += contained ? 1.0 : 0.0;
                         }
                         return strict_total / static_cast<double>(records.size());
                     });
    std::map<std::string, LocAccuracy> out;
    for (const auto& [category, value] : frac) out[category].fractional = value;
    for (const auto& [category, value] : strict) out[category].strict = value;
    return out;
}

std::map<std::string, double> heatmap_iou(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, Heatmap>& heatmaps) {
    return per_category(
        annotations, heatmaps,
        [](const std::vector<const AnnotationRecord*>& records, const Heatmap& heatmap) {
            size_t n = heatmap.raster.size();
            std::vector<double> g(n, 0.0);
            for (const AnnotationRecord* a : records) {
                for (size_t p = 0; p < n; ++p) g[p] += a->region.bitmap[p] != 0 ? 1.0 : 0.0;
            }
            double gsum = 0.0;
            for (double v : g) gsum += v;
            double hsum = 0.0;
            for (double v : heatmap.raster) hsum += v;
            if (gsum <= 0.0 || hsum <= 0.0) return 0.0;
            double num = 0.0;
            double den = 0.0;
            for (size_t p = 0; p < n; ++p) {
                double gp = g[p] / gsum;
                double hp = heatmap.raster[p] / hsum;
                num += std::min(gp, hp);
                den += std::max(gp, hp);
            }
            return den > 0.0 ? num / den : 0.0;
        });
}

// ---- random fixtures -----------------------------------------------------------

Eigen::Matrix4d random_spd(SeededRng& rng) {
    Eigen::Matrix4d b;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) b(r, c) = rng.uniform(-1.0, 1.0);
    }
    Eigen::Matrix4d gram = b * b.transpose() + 0.5 * Eigen::Matrix4d::Identity();
    Eigen::Vector4d scale;
    for (int i = 0; i < 4; ++i) {
        double sd = rng.uniform(0.05, 0.4);
        scale[i] = sd / std::sqrt(gram(i, i));
    }
    return scale.asDiagonal() * gram * scale.asDiagonal();
}

GmmModel random_gmm(SeededRng& rng, int k) {
    GmmModel gmm;
    double total = 0.0;
    std::vector<double> raw;
    for (int i = 0; i < k; ++i) {
        raw.push_back(rng.uniform(0.2, 1.0));
        total += raw.back();
    }
    for (int i = 0; i < k; ++i) {
        Eigen::Vector4d mean(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
                             rng.uniform(0.2, 2.0), rng.uniform(0.2, 2.0));
        gmm.weights.push_back(raw[static_cast<size_t>(i)] / total);
        gmm.components.emplace_back(mean, random_spd(rng));
    }
    return gmm;
}

ContextModel random_context_model(SeededRng& rng, size_t n_ins, size_t n_ctx, size_t n_rel, int k,
                                  bool full_table) {
    std::vector<std::string> ins, ctx, rel;
    for (size_t i = 0; i < n_ins; ++i) ins.push_back("ins_" + std::to_string(i));
    for (size_t j = 0; j < n_ctx; ++j) ctx.push_back("ctx_" + std::to_string(j));
    for (size_t r = 0; r < n_rel; ++r) rel.push_back("rel_" + std::to_string(r));
    Vocabulary vocab(ins, ctx, rel);

    CountTables counts;
    for (const auto& name : ctx) counts.category[name] = 50 + static_cast<int64_t>(rng.index(100));
    for (const auto& name : ins) counts.category[name] = 10 + static_cast<int64_t>(rng.index(50));

    std::vector<TripleGmm> gmms;
    for (const auto& c : ins) {
        for (const auto& r : rel) {
            for (const auto& j : ctx) {
                if (!full_table && rng.uniform() > 0.6 && !gmms.empty()) continue;
                TripleKey key{c, r, j};
                int64_t count = 1 + static_cast<int64_t>(rng.index(20));
                counts.triple[key] = count;
                counts.pair[{std::min(c, j), std::max(c, j)}] += count;
                TripleGmm entry;
                entry.key = key;
                entry.context_weight =
                    static_cast<double>(count) / static_cast<double>(counts.category[j]);
                entry.gmm = random_gmm(rng, k);
                gmms.push_back(std::move(entry));
            }
        }
    }
    return ContextModel(std::move(vocab), std::move(counts), std::move(gmms), ScorerConfig{},
                        FitConfig{});
}

SceneDetections random_scene(SeededRng& rng, const Vocabulary& vocab, int width, int height,
                             size_t n_detections) {
    SceneDetections scene;
    scene.image_id = "random_scene";
    scene.width = width;
    scene.height = height;
    for (size_t i = 0; i < n_detections; ++i) {
        DetectedObject det;
        double w = rng.uniform(0.05, 0.5) * width;
        double h = rng.uniform(0.05, 0.5) * height;
        det.box = {rng.uniform(0.0, width - w), rng.uniform(0.0, height - h), w, h};
        for (size_t j = 0; j < vocab.context().size(); ++j) det.scores.push_back(rng.uniform());
        scene.detections.push_back(std::move(det));
    }
    return scene;
}

CandidateGrid random_grid(SeededRng& rng, int width, int height, size_t n) {
    CandidateGrid grid;
    for (size_t i = 0; i < n; ++i) {
        double w = rng.uniform(0.02, 0.4) * width;
        double h = rng.uniform(0.02, 0.4) * height;
        grid.boxes.push_back({rng.uniform(0.0, width - w), rng.uniform(0.0, height - h), w, h});
    }
    return grid;
}

}  // namespace oracle
