#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctxinsert/corpus.hpp"
#include "ctxinsert/gmm.hpp"
#include "ctxinsert/scene.hpp"

namespace ctxinsert {

// Configuration echoed into trained models so scoring reproduces the training
// assumptions: detector threshold, context cap, candidate scales and stride,
// and the size-refinement grid resolution.
struct ScorerConfig {
    double det_threshold = 0.4;
    int max_context = 20;
    std::vector<double> scales = {1.0 / 8.0, 1.0 / 16.0};
    double stride_ratio = 0.5;
    int refine_values = 32;
};

struct TripleGmm {
    TripleKey key;
    // count(subject, relation, object) / count(object): the evidence weight
    // of this triple per unit of detector confidence in the object category.
    double context_weight = 0.0;
    GmmModel gmm;
};

// Candidate boxes for one image: square sliding windows over a set of scales.
struct ScaleBlock {
    double window = 0.0;
    double stride = 0.0;
    int nx = 0;
    int ny = 0;
    size_t first = 0;  // index of the block's first box
};

struct CandidateGrid {
    std::vector<BBox> boxes;
    std::vector<ScaleBlock> blocks;
};

// Square windows of side scale·max(width,height) placed at stride multiples;
// a scale contributes no boxes when its window exceeds either dimension.
CandidateGrid sample_candidates(double width, double height, std::span<const double> scales,
                                double stride_ratio);

// Unnormalized joint scores: rows = candidate boxes, columns = insertable
// categories. Column-major storage so per-category slices are contiguous.
class ScoreMatrix {
public:
    ScoreMatrix() = default;
    ScoreMatrix(size_t n_boxes, size_t n_categories)
        : n_boxes_(n_boxes), n_categories_(n_categories), data_(n_boxes * n_categories, 0.0) {}

    size_t n_boxes() const { return n_boxes_; }
    size_t n_categories() const { return n_categories_; }

    double at(size_t box, size_t category) const { return data_[category * n_boxes_ + box]; }
    double& at(size_t box, size_t category) { return data_[category * n_boxes_ + box]; }

    std::span<const double> category_column(size_t category) const {
        return {data_.data() + category * n_boxes_, n_boxes_};
    }
    std::span<double> category_column(size_t category) {
        return {data_.data() + category * n_boxes_, n_boxes_};
    }

    // The per-image normalizer Z.
    double total() const;

private:
    size_t n_boxes_ = 0;
    size_t n_categories_ = 0;
    std::vector<double> data_;
};

// Trained model: vocabulary, count tables and one mixture per observed
// triple, plus flattened per-component tables used by the scoring hot loop.
class ContextModel {
public:
    ContextModel(Vocabulary vocab, CountTables counts, std::vector<TripleGmm> gmms,
                 ScorerConfig config, FitConfig fit_config);

    const Vocabulary& vocab() const { return vocab_; }
    const CountTables& counts() const { return counts_; }
    const std::vector<TripleGmm>& gmms() const { return gmms_; }
    const ScorerConfig& config() const { return config_; }
    const FitConfig& fit_config() const { return fit_config_; }

    // Internal flattened form, consumed by joint_score.
    struct PackedComponent {
        double mean[4];
        // Rows of L⁻¹ where covariance = L·Lᵀ; lower-triangular entries only.
        double l00, l10, l11, l20, l21, l22, l30, l31, l32, l33;
        double log_const;   // log(weight · normalizer): density = exp(log_const − q/2)
        double inv_trace;   // 1 / trace(covariance); bounds q from below cheaply
    };
    struct PackedTriple {
        int insertable = 0;       // column index the triple feeds
        double context_weight = 0.0;
        size_t comp_begin = 0;
        size_t comp_end = 0;
    };

    const std::vector<PackedComponent>& packed_components() const { return packed_components_; }
    // Triples grouped by the context-category index their evidence comes from.
    const std::vector<std::vector<PackedTriple>>& triples_by_context() const {
        return triples_by_context_;
    }

private:
    Vocabulary vocab_;
    CountTables counts_;
    std::vector<TripleGmm> gmms_;
    ScorerConfig config_;
    FitConfig fit_config_;
    std::vector<PackedComponent> packed_components_;
    std::vector<std::vector<PackedTriple>> triples_by_context_;
};

// S(B,C) = Σ over detections Bi, context categories Cj and relations r of
// context_weight(C,r,Cj) · mixture density at f(B,Bi) · score_i[Cj].
// Detections contribute independently; an all-zero matrix means the scene
// carries no usable context evidence.
ScoreMatrix joint_score(const SceneDetections& scene, const CandidateGrid& grid,
                        const ContextModel& model);

// Entries divided by Z so they form a distribution; nullopt when Z == 0
// (zero evidence — callers fall back to uniform ranking).
std::optional<ScoreMatrix> normalize_joint(const ScoreMatrix& sm);

// Per-category sums of a normalized matrix.
std::vector<double> marginal_category(const ScoreMatrix& normalized);

// Column for one category renormalized to sum 1; nullopt when the column is
// all zero (zero evidence for that category).
std::optional<std::vector<double>> conditional_box(const ScoreMatrix& sm, size_t category);

// Searches square boxes centered on `best` with sides k/n_values of the
// largest window scale, clipped to the image; returns the highest-scoring
// size, preferring smaller sides on ties.
BBox refine_size(const SceneDetections& scene, const ContextModel& model, size_t category,
                 const BBox& best, int n_values);

struct Heatmap {
    std::string image_id;
    std::string category;
    int width = 0;
    int height = 0;
    // Row-major, row 0 at the bottom (y-up, like all internal geometry).
    std::vector<double> raster;

    double at(int x, int y) const { return raster[static_cast<size_t>(y) * width + x]; }
    double& at(int x, int y) { return raster[static_cast<size_t>(y) * width + x]; }
};

// heat(p) = Σ over boxes containing p of box_probs; a pixel is contained when
// its center lies in [x, x+w) × [y, y+h). Runs in O(#boxes + width·height)
// via a 2-D difference array.
Heatmap rasterize_heatmap(const CandidateGrid& grid, std::span<const double> box_probs, int width,
                          int height);

}  // namespace ctxinsert
