#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxinsert/scorer.hpp"

namespace ctxinsert {

// Binary insertable-region raster. Row-major with row 0 at the bottom,
// matching the internal y-up convention (PGM I/O flips rows).
struct RegionMask {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> bitmap;

    bool at(int x, int y) const { return bitmap[static_cast<size_t>(y) * width + x] != 0; }
};

// One human judgment: for (image, category), a preference grade in {1,2}, the
// preferred box size (longer side, pixels) and the allowed insertion region.
struct AnnotationRecord {
    std::string image_id;
    std::string annotator_id;
    std::string category;
    int preference = 1;
    double box_size = 0.0;
    RegionMask region;
};

struct RankedItem {
    std::string id;
    double score = 0.0;
};

// Items in descending score order, ties broken by ascending id. The
// zero_evidence flag marks rankings produced by the uniform fallback.
struct RankedList {
    std::vector<RankedItem> items;
    bool zero_evidence = false;
};

// Candidate-box ranking; indices into the grid, ties broken by ascending index.
struct RankedBoxes {
    std::vector<std::pair<size_t, double>> items;
    bool zero_evidence = false;
};

// Sorts items by (descending score, ascending id) in place.
void sort_ranked(std::vector<RankedItem>& items);

// ---- Subtask rankers -------------------------------------------------------

// Categories ranked by the normalized joint's category marginal. Applies the
// model's detection filter first. Zero evidence yields uniform scores in
// lexicographic order with the flag set.
RankedList rank_objects(const SceneDetections& scene, const ContextModel& model,
                        const CandidateGrid& grid);

struct RetrieveOptions {
    // Compare raw per-image score sums instead of normalized marginals.
    bool raw_sums = false;
    size_t n_threads = 1;
};

// Scenes ranked by the category's normalized marginal probability; scenes
// with zero evidence score 0. Candidate grids are derived per scene from the
// model configuration.
RankedList retrieve_scenes(const std::string& category, std::span<const SceneDetections> scenes,
                           const ContextModel& model, const RetrieveOptions& options = {});

// Candidate boxes ranked by the conditional box distribution for a category.
// Zero evidence yields the uniform distribution with the flag set.
RankedBoxes rank_boxes(const SceneDetections& scene, const ContextModel& model,
                       const CandidateGrid& grid, const std::string& category);

// Bag-of-categories baseline scores over insertable categories: each
// above-threshold detection is hard-labeled with its argmax context category
// and contributes that label's pair co-occurrence count.
std::vector<double> boc_scores(const SceneDetections& scene, const Vocabulary& vocab,
                               const CountTables& counts, double threshold);

RankedList boc_rank_objects(const SceneDetections& scene, const Vocabulary& vocab,
                            const CountTables& counts, double threshold);

// ---- Metrics ---------------------------------------------------------------

struct NdcgOptions {
    // Use 2^rel − 1 gains instead of linear rel.
    bool exponential_gain = false;
};

// DCG@k = Σ_{i=1..k} gain(item_i)/log2(i+1), divided by the ideal DCG of the
// gains map itself; 0 when the ideal DCG is 0.
double ndcg_at_k(const RankedList& ranked, const std::map<std::string, double>& gains, size_t k,
                 const NdcgOptions& options = {});

// Mean over images of the mean per-annotator nDCG of that image's category
// ranking. Images without annotations are excluded (and logged).
double avg_ndcg_objects(const std::map<std::string, RankedList>& results_per_image,
                        std::span<const AnnotationRecord> annotations, size_t k,
                        const NdcgOptions& options = {});

// Mean over categories of the retrieval nDCG, where a scene's gain is the
// mean preference over its annotators for that category.
double avg_ndcg_scenes(const std::map<std::string, RankedList>& results_per_category,
                       std::span<const AnnotationRecord> annotations, size_t k,
                       const NdcgOptions& options = {});

struct LocAccuracy {
    double fractional = 0.0;
    double strict = 0.0;
};

// Per-image metric terms (mean over the annotators of one image); exposed so
// the evaluation driver can stream images without materializing all
// predictions, and so reference tests can target the innermost formulas.
double image_iou_size(const std::vector<const AnnotationRecord*>& annotators,
                      double predicted_size);
LocAccuracy image_accuracy_loc(const std::vector<const AnnotationRecord*>& annotators,
                               const BBox& box);
double image_heatmap_iou(const std::vector<const AnnotationRecord*>& annotators,
                         const Heatmap& heatmap);

// Per-category means over annotated images. Keys of the prediction maps are
// (image_id, category); annotated pairs without predictions are skipped with
// a warning.
std::map<std::string, double> iou_size(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, double>& predicted_sizes);

std::map<std::string, LocAccuracy> accuracy_loc(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, BBox>& best_boxes);

std::map<std::string, double> heatmap_iou(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, Heatmap>& heatmaps);

// ---- Evaluation drivers ----------------------------------------------------

struct ObjectsReport {
    double avg_ndcg = 0.0;
    size_t k = 0;
    size_t images_evaluated = 0;
    size_t images_without_annotations = 0;
    size_t zero_evidence_scenes = 0;
    bool baseline_boc = false;
};

ObjectsReport evaluate_objects(std::span<const SceneDetections> scenes,
                               std::span<const AnnotationRecord> annotations,
                               const ContextModel& model, size_t k, bool baseline_boc,
                               size_t n_threads);

struct ScenesReport {
    double avg_ndcg = 0.0;
    size_t k = 0;
    std::map<std::string, double> per_category;
    bool baseline_boc = false;
};

ScenesReport evaluate_scenes(std::span<const SceneDetections> scenes,
                             std::span<const AnnotationRecord> annotations,
                             const ContextModel& model, size_t k, bool baseline_boc,
                             size_t n_threads);

struct BoxesReport {
    std::map<std::string, double> iou_size_per_category;
    std::map<std::string, LocAccuracy> loc_per_category;
    std::map<std::string, double> heatmap_iou_per_category;
    double iou_size_mean = 0.0;
    double loc_fractional_mean = 0.0;
    double loc_strict_mean = 0.0;
    double heatmap_iou_mean = 0.0;
    size_t images_evaluated = 0;
    size_t zero_evidence_pairs = 0;
    bool refine = false;
};

BoxesReport evaluate_boxes(std::span<const SceneDetections> scenes,
                           std::span<const AnnotationRecord> annotations,
                           const ContextModel& model, bool refine, size_t n_threads);

}  // namespace ctxinsert
