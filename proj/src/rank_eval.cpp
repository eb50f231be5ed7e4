#include "ctxinsert/rank_eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/log.hpp"
#include "ctxinsert/parallel.hpp"

namespace ctxinsert {

namespace {

// image_id → annotator_id → that annotator's records for the image
using ImageAnnotators =
    std::map<std::string, std::map<std::string, std::vector<const AnnotationRecord*>>>;
// category → image_id → all annotator records for (image, category)
using CategoryImages =
    std::map<std::string, std::map<std::string, std::vector<const AnnotationRecord*>>>;

ImageAnnotators group_by_image(std::span<const AnnotationRecord> annotations) {
    ImageAnnotators index;
    for (const auto& a : annotations) index[a.image_id][a.annotator_id].push_back(&a);
    return index;
}

CategoryImages group_by_category(std::span<const AnnotationRecord> annotations) {
    CategoryImages index;
    for (const auto& a : annotations) index[a.category][a.image_id].push_back(&a);
    return index;
}

double gain_value(double relevance, const NdcgOptions& options) {
    return options.exponential_gain ? std::exp2(relevance) - 1.0 : relevance;
}

size_t argmax_index(std::span<const double> values) {
    size_t best = 0;
    for (size_t i = 1; i < values.size(); ++i) {
        if (values[i] > values[best]) best = i;
    }
    return best;
}

}  // namespace

void sort_ranked(std::vector<RankedItem>& items) {
    std::sort(items.begin(), items.end(), [](const RankedItem& a, const RankedItem& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
}

RankedList rank_objects(const SceneDetections& scene, const ContextModel& model,
                        const CandidateGrid& grid) {
    const auto& categories = model.vocab().insertable();
    SceneDetections filtered = filter_detections(scene, model.config().det_threshold,
                                                 static_cast<size_t>(model.config().max_context));
    ScoreMatrix sm = joint_score(filtered, grid, model);
    auto normalized = normalize_joint(sm);

    RankedList out;
    out.items.reserve(categories.size());
    if (!normalized.has_value()) {
        logging::warn("rank_objects: no context evidence for image '" + scene.image_id +
                      "'; falling back to a uniform ranking");
        double uniform = 1.0 / static_cast<double>(categories.size());
        for (const auto& name : categories) out.items.push_back({name, uniform});
        out.zero_evidence = true;
    } else {
        std::vector<double> marginal = marginal_category(*normalized);
        for (size_t c = 0; c < categories.size(); ++c) {
            out.items.push_back({categories[c], marginal[c]});
        }
    }
    sort_ranked(out.items);
    return out;
}

RankedList retrieve_scenes(const std::string& category, std::span<const SceneDetections> scenes,
                           const ContextModel& model, const RetrieveOptions& options) {
    if (scenes.empty()) throw ValidationError("retrieve_scenes: scene list must not be empty");
    int c = model.vocab().insertable_index(category);
    if (c < 0) {
        throw ValidationError("retrieve_scenes: category '" + category +
                              "' is not an insertable category of the model");
    }

    std::vector<double> scores(scenes.size(), 0.0);
    parallel_for(scenes.size(), options.n_threads, [&](size_t i) {
        const SceneDetections& scene = scenes[i];
        CandidateGrid grid = sample_candidates(scene.width, scene.height, model.config().scales,
                                               model.config().stride_ratio);
        SceneDetections filtered =
            filter_detections(scene, model.config().det_threshold,
                              static_cast<size_t>(model.config().max_context));
        ScoreMatrix sm = joint_score(filtered, grid, model);
        if (options.raw_sums) {
            auto column = sm.category_column(static_cast<size_t>(c));
            double sum = 0.0;
            for (double v : column) sum += v;
            scores[i] = sum;
        } else {
            auto normalized = normalize_joint(sm);
            scores[i] =
                normalized.has_value() ? marginal_category(*normalized)[static_cast<size_t>(c)] : 0.0;
        }
    });

    RankedList out;
    out.items.reserve(scenes.size());
    for (size_t i = 0; i < scenes.size(); ++i) out.items.push_back({scenes[i].image_id, scores[i]});
    sort_ranked(out.items);
    return out;
}

RankedBoxes rank_boxes(const SceneDetections& scene, const ContextModel& model,
                       const CandidateGrid& grid, const std::string& category) {
    int c = model.vocab().insertable_index(category);
    if (c < 0) {
        throw ValidationError("rank_boxes: category '" + category +
                              "' is not an insertable category of the model");
    }
    SceneDetections filtered = filter_detections(scene, model.config().det_threshold,
                                                 static_cast<size_t>(model.config().max_context));
    ScoreMatrix sm = joint_score(filtered, grid, model);
    auto probs = conditional_box(sm, static_cast<size_t>(c));

    RankedBoxes out;
    out.items.reserve(grid.boxes.size());
    if (!probs.has_value()) {
        logging::warn("rank_boxes: no evidence for category '" + category + "' in image '" +
                      scene.image_id + "'; falling back to a uniform ranking");
        double uniform = grid.boxes.empty() ? 0.0 : 1.0 / static_cast<double>(grid.boxes.size());
        for (size_t b = 0; b < grid.boxes.size(); ++b) out.items.emplace_back(b, uniform);
        out.zero_evidence = true;
        return out;
    }
    for (size_t b = 0; b < grid.boxes.size(); ++b) out.items.emplace_back(b, (*probs)[b]);
    std::sort(out.items.begin(), out.items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return out;
}

std::vector<double> boc_scores(const SceneDetections& scene, const Vocabulary& vocab,
                               const CountTables& counts, double threshold) {
    SceneDetections filtered =
        filter_detections(scene, threshold, std::numeric_limits<size_t>::max());
    std::vector<double> scores(vocab.insertable().size(), 0.0);
    for (const auto& det : filtered.detections) {
        if (det.scores.size() != vocab.context().size()) {
            throw ContractViolationError(
                "boc_scores: detection score vector does not match the context vocabulary");
        }
        if (!(det.max_score() > 0.0)) continue;  // nothing to hard-label
        const std::string& label = vocab.context()[argmax_index(det.scores)];
        for (size_t c = 0; c < scores.size(); ++c) {
            scores[c] += static_cast<double>(counts.pair_count(vocab.insertable()[c], label));
        }
    }
    return scores;
}

RankedList boc_rank_objects(const SceneDetections& scene, const Vocabulary& vocab,
                            const CountTables& counts, double threshold) {
    std::vector<double> scores = boc_scores(scene, vocab, counts, threshold);
    RankedList out;
    out.items.reserve(scores.size());
    for (size_t c = 0; c < scores.size(); ++c) {
        out.items.push_back({vocab.insertable()[c], scores[c]});
    }
    double total = 0.0;
    for (double s : scores) total += s;
    out.zero_evidence = !(total > 0.0);
    sort_ranked(out.items);
    return out;
}

double ndcg_at_k(const RankedList& ranked, const std::map<std::string, double>& gains, size_t k,
                 const NdcgOptions& options) {
    if (k < 1) throw ValidationError("ndcg_at_k: k must be at least 1");

    double dcg = 0.0;
    size_t depth = std::min(k, ranked.items.size());
    for (size_t i = 0; i < depth; ++i) {
        auto it = gains.find(ranked.items[i].id);
        if (it == gains.end()) continue;
        dcg += gain_value(it->second, options) / std::log2(static_cast<double>(i) + 2.0);
    }

    std::vector<double> ideal;
    ideal.reserve(gains.size());
    for (const auto& [id, relevance] : gains) ideal.push_back(gain_value(relevance, options));
    std::sort(ideal.begin(), ideal.end(), std::greater<double>());
    double idcg = 0.0;
    for (size_t i = 0; i < std::min(k, ideal.size()); ++i) {
        idcg += ideal[i] / std::log2(static_cast<double>(i) + 2.0);
    }
    if (!(idcg > 0.0)) return 0.0;
    return dcg / idcg;
}

double avg_ndcg_objects(const std::map<std::string, RankedList>& results_per_image,
                        std::span<const AnnotationRecord> annotations, size_t k,
                        const NdcgOptions& options) {
    ImageAnnotators index = group_by_image(annotations);
    double total = 0.0;
    size_t evaluated = 0;
    for (const auto& [image_id, ranked] : results_per_image) {
        auto it = index.find(image_id);
        if (it == index.end() || it->second.empty()) {
            logging::info("avg_ndcg_objects: image '" + image_id +
                          "' has no annotations and is excluded");
            continue;
        }
        double image_total = 0.0;
        for (const auto& [annotator, records] : it->second) {
            std::map<std::string, double> gains;
            for (const AnnotationRecord* r : records) {
                gains[r->category] = static_cast<double>(r->preference);
            }
            image_total += ndcg_at_k(ranked, gains, k, options);
        }
        total += image_total / static_cast<double>(it->second.size());
        ++evaluated;
    }
    if (evaluated == 0) {
        logging::warn("avg_ndcg_objects: no image had both results and annotations");
        return 0.0;
    }
    return total / static_cast<double>(evaluated);
}

double avg_ndcg_scenes(const std::map<std::string, RankedList>& results_per_category,
                       std::span<const AnnotationRecord> annotations, size_t k,
                       const NdcgOptions& options) {
    if (results_per_category.empty()) return 0.0;
    // Mean preference per (category, image) pools annotators, whose identity
    // sets differ across images.
    std::map<std::string, std::map<std::string, std::pair<double, int>>> pooled;
    for (const auto& a : annotations) {
        auto& cell = pooled[a.category][a.image_id];
        cell.first += static_cast<double>(a.preference);
        cell.second += 1;
    }

    double total = 0.0;
    for (const auto& [category, ranked] : results_per_category) {
        std::map<std::string, double> gains;
        auto it = pooled.find(category);
        if (it != pooled.end()) {
            for (const auto& [image_id, cell] : it->second) {
                gains[image_id] = cell.first / static_cast<double>(cell.second);
            }
        }
        total += ndcg_at_k(ranked, gains, k, options);
    }
    return total / static_cast<double>(results_per_category.size());
}

double image_iou_size(const std::vector<const AnnotationRecord*>& annotators,
                      double predicted_size) {
    if (annotators.empty()) return 0.0;
    double total = 0.0;
    for (const AnnotationRecord* a : annotators) {
        double lo = std::min(a->box_size, predicted_size);
        double hi = std::max(a->box_size, predicted_size);
        total += hi > 0.0 ? lo / hi : 0.0;
    }
    return total / static_cast<double>(annotators.size());
}

LocAccuracy image_accuracy_loc(const std::vector<const AnnotationRecord*>& annotators,
                               const BBox& box) {
    if (annotators.empty()) return {};
    const RegionMask& first = annotators.front()->region;
    for (const AnnotationRecord* a : annotators) {
        if (a->region.width != first.width || a->region.height != first.height) {
            throw ContractViolationError(
                "image_accuracy_loc: annotator masks disagree on image dimensions");
        }
    }

    // Box pixels by the center rule; the denominator counts all of them even
    // if the box pokes outside the raster (those pixels can never be covered).
    int x0 = static_cast<int>(std::ceil(box.x - 0.5));
    int x1 = static_cast<int>(std::ceil(box.x + box.w - 0.5));
    int y0 = static_cast<int>(std::ceil(box.y - 0.5));
    int y1 = static_cast<int>(std::ceil(box.y + box.h - 0.5));
    long total_pixels = std::max(0L, static_cast<long>(x1) - x0) *
                        std::max(0L, static_cast<long>(y1) - y0);
    if (total_pixels == 0) return {};

    int cx0 = std::max(x0, 0), cx1 = std::min(x1, first.width);
    int cy0 = std::max(y0, 0), cy1 = std::min(y1, first.height);

    LocAccuracy acc;
    for (const AnnotationRecord* a : annotators) {
        long inside = 0;
        for (int y = cy0; y < cy1; ++y) {
            for (int x = cx0; x < cx1; ++x) {
                if (a->region.at(x, y)) ++inside;
            }
        }
        acc.fractional += static_cast<double>(inside) / static_cast<double>(total_pixels);
        acc.strict += inside == total_pixels ? 1.0 : 0.0;
    }
    acc.fractional /= static_cast<double>(annotators.size());
    acc.strict /= static_cast<double>(annotators.size());
    return acc;
}

double image_heatmap_iou(const std::vector<const AnnotationRecord*>& annotators,
                         const Heatmap& heatmap) {
    if (annotators.empty()) return 0.0;
    for (const AnnotationRecord* a : annotators) {
        if (a->region.width != heatmap.width || a->region.height != heatmap.height) {
            throw ContractViolationError(
                "image_heatmap_iou: mask dimensions do not match the heatmap");
        }
    }

    size_t n = heatmap.raster.size();
    std::vector<double> truth(n, 0.0);
    double truth_sum = 0.0;
    for (const AnnotationRecord* a : annotators) {
        for (size_t i = 0; i < n; ++i) {
            if (a->region.bitmap[i] != 0) {
                truth[i] += 1.0;
                truth_sum += 1.0;
            }
        }
    }
    double heat_sum = 0.0;
    for (double v : heatmap.raster) heat_sum += v;
    if (!(truth_sum > 0.0) || !(heat_sum > 0.0)) return 0.0;

    double min_sum = 0.0, max_sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        double g = truth[i] / truth_sum;
        double h = heatmap.raster[i] / heat_sum;
        min_sum += std::min(g, h);
        max_sum += std::max(g, h);
    }
    return max_sum > 0.0 ? min_sum / max_sum : 0.0;
}

namespace {

// Shared shape of the three bulk metrics: group by category, evaluate one
// value per annotated image, average per category.
template <typename Prediction, typename PerImage>
std::map<std::string, double> per_category_mean(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, Prediction>& predictions,
    const char* metric_name, PerImage per_image) {
    CategoryImages index = group_by_category(annotations);
    std::map<std::string, double> out;
    for (const auto& [category, images] : index) {
        double total = 0.0;
        size_t counted = 0;
        for (const auto& [image_id, records] : images) {
            auto it = predictions.find({image_id, category});
            if (it == predictions.end()) {
                logging::warn(std::string(metric_name) + ": no prediction for image '" + image_id +
                              "', category '" + category + "'; pair skipped");
                continue;
            }
            total += per_image(records, it->second);
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
    return per_category_mean(annotations, predicted_sizes, "iou_size",
                             [](const std::vector<const AnnotationRecord*>& records,
                                double size) { return image_iou_size(records, size); });
}

std::map<std::string, LocAccuracy> accuracy_loc(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, BBox>& best_boxes) {
    CategoryImages index = group_by_category(annotations);
    std::map<std::string, LocAccuracy> out;
    for (const auto& [category, images] : index) {
        LocAccuracy total;
        size_t counted = 0;
        for (const auto& [image_id, records] : images) {
            auto it = best_boxes.find({image_id, category});
            if (it == best_boxes.end()) {
                logging::warn("accuracy_loc: no prediction for image '" + image_id +
                              "', category '" + category + "'; pair skipped");
                continue;
            }
            LocAccuracy value = image_accuracy_loc(records, it->second);
            total.fractional += value.fractional;
            total.strict += value.strict;
            ++counted;
        }
        if (counted > 0) {
            out[category] = {total.fractional / static_cast<double>(counted),
                             total.strict / static_cast<double>(counted)};
        }
    }
    return out;
}

std::map<std::string, double> heatmap_iou(
    std::span<const AnnotationRecord> annotations,
    const std::map<std::pair<std::string, std::string>, Heatmap>& heatmaps) {
    return per_category_mean(annotations, heatmaps, "heatmap_iou",
                             [](const std::vector<const AnnotationRecord*>& records,
                                const Heatmap& h) { return image_heatmap_iou(records, h); });
}

ObjectsReport evaluate_objects(std::span<const SceneDetections> scenes,
                               std::span<const AnnotationRecord> annotations,
                               const ContextModel& model, size_t k, bool baseline_boc,
                               size_t n_threads) {
    std::vector<RankedList> ranked(scenes.size());
    parallel_for(scenes.size(), n_threads, [&](size_t i) {
        if (baseline_boc) {
            ranked[i] = boc_rank_objects(scenes[i], model.vocab(), model.counts(),
                                         model.config().det_threshold);
        } else {
            CandidateGrid grid = sample_candidates(scenes[i].width, scenes[i].height,
                                                   model.config().scales,
                                                   model.config().stride_ratio);
            ranked[i] = rank_objects(scenes[i], model, grid);
        }
    });

    ObjectsReport report;
    report.k = k;
    report.baseline_boc = baseline_boc;
    std::map<std::string, RankedList> results;
    for (size_t i = 0; i < scenes.size(); ++i) {
        if (ranked[i].zero_evidence) ++report.zero_evidence_scenes;
        results[scenes[i].image_id] = std::move(ranked[i]);
    }

    ImageAnnotators index = group_by_image(annotations);
    for (const auto& [image_id, lists] : results) {
        if (index.count(image_id) > 0) {
            ++report.images_evaluated;
        } else {
            ++report.images_without_annotations;
        }
    }
    report.avg_ndcg = avg_ndcg_objects(results, annotations, k);
    return report;
}

ScenesReport evaluate_scenes(std::span<const SceneDetections> scenes,
                             std::span<const AnnotationRecord> annotations,
                             const ContextModel& model, size_t k, bool baseline_boc,
                             size_t n_threads) {
    const auto& categories = model.vocab().insertable();

    // One pass computes every category's score for a scene; per-category
    // rankings are then assembled without re-scoring.
    std::vector<std::vector<double>> scores(scenes.size());
    parallel_for(scenes.size(), n_threads, [&](size_t i) {
        if (baseline_boc) {
            scores[i] = boc_scores(scenes[i], model.vocab(), model.counts(),
                                   model.config().det_threshold);
            return;
        }
        CandidateGrid grid = sample_candidates(scenes[i].width, scenes[i].height,
                                               model.config().scales, model.config().stride_ratio);
        SceneDetections filtered =
            filter_detections(scenes[i], model.config().det_threshold,
                              static_cast<size_t>(model.config().max_context));
        ScoreMatrix sm = joint_score(filtered, grid, model);
        auto normalized = normalize_joint(sm);
        scores[i] = normalized.has_value() ? marginal_category(*normalized)
                                           : std::vector<double>(categories.size(), 0.0);
    });

    ScenesReport report;
    report.k = k;
    report.baseline_boc = baseline_boc;
    std::map<std::string, RankedList> results;
    for (size_t c = 0; c < categories.size(); ++c) {
        RankedList list;
        list.items.reserve(scenes.size());
        for (size_t i = 0; i < scenes.size(); ++i) {
            list.items.push_back({scenes[i].image_id, scores[i][c]});
        }
        sort_ranked(list.items);
        results[categories[c]] = std::move(list);
    }

    for (const auto& [category, ranked] : results) {
        std::map<std::string, RankedList> single;
        single[category] = ranked;
        report.per_category[category] = avg_ndcg_scenes(single, annotations, k);
    }
    report.avg_ndcg = avg_ndcg_scenes(results, annotations, k);
    return report;
}

BoxesReport evaluate_boxes(std::span<const SceneDetections> scenes,
                           std::span<const AnnotationRecord> annotations,
                           const ContextModel& model, bool refine, size_t n_threads) {
    ImageAnnotators by_image = group_by_image(annotations);
    CategoryImages by_category = group_by_category(annotations);

    // category → (image_id, annotator records) present in the scene list
    std::map<std::string, std::map<std::string, std::vector<const AnnotationRecord*>>> wanted;
    std::map<std::string, const SceneDetections*> scene_by_id;
    for (const auto& scene : scenes) scene_by_id.emplace(scene.image_id, &scene);
    for (const auto& [category, images] : by_category) {
        if (model.vocab().insertable_index(category) < 0) {
            logging::warn("evaluate_boxes: annotated category '" + category +
                          "' is not insertable in this model; skipped");
            continue;
        }
        for (const auto& [image_id, records] : images) {
            if (scene_by_id.count(image_id) == 0) {
                logging::warn("evaluate_boxes: annotated image '" + image_id +
                              "' is missing from the detections; skipped");
                continue;
            }
            wanted[category][image_id] = records;
        }
    }

    struct PairResult {
        std::string category;
        double iou_size = 0.0;
        LocAccuracy loc;
        double heat_iou = 0.0;
        bool zero_evidence = false;
    };
    struct SceneTask {
        const SceneDetections* scene = nullptr;
        std::vector<std::pair<std::string, std::vector<const AnnotationRecord*>>> categories;
        std::vector<PairResult> results;
    };

    std::map<std::string, SceneTask> tasks;
    for (const auto& [category, images] : wanted) {
        for (const auto& [image_id, records] : images) {
            SceneTask& task = tasks[image_id];
            task.scene = scene_by_id.at(image_id);
            task.categories.emplace_back(category, records);
        }
    }
    std::vector<SceneTask*> task_list;
    task_list.reserve(tasks.size());
    for (auto& [id, task] : tasks) task_list.push_back(&task);

    parallel_for(task_list.size(), n_threads, [&](size_t t) {
        SceneTask& task = *task_list[t];
        const SceneDetections& scene = *task.scene;
        CandidateGrid grid = sample_candidates(scene.width, scene.height, model.config().scales,
                                               model.config().stride_ratio);
        SceneDetections filtered =
            filter_detections(scene, model.config().det_threshold,
                              static_cast<size_t>(model.config().max_context));
        ScoreMatrix sm = joint_score(filtered, grid, model);

        for (const auto& [category, records] : task.categories) {
            size_t c = static_cast<size_t>(model.vocab().insertable_index(category));
            PairResult result;
            result.category = category;

            std::vector<double> probs;
            auto conditional = conditional_box(sm, c);
            if (conditional.has_value()) {
                probs = std::move(*conditional);
            } else {
                result.zero_evidence = true;
                probs.assign(grid.boxes.size(),
                             grid.boxes.empty() ? 0.0 : 1.0 / static_cast<double>(grid.boxes.size()));
            }
            if (grid.boxes.empty()) {
                task.results.push_back(result);
                continue;
            }

            BBox best = grid.boxes[argmax_index(probs)];
            if (refine && !result.zero_evidence) {
                best = refine_size(filtered, model, c, best, model.config().refine_values);
            }
            Heatmap heat = rasterize_heatmap(grid, probs, scene.width, scene.height);

            result.iou_size = image_iou_size(records, best.longer_side());
            result.loc = image_accuracy_loc(records, best);
            result.heat_iou = image_heatmap_iou(records, heat);
            task.results.push_back(result);
        }
    });

    BoxesReport report;
    report.refine = refine;
    report.images_evaluated = task_list.size();

    std::map<std::string, std::array<double, 4>> sums;  // iou, frac, strict, heat
    std::map<std::string, size_t> counts;
    for (const SceneTask* task : task_list) {
        for (const PairResult& r : task->results) {
            if (r.zero_evidence) ++report.zero_evidence_pairs;
            auto& s = sums[r.category];
            s[0] += r.iou_size;
            s[1] += r.loc.fractional;
            s[2] += r.loc.strict;
            s[3] += r.heat_iou;
            ++counts[r.category];
        }
    }
    for (const auto& [category, s] : sums) {
        double n = static_cast<double>(counts[category]);
        report.iou_size_per_category[category] = s[0] / n;
        report.loc_per_category[category] = {s[1] / n, s[2] / n};
        report.heatmap_iou_per_category[category] = s[3] / n;
        report.iou_size_mean += s[0] / n;
        report.loc_fractional_mean += s[1] / n;
        report.loc_strict_mean += s[2] / n;
        report.heatmap_iou_mean += s[3] / n;
    }
    if (!sums.empty()) {
        double n = static_cast<double>(sums.size());
        report.iou_size_mean /= n;
        report.loc_fractional_mean /= n;
        report.loc_strict_mean /= n;
        report.heatmap_iou_mean /= n;
    }
    return report;
}

}  // namespace ctxinsert
