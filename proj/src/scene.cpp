#include "ctxinsert/scene.hpp"

#include <algorithm>
#include <numeric>

#include "ctxinsert/errors.hpp"

namespace ctxinsert {

namespace {

std::unordered_map<std::string, int> build_index(const std::vector<std::string>& names,
                                                 const char* list_name) {
    if (names.empty()) {
        throw ValidationError(std::string("vocabulary list '") + list_name + "' must not be empty");
    }
    std::unordered_map<std::string, int> index;
    index.reserve(names.size());
    for (size_t i = 0; i < names.size(); ++i) {
        auto [it, inserted] = index.emplace(names[i], static_cast<int>(i));
        if (!inserted) {
            throw ValidationError(std::string("duplicate name '") + names[i] +
                                  "' in vocabulary list '" + list_name + "'");
        }
    }
    return index;
}

int lookup(const std::unordered_map<std::string, int>& index, const std::string& name) {
    auto it = index.find(name);
    return it == index.end() ? -1 : it->second;
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> insertable, std::vector<std::string> context,
                       std::vector<std::string> relations)
    : insertable_(std::move(insertable)),
      context_(std::move(context)),
      relations_(std::move(relations)),
      insertable_index_(build_index(insertable_, "insertable")),
      context_index_(build_index(context_, "context")),
      relation_index_(build_index(relations_, "relations")) {}

int Vocabulary::insertable_index(const std::string& name) const {
    return lookup(insertable_index_, name);
}

int Vocabulary::context_index(const std::string& name) const {
    return lookup(context_index_, name);
}

int Vocabulary::relation_index(const std::string& name) const {
    return lookup(relation_index_, name);
}

double DetectedObject::max_score() const {
    double best = 0.0;
    for (double s : scores) best = std::max(best, s);
    return best;
}

SceneDetections filter_detections(const SceneDetections& scene, double threshold, size_t max_n) {
    SceneDetections out;
    out.image_id = scene.image_id;
    out.width = scene.width;
    out.height = scene.height;
    if (max_n == 0) return out;

    std::vector<size_t> kept;
    kept.reserve(scene.detections.size());
    for (size_t i = 0; i < scene.detections.size(); ++i) {
        if (scene.detections[i].max_score() >= threshold) kept.push_back(i);
    }
    // Stable sort keeps input order among equal max scores.
    std::stable_sort(kept.begin(), kept.end(), [&](size_t a, size_t b) {
        return scene.detections[a].max_score() > scene.detections[b].max_score();
    });
    if (kept.size() > max_n) kept.resize(max_n);

    out.detections.reserve(kept.size());
    for (size_t i : kept) out.detections.push_back(scene.detections[i]);
    return out;
}

}  // namespace ctxinsert
