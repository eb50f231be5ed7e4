#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ctxinsert/geometry.hpp"

namespace ctxinsert {

// Ordered category and relation name tables. List order defines the index
// space used by score vectors, count tables and score matrices.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> insertable, std::vector<std::string> context,
               std::vector<std::string> relations);

    const std::vector<std::string>& insertable() const { return insertable_; }
    const std::vector<std::string>& context() const { return context_; }
    const std::vector<std::string>& relations() const { return relations_; }

    // Index of the name within the respective list, or -1 when absent.
    int insertable_index(const std::string& name) const;
    int context_index(const std::string& name) const;
    int relation_index(const std::string& name) const;

    bool operator==(const Vocabulary& other) const {
        return insertable_ == other.insertable_ && context_ == other.context_ &&
               relations_ == other.relations_;
    }

private:
    std::vector<std::string> insertable_;
    std::vector<std::string> context_;
    std::vector<std::string> relations_;
    std::unordered_map<std::string, int> insertable_index_;
    std::unordered_map<std::string, int> context_index_;
    std::unordered_map<std::string, int> relation_index_;
};

// One detector output: a box plus a dense score vector over the context
// vocabulary (entry j approximates P(category_j | box, image)).
struct DetectedObject {
    BBox box;
    std::vector<double> scores;

    double max_score() const;
};

struct SceneDetections {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<DetectedObject> detections;
};

// Keeps detections whose maximum context score is >= threshold; if more than
// max_n survive, keeps the max_n best. Output is ordered by descending max
// score with ties resolved by input order.
SceneDetections filter_detections(const SceneDetections& scene, double threshold, size_t max_n);

}  // namespace ctxinsert
