#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "ctxinsert/scene.hpp"

namespace ctxinsert {

struct SceneGraphObject {
    std::string id;
    std::string category;
    BBox box;
};

struct SceneGraphRelation {
    std::string subject;    // object_id of the subject
    std::string predicate;  // relation name
    std::string object;     // object_id of the object
};

struct SceneGraphRecord {
    std::string image_id;
    int width = 0;
    int height = 0;
    std::vector<SceneGraphObject> objects;
    std::vector<SceneGraphRelation> relations;
};

// Ordered (subject category, relation, object category) key. The subject is
// the inserted/insertable side, the object is the context side.
struct TripleKey {
    std::string subject;
    std::string relation;
    std::string object;

    auto operator<=>(const TripleKey&) const = default;
};

std::string to_string(const TripleKey& key);

// Count statistics over a corpus. Absent keys mean zero.
struct CountTables {
    // Instances per category, for every vocabulary member (insertable or context).
    std::map<std::string, int64_t> category;
    // Image-level co-occurrence, stored under the lexicographically sorted
    // name pair. A category pairs with itself only when an image holds at
    // least two of its instances.
    std::map<std::pair<std::string, std::string>, int64_t> pair;
    // Annotated relation instances with insertable subject and context object.
    std::map<TripleKey, int64_t> triple;

    int64_t category_count(const std::string& name) const;
    int64_t pair_count(const std::string& a, const std::string& b) const;
    int64_t triple_count(const TripleKey& key) const;
};

struct TripleSamples {
    TripleKey key;
    std::vector<PairFeature> features;
};

struct VocabularyParams {
    std::vector<std::string> insertable;
    int top_context = 20;
    int top_relations = 10;
};

struct CollectStats {
    size_t skipped_records = 0;
};

// Builds the context and relation vocabularies from corpus statistics:
// context categories ranked by total image-level co-occurrence with the
// insertable set, relations ranked by annotation count over insertable
// subjects; ties resolved by ascending name.
Vocabulary select_vocabulary(std::span<const SceneGraphRecord> corpus,
                             const VocabularyParams& params);

CountTables build_counts(std::span<const SceneGraphRecord> corpus, const Vocabulary& vocab);

// Pairwise features per (subject category, relation, object category) triple,
// for annotations whose subject is insertable, predicate is in the relation
// vocabulary and object is a context category. Records with relations that
// reference missing object ids (or carry degenerate boxes) are skipped whole
// and counted in stats.
std::map<TripleKey, TripleSamples> collect_triple_samples(std::span<const SceneGraphRecord> corpus,
                                                          const Vocabulary& vocab,
                                                          CollectStats* stats = nullptr);

}  // namespace ctxinsert
