#include "ctxinsert/corpus.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/log.hpp"

namespace ctxinsert {

std::string to_string(const TripleKey& key) {
    return "(" + key.subject + ", " + key.relation + ", " + key.object + ")";
}

int64_t CountTables::category_count(const std::string& name) const {
    auto it = category.find(name);
    return it == category.end() ? 0 : it->second;
}

int64_t CountTables::pair_count(const std::string& a, const std::string& b) const {
    auto key = a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
    auto it = pair.find(key);
    return it == pair.end() ? 0 : it->second;
}

int64_t CountTables::triple_count(const TripleKey& key) const {
    auto it = triple.find(key);
    return it == triple.end() ? 0 : it->second;
}

namespace {

// Records whose relations dangle (or whose related objects carry degenerate
// boxes) are excluded from every statistic so that triple counts and per-
// triple sample lists always agree.
bool record_is_clean(const SceneGraphRecord& record) {
    std::unordered_map<std::string, const SceneGraphObject*> by_id;
    by_id.reserve(record.objects.size());
    for (const auto& obj : record.objects) by_id.emplace(obj.id, &obj);
    for (const auto& rel : record.relations) {
        auto s = by_id.find(rel.subject);
        auto o = by_id.find(rel.object);
        if (s == by_id.end() || o == by_id.end()) return false;
        for (const SceneGraphObject* obj : {s->second, o->second}) {
            if (!box_is_finite(obj->box) || obj->box.w <= 0.0 || obj->box.h <= 0.0) return false;
        }
    }
    return true;
}

void warn_skipped(const char* op, size_t skipped) {
    if (skipped > 0) {
        logging::warn(std::string(op) + ": skipped " + std::to_string(skipped) +
                      " malformed corpus records");
    }
}

// Instance count per category within one record.
std::unordered_map<std::string, int> category_histogram(const SceneGraphRecord& record) {
    std::unordered_map<std::string, int> hist;
    for (const auto& obj : record.objects) ++hist[obj.category];
    return hist;
}

std::vector<std::string> rank_names(const std::unordered_map<std::string, int64_t>& scores,
                                    size_t limit) {
    std::vector<std::pair<std::string, int64_t>> items(scores.begin(), scores.end());
    std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (items.size() > limit) items.resize(limit);
    std::vector<std::string> names;
    names.reserve(items.size());
    for (auto& [name, score] : items) names.push_back(std::move(name));
    return names;
}

}  // namespace

Vocabulary select_vocabulary(std::span<const SceneGraphRecord> corpus,
                             const VocabularyParams& params) {
    if (corpus.empty()) throw EmptyCorpusError("cannot build a vocabulary from an empty corpus");
    if (params.insertable.empty()) throw ValidationError("insertable category list must not be empty");
    if (params.top_context < 1 || params.top_relations < 1) {
        throw ValidationError("top_context and top_relations must be at least 1");
    }

    std::unordered_set<std::string> insertable(params.insertable.begin(), params.insertable.end());
    std::unordered_map<std::string, int64_t> context_score;
    std::unordered_map<std::string, int64_t> relation_score;
    size_t skipped = 0;
    size_t usable = 0;

    for (const auto& record : corpus) {
        if (!record_is_clean(record)) {
            ++skipped;
            continue;
        }
        ++usable;

        auto hist = category_histogram(record);
        for (const auto& [name, count] : hist) {
            int64_t cooc = 0;
            for (const auto& ins : insertable) {
                auto it = hist.find(ins);
                if (it == hist.end()) continue;
                // A category co-occurs with itself only via a second instance.
                if (ins == name ? it->second >= 2 : it->second >= 1) ++cooc;
            }
            context_score[name] += cooc;
        }

        std::unordered_map<std::string, const std::string*> category_by_id;
        for (const auto& obj : record.objects) category_by_id.emplace(obj.id, &obj.category);
        for (const auto& rel : record.relations) {
            if (insertable.count(*category_by_id.at(rel.subject)) > 0) {
                ++relation_score[rel.predicate];
            }
        }
    }
    warn_skipped("select_vocabulary", skipped);
    if (usable == 0) throw EmptyCorpusError("corpus contains no usable records");

    return Vocabulary(params.insertable,
                      rank_names(context_score, static_cast<size_t>(params.top_context)),
                      rank_names(relation_score, static_cast<size_t>(params.top_relations)));
}

CountTables build_counts(std::span<const SceneGraphRecord> corpus, const Vocabulary& vocab) {
    CountTables tables;
    size_t skipped = 0;
    for (const auto& record : corpus) {
        if (!record_is_clean(record)) {
            ++skipped;
            continue;
        }

        auto hist = category_histogram(record);
        for (const auto& [name, count] : hist) {
            if (vocab.insertable_index(name) >= 0 || vocab.context_index(name) >= 0) {
                tables.category[name] += count;
            }
        }

        // Image-level pair counts between an insertable and a context member;
        // one category may satisfy both roles.
        for (auto a = hist.begin(); a != hist.end(); ++a) {
            for (auto b = a; b != hist.end(); ++b) {
                const std::string& x = a->first;
                const std::string& y = b->first;
                if (x == y && a->second < 2) continue;
                bool qualifies =
                    (vocab.insertable_index(x) >= 0 && vocab.context_index(y) >= 0) ||
                    (vocab.insertable_index(y) >= 0 && vocab.context_index(x) >= 0);
                if (!qualifies) continue;
                auto key = x <= y ? std::make_pair(x, y) : std::make_pair(y, x);
                ++tables.pair[key];
            }
        }

        std::unordered_map<std::string, const std::string*> category_by_id;
        for (const auto& obj : record.objects) category_by_id.emplace(obj.id, &obj.category);
        for (const auto& rel : record.relations) {
            TripleKey key{*category_by_id.at(rel.subject), rel.predicate,
                          *category_by_id.at(rel.object)};
            if (vocab.insertable_index(key.subject) >= 0 && vocab.relation_index(key.relation) >= 0 &&
                vocab.context_index(key.object) >= 0) {
                ++tables.triple[key];
            }
        }
    }
    warn_skipped("build_counts", skipped);
    return tables;
}

std::map<TripleKey, TripleSamples> collect_triple_samples(std::span<const SceneGraphRecord> corpus,
                                                          const Vocabulary& vocab,
                                                          CollectStats* stats) {
    std::map<TripleKey, TripleSamples> samples;
    size_t skipped = 0;
    for (const auto& record : corpus) {
        if (!record_is_clean(record)) {
            ++skipped;
            continue;
        }
        std::unordered_map<std::string, const SceneGraphObject*> by_id;
        for (const auto& obj : record.objects) by_id.emplace(obj.id, &obj);
        for (const auto& rel : record.relations) {
            const SceneGraphObject& subject = *by_id.at(rel.subject);
            const SceneGraphObject& object = *by_id.at(rel.object);
            TripleKey key{subject.category, rel.predicate, object.category};
            if (vocab.insertable_index(key.subject) < 0 || vocab.relation_index(key.relation) < 0 ||
                vocab.context_index(key.object) < 0) {
                continue;
            }
            auto& entry = samples[key];
            entry.key = key;
            entry.features.push_back(pair_feature(subject.box, object.box));
        }
    }
    warn_skipped("collect_triple_samples", skipped);
    if (stats != nullptr) stats->skipped_records = skipped;
    return samples;
}

}  // namespace ctxinsert
