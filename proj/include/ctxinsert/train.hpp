#pragma once

#include <span>

#include "ctxinsert/corpus.hpp"
#include "ctxinsert/scorer.hpp"

namespace ctxinsert {

struct TrainParams {
    VocabularyParams vocab;
    FitConfig fit;
    ScorerConfig scorer;
    size_t n_threads = 1;
};

// Full training pipeline: vocabulary selection, count tables, per-triple
// sample collection, and one seeded mixture fit per triple (parallel across
// triples, deterministic regardless of thread count).
ContextModel train_model(std::span<const SceneGraphRecord> corpus, const TrainParams& params);

}  // namespace ctxinsert
