#include "ctxinsert/train.hpp"

#include <vector>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/log.hpp"
#include "ctxinsert/parallel.hpp"
#include "ctxinsert/rng.hpp"

namespace ctxinsert {

ContextModel train_model(std::span<const SceneGraphRecord> corpus, const TrainParams& params) {
    Vocabulary vocab = select_vocabulary(corpus, params.vocab);
    CountTables counts = build_counts(corpus, vocab);
    auto samples = collect_triple_samples(corpus, vocab);

    logging::info("train_model: " + std::to_string(corpus.size()) + " records, " +
                  std::to_string(samples.size()) + " observed triples");

    // Deterministic order: triples sorted by key (std::map order). Each triple
    // fits with a seed derived from its position, so results do not depend on
    // scheduling.
    std::vector<const TripleSamples*> ordered;
    ordered.reserve(samples.size());
    for (const auto& [key, entry] : samples) ordered.push_back(&entry);

    std::vector<TripleGmm> gmms(ordered.size());
    SeededRng base(params.fit.seed);
    std::vector<uint64_t> seeds(ordered.size());
    for (size_t i = 0; i < ordered.size(); ++i) seeds[i] = base.fork(i).seed();

    parallel_for(ordered.size(), params.n_threads, [&](size_t i) {
        const TripleSamples& triple = *ordered[i];
        FitConfig config = params.fit;
        config.seed = seeds[i];
        TripleGmm out;
        out.key = triple.key;
        int64_t object_count = counts.category_count(triple.key.object);
        if (object_count <= 0) {
            throw ContractViolationError("train_model: triple " + to_string(triple.key) +
                                         " references a context category with zero count");
        }
        out.context_weight = static_cast<double>(counts.triple_count(triple.key)) /
                             static_cast<double>(object_count);
        out.gmm = fit_em(triple.features, config);
        gmms[i] = std::move(out);
    });

    return ContextModel(std::move(vocab), std::move(counts), std::move(gmms), params.scorer,
                        params.fit);
}

}  // namespace ctxinsert
