#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxinsert/corpus.hpp"
#include "ctxinsert/gmm.hpp"
#include "ctxinsert/rank_eval.hpp"
#include "ctxinsert/scene.hpp"

namespace ctxinsert {

// One planted (subject, relation, object) triple together with the generative
// mixture its pair features are drawn from.  Triples whose planted box cannot
// appear inside a test image (e.g. deliberately off-screen "dead" pairings that
// only pad the training corpus) should set in_test = false.
struct PlantedTriple {
    TripleKey key;
    GmmModel gmm;
    bool in_test = true;
};

// Full description of a synthetic world.  Everything downstream (corpus, test
// scenes, annotations, ground truth) is a deterministic function of this spec.
struct SynthSpec {
    uint64_t seed = 7;
    int n_train_images = 2000;
    int n_test_scenes = 100;
    int width = 256;   // image width used for both corpus and test scenes
    int height = 192;  // image height

    std::vector<std::string> insertable;
    std::vector<std::string> context;
    std::vector<PlantedTriple> triples;

    double noise = 0.1;            // detector score perturbation in [0, 1]
    double distractor_rate = 0.3;  // fraction of corpus images with an unrelated extra object

    // Reference world used by the CLI and the end-to-end tests: two insertable
    // categories, two context categories, two relations.  Each insertable has
    // one well-placed triple (used for test scenes) and one off-screen triple
    // that only adds training mass.
    static SynthSpec standard(uint64_t seed);
};

// Ground truth for one test scene: the category the scene was built for and
// the box at the planted mixture's dominant mean (internal coordinates).
struct TruthRecord {
    std::string image_id;
    std::string category;
    std::string context;
    BBox box;
};

struct SynthFixture {
    std::vector<SceneGraphRecord> corpus;
    std::vector<SceneDetections> test_scenes;
    std::vector<std::string> context_names;  // column order of test-scene score vectors
    std::vector<AnnotationRecord> annotations;
    std::vector<TruthRecord> truth;
};

// Generates the fixture in memory.  Throws ValidationError on an unusable spec
// (no triples, vocabulary mismatches, noise outside [0, 1], planted boxes that
// can never fit inside a test image).
SynthFixture gen_synthetic(const SynthSpec& spec);

// Writes corpus.jsonl, detections.jsonl, annotations.jsonl (+ masks/*.pgm) and
// truth.json under `dir`.  Output bytes depend only on the fixture contents.
void write_fixture_tree(const SynthFixture& fixture, const std::filesystem::path& dir);

}  // namespace ctxinsert
