#include "ctxinsert/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <map>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/io.hpp"
#include "ctxinsert/rng.hpp"

namespace ctxinsert {

namespace {

// Category used for corpus-only clutter.  It carries no detector scores and no
// insertable-subject relations, so it can enter the learned context vocabulary
// without contributing any geometry model.
constexpr const char* kDistractorCategory = "floor";

std::string format_id(const char* prefix, size_t index, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s%0*zu", prefix, digits, index);
    return buf;
}

bool contains(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
}

void validate_spec(const SynthSpec& spec) {
    if (spec.triples.empty()) throw ValidationError("synthetic spec plants no triples");
    if (spec.insertable.empty() || spec.context.empty()) {
        throw ValidationError("synthetic spec needs at least one insertable and one context category");
    }
    if (spec.width < 32 || spec.height < 32) {
        throw ValidationError("synthetic images must be at least 32x32");
    }
    if (!(spec.noise >= 0.0 && spec.noise <= 1.0)) {
        throw ValidationError("detector noise level must lie in [0, 1]");
    }
    if (!(spec.distractor_rate >= 0.0 && spec.distractor_rate <= 1.0)) {
        throw ValidationError("distractor rate must lie in [0, 1]");
    }
    bool any_test = false;
    for (const PlantedTriple& t : spec.triples) {
        if (!contains(spec.insertable, t.key.subject)) {
            throw ValidationError("planted triple " + to_string(t.key) +
                                  " has a subject outside the insertable list");
        }
        if (!contains(spec.context, t.key.object)) {
            throw ValidationError("planted triple " + to_string(t.key) +
                                  " has an object outside the context list");
        }
        if (t.key.relation.empty()) {
            throw ValidationError("planted triple " + to_string(t.key) + " has an empty relation");
        }
        validate_gmm(t.gmm);
        any_test = any_test || t.in_test;
    }
    if (spec.n_test_scenes > 0 && !any_test) {
        throw ValidationError("no planted triple is marked for test scenes");
    }
}

// Index of the mixture component with the largest weight (first on ties): the
// planted "optimal" box is taken at this component's mean.
size_t dominant_component(const GmmModel& gmm) {
    size_t best = 0;
    for (size_t k = 1; k < gmm.k(); ++k) {
        if (gmm.weights[k] > gmm.weights[best]) best = k;
    }
    return best;
}

// Draws one pair feature from the mixture: pick a component by weight, then
// mean + L*z with z standard normal and L the covariance's Cholesky factor.
Eigen::Vector4d sample_feature(const GmmModel& gmm,
                               const std::vector<Eigen::Matrix4d>& chol, SeededRng& rng) {
    double u = rng.uniform();
    size_t pick = gmm.k() - 1;
    double cumulative = 0.0;
    for (size_t k = 0; k < gmm.k(); ++k) {
        cumulative += gmm.weights[k];
        if (u < cumulative) {
            pick = k;
            break;
        }
    }
    Eigen::Vector4d z;
    for (int i = 0; i < 4; ++i) z[i] = rng.normal();
    return gmm.components[pick].mean() + chol[pick] * z;
}

struct GridRange {
    int first;  // first valid grid index
    int count;  // number of valid grid positions
};

// Valid positions (multiples of `step`) for a context box of side `side` so
// that both the context box and the planted subject box fit inside [0, extent].
GridRange context_positions(double extent, double side, double step, double rel_offset,
                            double rel_size) {
    double lo = std::max(0.0, -rel_offset * side);
    double hi = std::min(extent - side, extent - (rel_offset + rel_size) * side);
    int first = static_cast<int>(std::ceil(lo / step - 1e-9));
    int last = static_cast<int>(std::floor(hi / step + 1e-9));
    return {first, last - first + 1};
}

}  // namespace

SynthSpec SynthSpec::standard(uint64_t seed) {
    SynthSpec spec;
    spec.seed = seed;
    spec.insertable = {"clock", "vase"};
    spec.context = {"table", "wall"};

    auto gaussian1 = [](double m0, double m1, double m2, double m3, double pos_sd,
                        double size_sd) {
        Eigen::Vector4d mean(m0, m1, m2, m3);
        Eigen::Vector4d var(pos_sd * pos_sd, pos_sd * pos_sd, size_sd * size_sd,
                            size_sd * size_sd);
        GmmModel gmm;
        gmm.weights = {1.0};
        gmm.components.emplace_back(mean, Eigen::Matrix4d(var.asDiagonal()));
        return gmm;
    };

    // One well-placed pairing per insertable (a half-size box offset from its
    // context object) and one far-off-screen pairing that only pads the corpus.
    spec.triples.push_back({{"clock", "above", "wall"},
                            gaussian1(0.25, 0.50, 0.5, 0.5, 0.12, 0.05), true});
    spec.triples.push_back({{"vase", "on", "table"},
                            gaussian1(0.50, 0.25, 0.5, 0.5, 0.12, 0.05), true});
    spec.triples.push_back({{"clock", "on", "table"},
                            gaussian1(-4.0, -4.0, 3.0, 3.0, 0.05, 0.05), false});
    spec.triples.push_back({{"vase", "above", "wall"},
                            gaussian1(-4.0, -4.0, 3.0, 3.0, 0.05, 0.05), false});
    return spec;
}

SynthFixture gen_synthetic(const SynthSpec& spec) {
    validate_spec(spec);

    const double w_img = spec.width;
    const double h_img = spec.height;
    const double min_side = std::min(w_img, h_img);

    // Cholesky factors for sampling, per triple and component.
    std::vector<std::vector<Eigen::Matrix4d>> chol(spec.triples.size());
    for (size_t t = 0; t < spec.triples.size(); ++t) {
        for (const Gaussian& g : spec.triples[t].gmm.components) {
            chol[t].push_back(g.covariance().llt().matrixL());
        }
    }

    SeededRng base(spec.seed);
    SynthFixture fixture;
    fixture.context_names = spec.context;

    // ---- training corpus: one planted triple instance per image ------------
    SeededRng corpus_rng = base.fork(1);
    for (size_t i = 0; i < static_cast<size_t>(spec.n_train_images); ++i) {
        size_t ti = i % spec.triples.size();
        const PlantedTriple& triple = spec.triples[ti];

        SceneGraphRecord record;
        record.image_id = format_id("train_", i, 6);
        record.width = spec.width;
        record.height = spec.height;

        double w2 = corpus_rng.uniform(0.2, 0.4) * min_side;
        double h2 = corpus_rng.uniform(0.2, 0.4) * min_side;
        double x2 = corpus_rng.uniform(0.0, w_img - w2);
        double y2 = corpus_rng.uniform(0.0, h_img - h2);
        record.objects.push_back({"o0", triple.key.object, {x2, y2, w2, h2}});

        Eigen::Vector4d f;
        int attempts = 0;
        do {
            if (++attempts > 100) {
                throw ContractViolationError("planted mixture for " + to_string(triple.key) +
                                             " keeps producing non-positive box sizes");
            }
            f = sample_feature(triple.gmm, chol[ti], corpus_rng);
        } while (!(f[2] * w2 > 1e-9) || !(f[3] * h2 > 1e-9));
        record.objects.push_back(
            {"o1", triple.key.subject, {x2 + f[0] * w2, y2 + f[1] * h2, f[2] * w2, f[3] * h2}});
        record.relations.push_back({"o1", triple.key.relation, "o0"});

        if (corpus_rng.uniform() < spec.distractor_rate) {
            double wd = corpus_rng.uniform(0.1, 0.3) * min_side;
            double hd = corpus_rng.uniform(0.1, 0.3) * min_side;
            double xd = corpus_rng.uniform(0.0, w_img - wd);
            double yd = corpus_rng.uniform(0.0, h_img - hd);
            record.objects.push_back({"o2", kDistractorCategory, {xd, yd, wd, hd}});
            record.relations.push_back({"o2", "behind", "o0"});
        }
        fixture.corpus.push_back(std::move(record));
    }

    // ---- test scenes ---------------------------------------------------------
    std::vector<size_t> test_triples;
    for (size_t t = 0; t < spec.triples.size(); ++t) {
        if (spec.triples[t].in_test) test_triples.push_back(t);
    }

    // Context boxes are squares of a quarter of the long side, snapped to a
    // sixteenth of it, so planted boxes land exactly on the candidate grid.
    const double long_side = std::max(w_img, h_img);
    const double side2 = long_side / 4.0;
    const double step = long_side / 16.0;

    SeededRng test_rng = base.fork(2);
    for (size_t s = 0; s < static_cast<size_t>(spec.n_test_scenes); ++s) {
        size_t ti = test_triples[s % test_triples.size()];
        const PlantedTriple& triple = spec.triples[ti];
        const Eigen::Vector4d& m = triple.gmm.components[dominant_component(triple.gmm)].mean();

        GridRange xs = context_positions(w_img, side2, step, m[0], m[2]);
        GridRange ys = context_positions(h_img, side2, step, m[1], m[3]);
        if (xs.count <= 0 || ys.count <= 0) {
            throw ValidationError("planted triple " + to_string(triple.key) +
                                  " cannot fit inside a test image");
        }
        double x2 = (xs.first + static_cast<int>(test_rng.index(static_cast<size_t>(xs.count)))) *
                    step;
        double y2 = (ys.first + static_cast<int>(test_rng.index(static_cast<size_t>(ys.count)))) *
                    step;
        BBox context_box{x2, y2, side2, side2};
        BBox planted{x2 + m[0] * side2, y2 + m[1] * side2, m[2] * side2, m[3] * side2};

        SceneDetections scene;
        scene.image_id = format_id("scene_", s, 4);
        scene.width = spec.width;
        scene.height = spec.height;

        DetectedObject det;
        det.box = context_box;
        det.scores.resize(spec.context.size());
        for (size_t j = 0; j < spec.context.size(); ++j) {
            det.scores[j] = spec.context[j] == triple.key.object
                                ? 1.0 - 0.5 * spec.noise * test_rng.uniform()
                                : 0.25 * spec.noise * test_rng.uniform();
        }
        scene.detections.push_back(std::move(det));

        // Low-confidence clutter that detection filtering should discard.
        DetectedObject clutter;
        double wd = test_rng.uniform(0.1, 0.25) * min_side;
        double hd = test_rng.uniform(0.1, 0.25) * min_side;
        clutter.box = {test_rng.uniform(0.0, w_img - wd), test_rng.uniform(0.0, h_img - hd), wd,
                       hd};
        clutter.scores.resize(spec.context.size());
        for (size_t j = 0; j < spec.context.size(); ++j) {
            clutter.scores[j] = 0.3 * spec.noise * test_rng.uniform();
        }
        scene.detections.push_back(std::move(clutter));

        // Region mask: pixels within two standard deviations of the planted
        // box-center distribution (an axis-aligned ellipse).
        const Eigen::Matrix4d& cov = triple.gmm.components[dominant_component(triple.gmm)]
                                         .covariance();
        double sigma_cx = side2 * std::sqrt(cov(0, 0) + cov(2, 2) / 4.0 + cov(0, 2));
        double sigma_cy = side2 * std::sqrt(cov(1, 1) + cov(3, 3) / 4.0 + cov(1, 3));
        double cx = planted.x + planted.w / 2.0;
        double cy = planted.y + planted.h / 2.0;

        RegionMask mask;
        mask.width = spec.width;
        mask.height = spec.height;
        mask.bitmap.assign(static_cast<size_t>(spec.width) * spec.height, 0);
        int px0 = std::max(0, static_cast<int>(std::floor(cx - 2.0 * sigma_cx)) - 1);
        int px1 = std::min(spec.width - 1, static_cast<int>(std::ceil(cx + 2.0 * sigma_cx)) + 1);
        int py0 = std::max(0, static_cast<int>(std::floor(cy - 2.0 * sigma_cy)) - 1);
        int py1 = std::min(spec.height - 1, static_cast<int>(std::ceil(cy + 2.0 * sigma_cy)) + 1);
        for (int py = py0; py <= py1; ++py) {
            for (int px = px0; px <= px1; ++px) {
                double dx = (px + 0.5 - cx) / (2.0 * sigma_cx);
                double dy = (py + 0.5 - cy) / (2.0 * sigma_cy);
                if (dx * dx + dy * dy <= 1.0) {
                    mask.bitmap[static_cast<size_t>(py) * spec.width + px] = 1;
                }
            }
        }

        double planted_size = std::max(planted.w, planted.h);
        for (const char* annotator : {"a1", "a2"}) {
            AnnotationRecord planted_record;
            planted_record.image_id = scene.image_id;
            planted_record.annotator_id = annotator;
            planted_record.category = triple.key.subject;
            planted_record.preference = 2;
            planted_record.box_size = planted_size;
            planted_record.region = mask;
            fixture.annotations.push_back(std::move(planted_record));

            for (const std::string& other : spec.insertable) {
                if (other == triple.key.subject) continue;
                AnnotationRecord alt;
                alt.image_id = scene.image_id;
                alt.annotator_id = annotator;
                alt.category = other;
                alt.preference = 1;
                alt.box_size = planted_size;
                alt.region = mask;
                fixture.annotations.push_back(std::move(alt));
            }
        }

        fixture.truth.push_back({scene.image_id, triple.key.subject, triple.key.object, planted});
        fixture.test_scenes.push_back(std::move(scene));
    }

    return fixture;
}

void write_fixture_tree(const SynthFixture& fixture, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_corpus(fixture.corpus, dir / "corpus.jsonl");
    save_detections(fixture.test_scenes, fixture.context_names, dir / "detections.jsonl");
    save_annotations(fixture.annotations, dir / "annotations.jsonl");

    std::map<std::string, int> heights;
    for (const SceneDetections& scene : fixture.test_scenes) {
        heights[scene.image_id] = scene.height;
    }
    nlohmann::json scenes = nlohmann::json::array();
    for (const TruthRecord& truth : fixture.truth) {
        auto it = heights.find(truth.image_id);
        if (it == heights.end()) {
            throw ContractViolationError("truth record for unknown test scene " + truth.image_id);
        }
        auto td = box_to_topdown(truth.box, static_cast<double>(it->second));
        scenes.push_back({{"image_id", truth.image_id},
                          {"category", truth.category},
                          {"context", truth.context},
                          {"box", {td[0], td[1], td[2], td[3]}}});
    }
    nlohmann::json root = {{"scenes", std::move(scenes)}};

    std::ofstream out(dir / "truth.json", std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + (dir / "truth.json").string());
    out << root.dump(2) << '\n';
}

}  // namespace ctxinsert
