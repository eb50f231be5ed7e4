// Acceptance checks. Each criterion prints one [PASS]/[FAIL] line with the
// measured numbers; the exit code is the number of failed criteria.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ctxinsert/corpus.hpp"
#include "ctxinsert/gmm.hpp"
#include "ctxinsert/io.hpp"
#include "ctxinsert/rank_eval.hpp"
#include "ctxinsert/rng.hpp"
#include "ctxinsert/scorer.hpp"
#include "ctxinsert/synth.hpp"
#include "ctxinsert/train.hpp"
#include "oracles.hpp"

using namespace ctxinsert;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// Relative difference with an absolute floor that absorbs subnormal noise.
double rel_diff(double a, double b) {
    return std::abs(a - b) / (std::max(std::abs(a), std::abs(b)) + 1e-300);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

std::map<std::string, std::string> read_tree(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        files[fs::relative(entry.path(), dir).generic_string()] = read_file(entry.path());
    }
    return files;
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "ctxinsert_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// ---- 1. joint_score vs. the naive four-level reference loop ----------------

void criterion_oracle_equivalence() {
    auto start = Clock::now();
    SeededRng rng(1001);
    // Model shapes whose full triple table stays within five triples.
    const size_t shapes[][3] = {{1, 1, 1}, {2, 2, 1}, {1, 2, 2}, {2, 1, 2}, {1, 3, 1}, {1, 1, 2}};
    double worst = 0.0;
    size_t checked = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const size_t* shape = shapes[trial % 6];
        int k = 1 + static_cast<int>(rng.index(3));
        ContextModel model =
            oracle::random_context_model(rng, shape[0], shape[1], shape[2], k, trial % 2 == 0);
        SceneDetections scene =
            oracle::random_scene(rng, model.vocab(), 320, 240, rng.index(6));
        CandidateGrid grid = oracle::random_grid(rng, 320, 240, 1 + rng.index(100));

        ScoreMatrix got = joint_score(scene, grid, model);
        std::vector<std::vector<double>> want = oracle::joint_score(scene, grid, model);
        for (size_t b = 0; b < grid.boxes.size(); ++b) {
            for (size_t c = 0; c < model.vocab().insertable().size(); ++c) {
                worst = std::max(worst, rel_diff(got.at(b, c), want[b][c]));
                ++checked;
            }
        }
    }
    double elapsed = seconds_since(start);
    std::ostringstream detail;
    detail << "max relative error " << worst << " over 50 instances (" << checked << " entries), "
           << elapsed << " s (budget 5 s)";
    report("oracle equivalence (tolerance 1e-9)", worst <= 1e-9 && elapsed < 5.0, detail.str());
}

// ---- 2. EM correctness ------------------------------------------------------

std::vector<PairFeature> random_cloud(SeededRng& rng, size_t n, int blobs) {
    std::vector<Eigen::Vector4d> means;
    std::vector<double> sds;
    for (int b = 0; b < blobs; ++b) {
        means.emplace_back(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0), rng.uniform(0.2, 2.0),
                           rng.uniform(0.2, 2.0));
        sds.push_back(rng.uniform(0.1, 0.5));
    }
    std::vector<PairFeature> samples;
    samples.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        size_t b = rng.index(means.size());
        PairFeature x;
        for (int d = 0; d < 4; ++d) x[d] = rng.normal(means[b][d], sds[b]);
        samples.push_back(x);
    }
    return samples;
}

void criterion_em() {
    SeededRng rng(2002);

    // (a) The per-iteration mean log-likelihood never decreases beyond what
    // the covariance floor provably allows (the trace's per-step determinant
    // bound; zero floor would mean zero allowance).
    double worst_drop = 0.0;
    double largest_allowance = 0.0;
    int unbounded = 0;
    for (int trial = 0; trial < 100; ++trial) {
        // Sizes span collapse-prone tiny fits through comfortably over-
        // determined ones; the floor allowance is only large for the former.
        std::vector<PairFeature> samples =
            random_cloud(rng, 10 + rng.index(291), 1 + static_cast<int>(rng.index(3)));
        FitConfig config;
        config.k = 1 + static_cast<int>(rng.index(5));
        config.seed = static_cast<uint64_t>(trial);
        FitTrace trace;
        fit_em(samples, config, &trace);
        for (size_t i = 1; i < trace.mean_loglik.size(); ++i) {
            double slack = 1e-9 * std::max(1.0, std::abs(trace.mean_loglik[i - 1]));
            if (i - 1 < trace.reg_dip_bound.size()) slack += trace.reg_dip_bound[i - 1];
            if (std::isinf(slack)) {
                ++unbounded;  // the floor rescued a singular covariance
            } else {
                largest_allowance = std::max(largest_allowance, slack);
            }
            worst_drop = std::max(worst_drop,
                                  trace.mean_loglik[i - 1] - trace.mean_loglik[i] - slack);
        }
    }

    // (b) K=1 reproduces the closed-form mean and regularized sample covariance.
    double worst_closed = 0.0;
    {
        std::vector<PairFeature> samples = random_cloud(rng, 60, 1);
        FitConfig config;
        config.k = 1;
        GmmModel fitted = fit_em(samples, config);
        Eigen::Vector4d mean = Eigen::Vector4d::Zero();
        for (const PairFeature& x : samples) mean += x;
        mean /= static_cast<double>(samples.size());
        Eigen::Matrix4d cov = Eigen::Matrix4d::Zero();
        for (const PairFeature& x : samples) cov += (x - mean) * (x - mean).transpose();
        cov /= static_cast<double>(samples.size());
        cov += config.reg_covar * Eigen::Matrix4d::Identity();
        worst_closed = std::abs(fitted.weights[0] - 1.0);
        for (int r = 0; r < 4; ++r) {
            worst_closed = std::max(worst_closed,
                                    std::abs(fitted.components[0].mean()[r] - mean[r]));
            for (int c = 0; c < 4; ++c) {
                worst_closed = std::max(
                    worst_closed, std::abs(fitted.components[0].covariance()(r, c) - cov(r, c)));
            }
        }
    }

    // (c) A planted two-component mixture is recovered from 5000 samples.
    double worst_recovery = 0.0;
    {
        SeededRng gen(31);
        Eigen::Vector4d m1(0.0, 0.0, 1.0, 1.0);
        Eigen::Vector4d m2(3.0, 3.0, 2.0, 2.0);
        std::vector<PairFeature> samples;
        for (int i = 0; i < 5000; ++i) {
            const Eigen::Vector4d& m = i % 2 == 0 ? m1 : m2;
            PairFeature x;
            for (int d = 0; d < 4; ++d) x[d] = gen.normal(m[d], 1.0);
            samples.push_back(x);
        }
        FitConfig config;
        config.k = 2;
        config.seed = 31;
        GmmModel fitted = fit_em(samples, config);
        for (const Eigen::Vector4d& target : {m1, m2}) {
            double best = 1e300;
            for (const Gaussian& comp : fitted.components) {
                best = std::min(best, (comp.mean() - target).cwiseAbs().maxCoeff());
            }
            worst_recovery = std::max(worst_recovery, best);
        }
    }

    std::ostringstream detail;
    detail << "worst likelihood drop beyond slack " << worst_drop
           << " (100 fits, max finite floor allowance " << largest_allowance << ", " << unbounded
           << " degenerate-cluster transitions), closed-form error " << worst_closed
           << " (tolerance 1e-12), recovery error " << worst_recovery << " (tolerance 0.1)";
    report("EM correctness",
           worst_drop <= 0.0 && worst_closed <= 1e-12 && worst_recovery < 0.1, detail.str());
}

// ---- 3. end-to-end synthetic pipeline ---------------------------------------

void criterion_end_to_end() {
    auto start = Clock::now();
    SynthSpec spec = SynthSpec::standard(42);  // 2000 corpus images, 100 test scenes
    SynthFixture fixture = gen_synthetic(spec);

    TrainParams params;
    params.vocab.insertable = {"clock", "vase"};
    params.fit.seed = 42;
    ContextModel model = train_model(fixture.corpus, params);

    // Reorder detector score columns from the fixture's context list to the
    // trained vocabulary's (categories the model never selected score 0).
    std::vector<SceneDetections> scenes = fixture.test_scenes;
    for (SceneDetections& scene : scenes) {
        for (DetectedObject& det : scene.detections) {
            std::vector<double> remapped(model.vocab().context().size(), 0.0);
            for (size_t j = 0; j < fixture.context_names.size(); ++j) {
                int idx = model.vocab().context_index(fixture.context_names[j]);
                if (idx >= 0) remapped[static_cast<size_t>(idx)] = det.scores[j];
            }
            det.scores = std::move(remapped);
        }
    }

    int top1 = 0;
    int box_in_top = 0;
    size_t n_boxes = 0;
    for (size_t s = 0; s < scenes.size(); ++s) {
        const TruthRecord& truth = fixture.truth[s];
        CandidateGrid grid = sample_candidates(scenes[s].width, scenes[s].height,
                                               model.config().scales, model.config().stride_ratio);
        n_boxes = grid.boxes.size();

        RankedList categories = rank_objects(scenes[s], model, grid);
        if (!categories.items.empty() && categories.items[0].id == truth.category) ++top1;

        size_t planted = grid.boxes.size();
        for (size_t b = 0; b < grid.boxes.size(); ++b) {
            const BBox& box = grid.boxes[b];
            if (std::abs(box.x - truth.box.x) < 1e-6 && std::abs(box.y - truth.box.y) < 1e-6 &&
                std::abs(box.w - truth.box.w) < 1e-6 && std::abs(box.h - truth.box.h) < 1e-6) {
                planted = b;
                break;
            }
        }
        RankedBoxes boxes = rank_boxes(scenes[s], model, grid, truth.category);
        for (size_t pos = 0; pos < boxes.items.size(); ++pos) {
            if (boxes.items[pos].first == planted) {
                if (static_cast<double>(pos) < 0.05 * static_cast<double>(grid.boxes.size())) {
                    ++box_in_top;
                }
                break;
            }
        }
    }

    double avg_ndcg =
        evaluate_objects(scenes, fixture.annotations, model, 2, false, 1).avg_ndcg;
    double elapsed = seconds_since(start);

    std::ostringstream detail;
    detail << "top-1 category " << top1 << "/100 (need >= 90), planted box in top 5% of "
           << n_boxes << " candidates " << box_in_top << "/100 (need >= 90), avg nDCG "
           << avg_ndcg << " (need >= 0.95), " << elapsed << " s (budget 60 s)";
    report("end-to-end synthetic pipeline",
           top1 >= 90 && box_in_top >= 90 && avg_ndcg >= 0.95 && elapsed < 60.0, detail.str());
}

// ---- 4. candidate count ------------------------------------------------------

void criterion_candidate_count() {
    ScorerConfig config;
    CandidateGrid grid = sample_candidates(640.0, 480.0, config.scales, config.stride_ratio);
    std::ostringstream detail;
    detail << "sample_candidates(640, 480) returned " << grid.boxes.size() << " boxes (need 878)";
    report("candidate count formula", grid.boxes.size() == 878, detail.str());
}

// ---- 5. metric suite vs. naive references ------------------------------------

RegionMask random_mask(SeededRng& rng, int width, int height) {
    RegionMask mask;
    mask.width = width;
    mask.height = height;
    mask.bitmap.resize(static_cast<size_t>(width) * height);
    for (uint8_t& bit : mask.bitmap) bit = rng.uniform() < 0.45 ? 1 : 0;
    return mask;
}

void criterion_metric_suite() {
    SeededRng rng(5005);
    const std::vector<std::string> categories = {"cat_a", "cat_b", "cat_c"};
    const std::vector<std::string> images = {"img_0", "img_1", "img_2", "img_3"};
    const std::vector<std::string> annotators = {"a1", "a2"};
    const int mask_w = 8, mask_h = 6;

    double worst = 0.0;
    bool keys_match = true;
    auto track = [&](double a, double b) {
        worst = std::max(worst, std::abs(a - b));
    };

    for (int trial = 0; trial < 50; ++trial) {
        // Random annotation set; the first (image, category, annotator) cell is
        // always kept so the fixture is never empty.
        std::vector<AnnotationRecord> annotations;
        for (const std::string& image : images) {
            for (const std::string& category : categories) {
                for (const std::string& annotator : annotators) {
                    if (!annotations.empty() && rng.uniform() < 0.25) continue;
                    AnnotationRecord record;
                    record.image_id = image;
                    record.annotator_id = annotator;
                    record.category = category;
                    record.preference = 1 + static_cast<int>(rng.index(2));
                    record.box_size = rng.uniform(5.0, 50.0);
                    record.region = random_mask(rng, mask_w, mask_h);
                    annotations.push_back(std::move(record));
                }
            }
        }

        // Random predictions for most (image, category) pairs.
        std::map<std::pair<std::string, std::string>, double> sizes;
        std::map<std::pair<std::string, std::string>, BBox> boxes;
        std::map<std::pair<std::string, std::string>, Heatmap> heatmaps;
        for (const std::string& image : images) {
            for (const std::string& category : categories) {
                if (rng.uniform() < 0.1) continue;
                sizes[{image, category}] = rng.uniform(5.0, 50.0);
                boxes[{image, category}] = BBox{rng.uniform(0.0, 6.0), rng.uniform(0.0, 4.0),
                                                rng.uniform(0.5, 4.0), rng.uniform(0.5, 3.0)};
                Heatmap heat;
                heat.width = mask_w;
                heat.height = mask_h;
                bool zero = rng.uniform() < 0.1;
                for (int i = 0; i < mask_w * mask_h; ++i) {
                    heat.raster.push_back(zero ? 0.0 : rng.uniform(0.0, 1.0));
                }
                heatmaps[{image, category}] = std::move(heat);
            }
        }

        auto got_sizes = iou_size(annotations, sizes);
        auto want_sizes = oracle::iou_size(annotations, sizes);
        keys_match = keys_match && got_sizes.size() == want_sizes.size();
        for (const auto& [category, value] : got_sizes) {
            keys_match = keys_match && want_sizes.count(category) == 1;
            if (want_sizes.count(category)) track(value, want_sizes.at(category));
        }
        auto got_loc = accuracy_loc(annotations, boxes);
        auto want_loc = oracle::accuracy_loc(annotations, boxes);
        keys_match = keys_match && got_loc.size() == want_loc.size();
        for (const auto& [category, value] : got_loc) {
            keys_match = keys_match && want_loc.count(category) == 1;
            if (want_loc.count(category)) {
                track(value.fractional, want_loc.at(category).fractional);
                track(value.strict, want_loc.at(category).strict);
            }
        }
        auto got_heat = heatmap_iou(annotations, heatmaps);
        auto want_heat = oracle::heatmap_iou(annotations, heatmaps);
        keys_match = keys_match && got_heat.size() == want_heat.size();
        for (const auto& [category, value] : got_heat) {
            keys_match = keys_match && want_heat.count(category) == 1;
            if (want_heat.count(category)) track(value, want_heat.at(category));
        }

        // Ranking metrics on random lists against the same annotations.
        std::map<std::string, RankedList> per_image;
        for (const std::string& image : images) {
            RankedList list;
            for (const std::string& category : categories) {
                list.items.push_back({category, rng.uniform()});
            }
            sort_ranked(list.items);
            per_image[image] = std::move(list);
        }
        std::map<std::string, RankedList> per_category;
        for (const std::string& category : categories) {
            RankedList list;
            for (const std::string& image : images) {
                list.items.push_back({image, rng.uniform()});
            }
            sort_ranked(list.items);
            per_category[category] = std::move(list);
        }
        size_t k = 1 + rng.index(4);
        track(avg_ndcg_objects(per_image, annotations, k),
              oracle::avg_ndcg_objects(per_image, annotations, k));
        track(avg_ndcg_scenes(per_category, annotations, k),
              oracle::avg_ndcg_scenes(per_category, annotations, k));

        RankedList ranked;
        std::map<std::string, double> gains;
        for (int i = 0; i < 8; ++i) {
            std::string id = "item_" + std::to_string(i);
            ranked.items.push_back({id, rng.uniform()});
            if (rng.uniform() < 0.7) gains[id] = 1.0 + static_cast<double>(rng.index(3));
        }
        sort_ranked(ranked.items);
        size_t depth = 1 + rng.index(12);
        for (bool exponential : {false, true}) {
            NdcgOptions options;
            options.exponential_gain = exponential;
            track(ndcg_at_k(ranked, gains, depth, options),
                  oracle::ndcg(ranked, gains, depth, exponential));
        }
    }

    // Hand examples with pinned values.
    RankedList hand;
    hand.items = {{"clock", 3.0}, {"sofa", 2.0}, {"vase", 1.0}};
    double hand_ndcg = ndcg_at_k(hand, {{"clock", 2.0}, {"vase", 1.0}}, 3);
    bool hand_ok = std::abs(hand_ndcg - 0.9502344167898356) <= 1e-12;

    AnnotationRecord size_ann;
    size_ann.image_id = "img";
    size_ann.annotator_id = "a1";
    size_ann.category = "cat_a";
    size_ann.preference = 1;
    size_ann.box_size = 32.0;
    size_ann.region = random_mask(rng, mask_w, mask_h);
    double hand_iou = image_iou_size({&size_ann}, 25.6);
    hand_ok = hand_ok && hand_iou == 0.8;

    AnnotationRecord half_ann = size_ann;
    half_ann.region.width = 10;
    half_ann.region.height = 10;
    half_ann.region.bitmap.assign(100, 0);
    for (int y = 0; y < 10; ++y) {
        for (int x = 0; x < 5; ++x) half_ann.region.bitmap[static_cast<size_t>(y) * 10 + x] = 1;
    }
    LocAccuracy half = image_accuracy_loc({&half_ann}, BBox{3.0, 0.0, 4.0, 2.0});
    hand_ok = hand_ok && half.fractional == 0.5 && half.strict == 0.0;

    std::ostringstream detail;
    detail << "max deviation " << worst << " (tolerance 1e-12) over 50 fixtures, keys "
           << (keys_match ? "match" : "MISMATCH") << "; hand examples nDCG " << hand_ndcg
           << ", size IoU " << hand_iou << ", half-overlap accuracy " << half.fractional;
    report("metric suite vs. reference", worst <= 1e-12 && keys_match && hand_ok, detail.str());
}

// ---- 6. heatmap rasterizer ----------------------------------------------------

void criterion_rasterizer() {
    SeededRng rng(6006);
    size_t mismatches = 0;
    for (int trial = 0; trial < 20; ++trial) {
        int width = 1 + static_cast<int>(rng.index(40));
        int height = 1 + static_cast<int>(rng.index(30));
        CandidateGrid grid = oracle::random_grid(rng, width, height, rng.index(60));
        std::vector<double> probs;
        // Probabilities on a 1/1024 lattice: every partial sum is exact, so the
        // difference-array and per-box orders must agree bit for bit.
        for (size_t i = 0; i < grid.boxes.size(); ++i) {
            probs.push_back(static_cast<double>(rng.index(1024)) / 1024.0);
        }
        Heatmap got = rasterize_heatmap(grid, probs, width, height);
        std::vector<double> want = oracle::rasterize(grid, probs, width, height);
        for (size_t i = 0; i < want.size(); ++i) {
            if (got.raster[i] != want[i]) ++mismatches;
        }
    }
    std::ostringstream detail;
    detail << mismatches << " mismatched pixels over 20 instances (need exact equality)";
    report("heatmap rasterizer exactness", mismatches == 0, detail.str());
}

// ---- 7. scoring performance ----------------------------------------------------

void criterion_performance() {
    SeededRng rng(7007);
    ContextModel model = oracle::random_context_model(rng, 10, 20, 10, 4, true);
    SceneDetections scene = oracle::random_scene(rng, model.vocab(), 640, 480, 20);
    ScorerConfig config;
    CandidateGrid grid = sample_candidates(640.0, 480.0, config.scales, config.stride_ratio);

    auto start = Clock::now();
    ScoreMatrix sm = joint_score(scene, grid, model);
    double elapsed = seconds_since(start);

    std::ostringstream detail;
    detail << grid.boxes.size() << " candidates x 20 detections x " << model.gmms().size()
           << " triples in " << elapsed << " s (budget 1 s); total score " << sm.total();
    report("scoring performance", elapsed <= 1.0 && sm.total() > 0.0, detail.str());
}

// ---- 8. determinism --------------------------------------------------------------

void criterion_determinism() {
    SynthSpec spec = SynthSpec::standard(9);
    spec.n_train_images = 200;
    spec.n_test_scenes = 10;

    fs::path tree_a = fresh_dir("fixture_a");
    fs::path tree_b = fresh_dir("fixture_b");
    SynthFixture fixture = gen_synthetic(spec);
    write_fixture_tree(fixture, tree_a);
    write_fixture_tree(gen_synthetic(spec), tree_b);
    bool fixtures_equal = read_tree(tree_a) == read_tree(tree_b);

    TrainParams params;
    params.vocab.insertable = {"clock", "vase"};
    params.fit.seed = 5;
    fs::path models = fresh_dir("models");
    save_model(train_model(fixture.corpus, params), models / "first.json");
    save_model(train_model(fixture.corpus, params), models / "second.json");
    bool models_equal = read_file(models / "first.json") == read_file(models / "second.json");

    std::ostringstream detail;
    detail << "fixture trees " << (fixtures_equal ? "identical" : "DIFFER") << ", model files "
           << (models_equal ? "identical" : "DIFFER");
    report("seeded determinism", fixtures_equal && models_equal, detail.str());
}

}  // namespace

int main() {
    criterion_oracle_equivalence();
    criterion_em();
    criterion_end_to_end();
    criterion_candidate_count();
    criterion_metric_suite();
    criterion_rasterizer();
    criterion_performance();
    criterion_determinism();
    std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}
