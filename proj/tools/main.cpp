// Command-line front end: train, recommend, retrieve, predict-box, heatmap,
// evaluate, synth.  Exit codes: 0 success, 1 usage error, 2 data/validation
// error, 3 internal invariant violation.  Errors are reported as one JSON
// object on standard error so scripts can parse failures reliably.

#include <CLI11.hpp>
#include <iostream>
#include <json.hpp>
#include <string>
#include <vector>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/io.hpp"
#include "ctxinsert/parallel.hpp"
#include "ctxinsert/rank_eval.hpp"
#include "ctxinsert/scorer.hpp"
#include "ctxinsert/synth.hpp"
#include "ctxinsert/train.hpp"

namespace {

using nlohmann::json;
using namespace ctxinsert;

void emit_error(const std::string& type, const std::string& message) {
    json out = {{"error", {{"type", type}, {"message", message}}}};
    std::cerr << out.dump() << "\n";
}

void emit(const json& out) { std::cout << out.dump(2) << "\n"; }

json box_json(const BBox& box, int image_height) {
    auto td = box_to_topdown(box, static_cast<double>(image_height));
    return json::array({td[0], td[1], td[2], td[3]});
}

const SceneDetections& find_scene(const std::vector<SceneDetections>& scenes,
                                  const std::string& image_id) {
    for (const auto& scene : scenes) {
        if (scene.image_id == image_id) return scene;
    }
    throw ValidationError("image id '" + image_id + "' not found in the detections file");
}

// Grid + filtered detections + unnormalized joint scores for one scene.
struct ScoredScene {
    CandidateGrid grid;
    SceneDetections filtered;
    ScoreMatrix sm;
};

ScoredScene score_scene(const SceneDetections& scene, const ContextModel& model) {
    ScoredScene out;
    out.grid = sample_candidates(scene.width, scene.height, model.config().scales,
                                 model.config().stride_ratio);
    out.filtered = filter_detections(scene, model.config().det_threshold,
                                     static_cast<size_t>(model.config().max_context));
    out.sm = joint_score(out.filtered, out.grid, model);
    return out;
}

size_t argmax_box(std::span<const double> probs) {
    size_t best = 0;
    for (size_t i = 1; i < probs.size(); ++i) {
        if (probs[i] > probs[best]) best = i;
    }
    return best;
}

// ---- subcommand argument bags ------------------------------------------------

struct TrainArgs {
    std::string corpus;
    std::string out;
    std::vector<std::string> insertable;
    int k = 4;
    int top_context = 20;
    int top_relations = 10;
    double det_threshold = 0.4;
    int max_context = 20;
    int refine_values = 32;
    uint64_t seed = 0;
    size_t threads = default_thread_count();
    bool strict = false;
};

struct QueryArgs {
    std::string model;
    std::string detections;
    std::string image_id;
    std::string category;
    std::string out;
    size_t topk = 5;
    bool refine = false;
    bool raw_sums = false;
    size_t threads = default_thread_count();
    bool strict = false;
};

struct EvaluateArgs {
    std::string model;
    std::string detections;
    std::string annotations;
    std::string task;
    std::string baseline;
    size_t ndcg_k = 5;
    bool refine = false;
    size_t threads = default_thread_count();
    bool strict = false;
};

struct SynthArgs {
    uint64_t seed = 7;
    std::string out;
    int n_train = 2000;
    int n_test = 100;
};

// ---- subcommand bodies ---------------------------------------------------------

void run_train(const TrainArgs& args) {
    LoadStats stats;
    auto corpus = load_corpus(args.corpus, {args.strict}, &stats);

    TrainParams params;
    params.vocab.insertable = args.insertable;
    params.vocab.top_context = args.top_context;
    params.vocab.top_relations = args.top_relations;
    params.fit.k = args.k;
    params.fit.seed = args.seed;
    params.scorer.det_threshold = args.det_threshold;
    params.scorer.max_context = args.max_context;
    params.scorer.refine_values = args.refine_values;
    params.n_threads = args.threads;

    ContextModel model = train_model(corpus, params);
    save_model(model, args.out);

    emit({{"model", args.out},
          {"corpus_records", corpus.size()},
          {"skipped_lines", stats.skipped_lines},
          {"insertable", model.vocab().insertable().size()},
          {"context", model.vocab().context().size()},
          {"relations", model.vocab().relations().size()},
          {"triples", model.gmms().size()}});
}

void run_recommend(const QueryArgs& args) {
    ContextModel model = load_model(args.model);
    auto scenes = load_detections(args.detections, model.vocab(), {args.strict}, nullptr);
    const SceneDetections& scene = find_scene(scenes, args.image_id);

    ScoredScene scored = score_scene(scene, model);
    const auto& categories = model.vocab().insertable();
    auto normalized = normalize_joint(scored.sm);

    RankedList ranked;
    if (normalized.has_value()) {
        std::vector<double> marginal = marginal_category(*normalized);
        for (size_t c = 0; c < categories.size(); ++c) ranked.items.push_back({categories[c], marginal[c]});
    } else {
        double uniform = 1.0 / static_cast<double>(categories.size());
        for (const auto& name : categories) ranked.items.push_back({name, uniform});
        ranked.zero_evidence = true;
    }
    sort_ranked(ranked.items);

    json recommendations = json::array();
    size_t depth = std::min(args.topk, ranked.items.size());
    for (size_t i = 0; i < depth; ++i) {
        const RankedItem& item = ranked.items[i];
        size_t c = static_cast<size_t>(model.vocab().insertable_index(item.id));
        auto probs = conditional_box(scored.sm, c);
        json entry = {{"category", item.id}, {"score", item.score}};
        if (probs.has_value()) {
            size_t best = argmax_box(*probs);
            entry["box"] = box_json(scored.grid.boxes[best], scene.height);
            entry["box_probability"] = (*probs)[best];
            entry["box_zero_evidence"] = false;
        } else if (!scored.grid.boxes.empty()) {
            entry["box"] = box_json(scored.grid.boxes[0], scene.height);
            entry["box_probability"] = 1.0 / static_cast<double>(scored.grid.boxes.size());
            entry["box_zero_evidence"] = true;
        }
        recommendations.push_back(std::move(entry));
    }

    emit({{"image_id", scene.image_id},
          {"zero_evidence", ranked.zero_evidence},
          {"recommendations", std::move(recommendations)}});
}

void run_retrieve(const QueryArgs& args) {
    ContextModel model = load_model(args.model);
    auto scenes = load_detections(args.detections, model.vocab(), {args.strict}, nullptr);

    RetrieveOptions options;
    options.raw_sums = args.raw_sums;
    options.n_threads = args.threads;
    RankedList ranked = retrieve_scenes(args.category, scenes, model, options);

    json results = json::array();
    size_t depth = std::min(args.topk, ranked.items.size());
    for (size_t i = 0; i < depth; ++i) {
        const RankedItem& item = ranked.items[i];
        const SceneDetections& scene = find_scene(scenes, item.id);
        ScoredScene scored = score_scene(scene, model);
        size_t c = static_cast<size_t>(model.vocab().insertable_index(args.category));
        auto probs = conditional_box(scored.sm, c);
        json entry = {{"image_id", item.id}, {"score", item.score}};
        if (probs.has_value()) {
            size_t best = argmax_box(*probs);
            entry["box"] = box_json(scored.grid.boxes[best], scene.height);
            entry["box_probability"] = (*probs)[best];
        }
        results.push_back(std::move(entry));
    }

    emit({{"category", args.category},
          {"raw_sums", args.raw_sums},
          {"results", std::move(results)}});
}

void run_predict_box(const QueryArgs& args) {
    ContextModel model = load_model(args.model);
    auto scenes = load_detections(args.detections, model.vocab(), {args.strict}, nullptr);
    const SceneDetections& scene = find_scene(scenes, args.image_id);

    int c = model.vocab().insertable_index(args.category);
    if (c < 0) {
        throw ValidationError("category '" + args.category +
                              "' is not an insertable category of the model");
    }

    ScoredScene scored = score_scene(scene, model);
    if (scored.grid.boxes.empty()) {
        throw ValidationError("image '" + scene.image_id + "' admits no candidate boxes");
    }
    auto probs = conditional_box(scored.sm, static_cast<size_t>(c));

    bool zero_evidence = !probs.has_value();
    size_t best = zero_evidence ? 0 : argmax_box(*probs);
    double probability = zero_evidence ? 1.0 / static_cast<double>(scored.grid.boxes.size())
                                       : (*probs)[best];
    BBox box = scored.grid.boxes[best];
    bool refined = false;
    if (args.refine && !zero_evidence) {
        box = refine_size(scored.filtered, model, static_cast<size_t>(c), box,
                          model.config().refine_values);
        refined = true;
    }

    emit({{"image_id", scene.image_id},
          {"category", args.category},
          {"box", box_json(box, scene.height)},
          {"probability", probability},
          {"zero_evidence", zero_evidence},
          {"refined", refined}});
}

void run_heatmap(const QueryArgs& args) {
    ContextModel model = load_model(args.model);
    auto scenes = load_detections(args.detections, model.vocab(), {args.strict}, nullptr);
    const SceneDetections& scene = find_scene(scenes, args.image_id);

    int c = model.vocab().insertable_index(args.category);
    if (c < 0) {
        throw ValidationError("category '" + args.category +
                              "' is not an insertable category of the model");
    }

    ScoredScene scored = score_scene(scene, model);
    auto probs = conditional_box(scored.sm, static_cast<size_t>(c));
    bool zero_evidence = !probs.has_value();
    std::vector<double> box_probs;
    if (zero_evidence) {
        double uniform = scored.grid.boxes.empty()
                             ? 0.0
                             : 1.0 / static_cast<double>(scored.grid.boxes.size());
        box_probs.assign(scored.grid.boxes.size(), uniform);
    } else {
        box_probs = std::move(*probs);
    }

    Heatmap heat = rasterize_heatmap(scored.grid, box_probs, scene.width, scene.height);
    heat.image_id = scene.image_id;
    heat.category = args.category;
    write_heatmap(heat, args.out);

    emit({{"out", args.out},
          {"sidecar", args.out + ".json"},
          {"image_id", scene.image_id},
          {"category", args.category},
          {"zero_evidence", zero_evidence}});
}

void run_evaluate(const EvaluateArgs& args) {
    if (!args.baseline.empty() && args.baseline != "boc") {
        throw ValidationError("unknown baseline '" + args.baseline + "' (supported: boc)");
    }
    bool boc = args.baseline == "boc";

    ContextModel model = load_model(args.model);
    LoadStats stats;
    auto scenes = load_detections(args.detections, model.vocab(), {args.strict}, &stats);
    auto annotations = load_annotations(args.annotations, {args.strict}, &stats);

    json out = {{"task", args.task},
                {"baseline", boc ? "boc" : "model"},
                {"skipped_lines", stats.skipped_lines}};
    if (args.task == "objects") {
        ObjectsReport report =
            evaluate_objects(scenes, annotations, model, args.ndcg_k, boc, args.threads);
        out["ndcg"] = report.avg_ndcg;
        out["ndcg_k"] = report.k;
        out["images_evaluated"] = report.images_evaluated;
        out["images_without_annotations"] = report.images_without_annotations;
        out["zero_evidence_scenes"] = report.zero_evidence_scenes;
    } else if (args.task == "scenes") {
        ScenesReport report =
            evaluate_scenes(scenes, annotations, model, args.ndcg_k, boc, args.threads);
        out["ndcg"] = report.avg_ndcg;
        out["ndcg_k"] = report.k;
        out["per_category"] = report.per_category;
    } else if (args.task == "boxes") {
        if (boc) {
            throw ValidationError("the boc baseline ranks categories and scenes; it has no box model");
        }
        BoxesReport report = evaluate_boxes(scenes, annotations, model, args.refine, args.threads);
        out["refine"] = report.refine;
        out["images_evaluated"] = report.images_evaluated;
        out["zero_evidence_pairs"] = report.zero_evidence_pairs;
        out["iou_size"] = report.iou_size_mean;
        out["accuracy_loc"] = report.loc_fractional_mean;
        out["accuracy_loc_strict"] = report.loc_strict_mean;
        out["heatmap_iou"] = report.heatmap_iou_mean;
        json per_category = json::object();
        for (const auto& [category, value] : report.iou_size_per_category) {
            per_category[category]["iou_size"] = value;
        }
        for (const auto& [category, value] : report.loc_per_category) {
            per_category[category]["accuracy_loc"] = value.fractional;
            per_category[category]["accuracy_loc_strict"] = value.strict;
        }
        for (const auto& [category, value] : report.heatmap_iou_per_category) {
            per_category[category]["heatmap_iou"] = value;
        }
        out["per_category"] = std::move(per_category);
    } else {
        throw ValidationError("unknown task '" + args.task +
                              "' (supported: objects, scenes, boxes)");
    }
    emit(out);
}

void run_synth(const SynthArgs& args) {
    SynthSpec spec = SynthSpec::standard(args.seed);
    spec.n_train_images = args.n_train;
    spec.n_test_scenes = args.n_test;
    SynthFixture fixture = gen_synthetic(spec);
    write_fixture_tree(fixture, args.out);
    emit({{"out", args.out},
          {"train_images", fixture.corpus.size()},
          {"test_scenes", fixture.test_scenes.size()},
          {"annotations", fixture.annotations.size()}});
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Contextual object insertion: learn where object categories fit in scenes, "
                 "recommend categories and boxes, retrieve scenes, and evaluate rankings."};
    app.require_subcommand(1);

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Fit a model from a scene-graph corpus");
    train->add_option("--corpus", train_args.corpus, "Scene-graph corpus (JSON Lines)")->required();
    train->add_option("--out", train_args.out, "Output model path")->required();
    train->add_option("--insertable", train_args.insertable,
                      "Insertable categories (repeatable; default: a standard indoor set)");
    train->add_option("--k", train_args.k, "Mixture components per triple");
    train->add_option("--top-context", train_args.top_context, "Context vocabulary size");
    train->add_option("--top-relations", train_args.top_relations, "Relation vocabulary size");
    train->add_option("--det-threshold", train_args.det_threshold, "Detection score threshold");
    train->add_option("--max-context", train_args.max_context, "Max detections used per image");
    train->add_option("--refine-values", train_args.refine_values, "Size-refinement grid values");
    train->add_option("--seed", train_args.seed, "Fit seed");
    train->add_option("--threads", train_args.threads, "Worker threads");
    train->add_flag("--strict", train_args.strict, "Fail on any invalid input line");
    train->callback([&] {
        if (train_args.insertable.empty()) {
            train_args.insertable = {"cup",   "spoon", "apple", "cake", "laptop",
                                     "mouse", "tv",    "clock", "book", "pillow"};
        }
        run_train(train_args);
    });

    QueryArgs rec_args;
    auto* recommend = app.add_subcommand("recommend", "Rank insertable categories for an image");
    recommend->add_option("--model", rec_args.model, "Trained model path")->required();
    recommend->add_option("--detections", rec_args.detections, "Detections (JSON Lines)")->required();
    recommend->add_option("--image-id", rec_args.image_id, "Image to score")->required();
    recommend->add_option("--topk", rec_args.topk, "Number of categories to return");
    recommend->add_flag("--strict", rec_args.strict, "Fail on any invalid input line");
    recommend->callback([&] { run_recommend(rec_args); });

    QueryArgs ret_args;
    auto* retrieve = app.add_subcommand("retrieve", "Rank scenes for an insertable category");
    retrieve->add_option("--model", ret_args.model, "Trained model path")->required();
    retrieve->add_option("--detections", ret_args.detections, "Detections (JSON Lines)")->required();
    retrieve->add_option("--category", ret_args.category, "Insertable category")->required();
    retrieve->add_option("--topk", ret_args.topk, "Number of scenes to return");
    retrieve->add_flag("--raw-sums", ret_args.raw_sums, "Rank by raw score sums (experimental)");
    retrieve->add_option("--threads", ret_args.threads, "Worker threads");
    retrieve->add_flag("--strict", ret_args.strict, "Fail on any invalid input line");
    retrieve->callback([&] { run_retrieve(ret_args); });

    QueryArgs box_args;
    auto* predict = app.add_subcommand("predict-box", "Best box for a category in an image");
    predict->add_option("--model", box_args.model, "Trained model path")->required();
    predict->add_option("--detections", box_args.detections, "Detections (JSON Lines)")->required();
    predict->add_option("--image-id", box_args.image_id, "Image to score")->required();
    predict->add_option("--category", box_args.category, "Insertable category")->required();
    predict->add_flag("--refine", box_args.refine, "Refine the box size around the best candidate");
    predict->add_flag("--strict", box_args.strict, "Fail on any invalid input line");
    predict->callback([&] { run_predict_box(box_args); });

    QueryArgs heat_args;
    auto* heatmap = app.add_subcommand("heatmap", "Write a placement heatmap as a PGM image");
    heatmap->add_option("--model", heat_args.model, "Trained model path")->required();
    heatmap->add_option("--detections", heat_args.detections, "Detections (JSON Lines)")->required();
    heatmap->add_option("--image-id", heat_args.image_id, "Image to score")->required();
    heatmap->add_option("--category", heat_args.category, "Insertable category")->required();
    heatmap->add_option("--out", heat_args.out, "Output PGM path")->required();
    heatmap->add_flag("--strict", heat_args.strict, "Fail on any invalid input line");
    heatmap->callback([&] { run_heatmap(heat_args); });

    EvaluateArgs eval_args;
    auto* evaluate = app.add_subcommand("evaluate", "Score rankings against human annotations");
    evaluate->add_option("--model", eval_args.model, "Trained model path")->required();
    evaluate->add_option("--detections", eval_args.detections, "Detections (JSON Lines)")->required();
    evaluate->add_option("--annotations", eval_args.annotations, "Annotations (JSON Lines)")
        ->required();
    evaluate->add_option("--task", eval_args.task, "objects, scenes, or boxes")->required();
    evaluate->add_option("--baseline", eval_args.baseline, "Use a baseline ranker (boc)");
    evaluate->add_option("--ndcg-k", eval_args.ndcg_k, "Ranking depth for nDCG");
    evaluate->add_flag("--refine", eval_args.refine, "Refine box sizes (boxes task)");
    evaluate->add_option("--threads", eval_args.threads, "Worker threads");
    evaluate->add_flag("--strict", eval_args.strict, "Fail on any invalid input line");
    evaluate->callback([&] { run_evaluate(eval_args); });

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic fixture tree");
    synth->add_option("--seed", synth_args.seed, "Generator seed");
    synth->add_option("--out", synth_args.out, "Output directory")->required();
    synth->add_option("--n-train", synth_args.n_train, "Training images");
    synth->add_option("--n-test", synth_args.n_test, "Test scenes");
    synth->callback([&] { run_synth(synth_args); });

    try {
        app.parse(argc, argv);
        return 0;
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        emit_error("usage", e.what());
        return 1;
    } catch (const ContractViolationError& e) {
        emit_error("contract_violation", e.what());
        return 3;
    } catch (const CorruptModelError& e) {
        emit_error("corrupt_model", e.what());
        return 2;
    } catch (const UnsupportedVersionError& e) {
        emit_error("unsupported_version", e.what());
        return 2;
    } catch (const EmptyCorpusError& e) {
        emit_error("empty_corpus", e.what());
        return 2;
    } catch (const NoSamplesError& e) {
        emit_error("no_samples", e.what());
        return 2;
    } catch (const InvalidGeometryError& e) {
        emit_error("invalid_geometry", e.what());
        return 2;
    } catch (const ValidationError& e) {
        emit_error("validation", e.what());
        return 2;
    } catch (const std::exception& e) {
        emit_error("internal", e.what());
        return 3;
    }
}
