#include "ctxinsert/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ctxinsert/errors.hpp"
#include "ctxinsert/log.hpp"

namespace ctxinsert {

using nlohmann::json;

namespace {

// ---- generic helpers -------------------------------------------------------

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    return out;
}

[[noreturn]] void line_error(const std::filesystem::path& path, size_t line,
                             const std::string& message) {
    throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + message);
}

const json& require_field(const json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end()) throw ValidationError(std::string("missing field '") + key + "'");
    return *it;
}

std::string require_string(const json& record, const char* key) {
    const json& value = require_field(record, key);
    if (!value.is_string()) throw ValidationError(std::string("field '") + key + "' must be a string");
    return value.get<std::string>();
}

int require_positive_int(const json& record, const char* key) {
    const json& value = require_field(record, key);
    if (!value.is_number_integer() || value.get<int64_t>() < 1) {
        throw ValidationError(std::string("field '") + key + "' must be a positive integer");
    }
    return static_cast<int>(value.get<int64_t>());
}

double require_number(const json& value, const char* what) {
    if (!value.is_number()) throw ValidationError(std::string(what) + " must be a number");
    return value.get<double>();
}

// Box array [x, y_top, w, h] in top-left y-down coordinates.
BBox parse_box(const json& value, int image_height) {
    if (!value.is_array() || value.size() != 4) {
        throw ValidationError("box must be an array [x, y, w, h]");
    }
    double fields[4];
    for (size_t i = 0; i < 4; ++i) {
        fields[i] = require_number(value[i], "box coordinate");
        if (!std::isfinite(fields[i])) throw ValidationError("box coordinates must be finite");
    }
    if (fields[2] <= 0.0 || fields[3] <= 0.0) {
        throw ValidationError("box extents must be positive");
    }
    return box_from_topdown(fields[0], fields[1], fields[2], fields[3],
                            static_cast<double>(image_height));
}

json box_to_json(const BBox& box, int image_height) {
    auto td = box_to_topdown(box, static_cast<double>(image_height));
    return json::array({td[0], td[1], td[2], td[3]});
}

// Runs `parse` per JSONL line. JSON syntax errors are fatal in both modes;
// semantic errors (ValidationError from parse) are fatal only in strict mode.
template <typename Parse>
void for_each_line(const std::filesystem::path& path, const LoadOptions& options, LoadStats* stats,
                   Parse parse) {
    std::ifstream in = open_input(path);
    std::string line;
    size_t line_no = 0;
    size_t skipped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            line_error(path, line_no, std::string("malformed JSON: ") + e.what());
        }
        try {
            parse(record, line_no);
        } catch (const ValidationError& e) {
            if (options.strict) line_error(path, line_no, e.what());
            ++skipped;
            logging::warn(path.string() + ":" + std::to_string(line_no) + ": skipped: " + e.what());
        }
    }
    if (stats != nullptr) stats->skipped_lines += skipped;
}

uint64_t fnv1a64(std::string_view text) {
    uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

std::string to_hex(uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string sanitize_filename(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (char c : text) {
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    }
    return out;
}

}  // namespace

// ---- JSONL datasets ---------------------------------------------------------

std::vector<SceneGraphRecord> load_corpus(const std::filesystem::path& path,
                                          const LoadOptions& options, LoadStats* stats) {
    std::vector<SceneGraphRecord> records;
    for_each_line(path, options, stats, [&](const json& record, size_t) {
        SceneGraphRecord out;
        out.image_id = require_string(record, "image_id");
        out.width = require_positive_int(record, "width");
        out.height = require_positive_int(record, "height");

        const json& objects = require_field(record, "objects");
        if (!objects.is_array()) throw ValidationError("field 'objects' must be an array");
        for (const json& obj : objects) {
            SceneGraphObject o;
            o.id = require_string(obj, "id");
            o.category = require_string(obj, "category");
            o.box = parse_box(require_field(obj, "box"), out.height);
            out.objects.push_back(std::move(o));
        }

        if (record.contains("relations")) {
            const json& relations = record["relations"];
            if (!relations.is_array()) throw ValidationError("field 'relations' must be an array");
            for (const json& rel : relations) {
                SceneGraphRelation r;
                r.subject = require_string(rel, "subject");
                r.predicate = require_string(rel, "predicate");
                r.object = require_string(rel, "object");
                out.relations.push_back(std::move(r));
            }
        }
        records.push_back(std::move(out));
    });
    return records;
}

void save_corpus(std::span<const SceneGraphRecord> records, const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& record : records) {
        json objects = json::array();
        for (const auto& obj : record.objects) {
            objects.push_back(
                {{"id", obj.id}, {"category", obj.category}, {"box", box_to_json(obj.box, record.height)}});
        }
        json relations = json::array();
        for (const auto& rel : record.relations) {
            relations.push_back(
                {{"subject", rel.subject}, {"predicate", rel.predicate}, {"object", rel.object}});
        }
        json line = {{"image_id", record.image_id},
                     {"width", record.width},
                     {"height", record.height},
                     {"objects", std::move(objects)},
                     {"relations", std::move(relations)}};
        out << line.dump() << '\n';
    }
}

std::vector<SceneDetections> load_detections(const std::filesystem::path& path,
                                             const Vocabulary& vocab, const LoadOptions& options,
                                             LoadStats* stats) {
    std::vector<SceneDetections> scenes;
    size_t ignored_keys = 0;
    for_each_line(path, options, stats, [&](const json& record, size_t) {
        SceneDetections scene;
        scene.image_id = require_string(record, "image_id");
        scene.width = require_positive_int(record, "width");
        scene.height = require_positive_int(record, "height");

        const json& detections = require_field(record, "detections");
        if (!detections.is_array()) throw ValidationError("field 'detections' must be an array");
        for (const json& det : detections) {
            DetectedObject obj;
            obj.box = parse_box(require_field(det, "box"), scene.height);
            if (!clamp_box(obj.box, scene.width, scene.height)) {
                throw ValidationError("detection box lies entirely outside the image");
            }
            obj.scores.assign(vocab.context().size(), 0.0);
            const json& scores = require_field(det, "scores");
            if (!scores.is_object()) throw ValidationError("field 'scores' must be an object");
            for (const auto& [name, value] : scores.items()) {
                double v = require_number(value, "detection score");
                if (v < 0.0 || v > 1.0 || !std::isfinite(v)) {
                    throw ValidationError("detection score for '" + name + "' must lie in [0, 1]");
                }
                int j = vocab.context_index(name);
                if (j < 0) {
                    if (options.strict) {
                        throw ValidationError("unknown context category '" + name + "'");
                    }
                    ++ignored_keys;
                    continue;
                }
                obj.scores[static_cast<size_t>(j)] = v;
            }
            scene.detections.push_back(std::move(obj));
        }
        scenes.push_back(std::move(scene));
    });
    if (stats != nullptr) stats->ignored_score_keys += ignored_keys;
    if (ignored_keys > 0) {
        logging::warn(path.string() + ": ignored " + std::to_string(ignored_keys) +
                      " detection scores for categories outside the context vocabulary");
    }
    return scenes;
}

void save_detections(std::span<const SceneDetections> scenes,
                     std::span<const std::string> context_names,
                     const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    for (const auto& scene : scenes) {
        json detections = json::array();
        for (const auto& det : scene.detections) {
            if (det.scores.size() != context_names.size()) {
                throw ContractViolationError(
                    "save_detections: score vector does not match the context name list");
            }
            json scores = json::object();
            for (size_t j = 0; j < context_names.size(); ++j) {
                if (det.scores[j] != 0.0) scores[context_names[j]] = det.scores[j];
            }
            detections.push_back(
                {{"box", box_to_json(det.box, scene.height)}, {"scores", std::move(scores)}});
        }
        json line = {{"image_id", scene.image_id},
                     {"width", scene.width},
                     {"height", scene.height},
                     {"detections", std::move(detections)}};
        out << line.dump() << '\n';
    }
}

std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               const LoadOptions& options, LoadStats* stats) {
    std::vector<AnnotationRecord> records;
    std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    for_each_line(path, options, stats, [&](const json& record, size_t) {
        AnnotationRecord out;
        out.image_id = require_string(record, "image_id");
        out.annotator_id = require_string(record, "annotator_id");
        out.category = require_string(record, "category");

        const json& pref = require_field(record, "preference");
        if (!pref.is_number_integer()) throw ValidationError("field 'preference' must be an integer");
        out.preference = static_cast<int>(pref.get<int64_t>());
        if (out.preference != 1 && out.preference != 2) {
            throw ValidationError("preference must be 1 or 2");
        }

        out.box_size = require_number(require_field(record, "box_size"), "box_size");
        if (!(out.box_size > 0.0) || !std::isfinite(out.box_size)) {
            throw ValidationError("box_size must be a positive number");
        }

        std::string mask_rel = require_string(record, "region_mask");
        try {
            out.region = read_mask(base / mask_rel);
        } catch (const Error& e) {
            throw ValidationError(std::string("region mask '") + mask_rel + "': " + e.what());
        }
        records.push_back(std::move(out));
    });
    return records;
}

void save_annotations(std::span<const AnnotationRecord> records,
                      const std::filesystem::path& path) {
    std::ofstream out = open_output(path);
    std::filesystem::path base = path.has_parent_path() ? path.parent_path() : ".";
    for (const auto& record : records) {
        std::string mask_rel = "masks/" + sanitize_filename(record.image_id) + "_" +
                               sanitize_filename(record.category) + "_" +
                               sanitize_filename(record.annotator_id) + ".pgm";
        write_mask(record.region, base / mask_rel);
        json line = {{"image_id", record.image_id}, {"annotator_id", record.annotator_id},
                     {"category", record.category},  {"preference", record.preference},
                     {"box_size", record.box_size},  {"region_mask", mask_rel}};
        out << line.dump() << '\n';
    }
}

// ---- model file --------------------------------------------------------------

namespace {

constexpr int kModelFormatVersion = 1;
constexpr const char* kModelFormatName = "context-insert-model";

json model_payload(const ContextModel& model) {
    json payload;
    payload["vocabulary"] = {{"insertable", model.vocab().insertable()},
                             {"context", model.vocab().context()},
                             {"relations", model.vocab().relations()}};

    json category = json::array();
    for (const auto& [name, count] : model.counts().category) {
        category.push_back(json::array({name, count}));
    }
    json pair = json::array();
    for (const auto& [key, count] : model.counts().pair) {
        pair.push_back(json::array({key.first, key.second, count}));
    }
    json triple = json::array();
    for (const auto& [key, count] : model.counts().triple) {
        triple.push_back(json::array({key.subject, key.relation, key.object, count}));
    }
    payload["counts"] = {{"category", std::move(category)},
                         {"pair", std::move(pair)},
                         {"triple", std::move(triple)}};

    const ScorerConfig& cfg = model.config();
    payload["config"] = {{"det_threshold", cfg.det_threshold},
                         {"max_context", cfg.max_context},
                         {"scales", cfg.scales},
                         {"stride_ratio", cfg.stride_ratio},
                         {"refine_values", cfg.refine_values}};

    const FitConfig& fit = model.fit_config();
    payload["fit"] = {{"k", fit.k},           {"max_iter", fit.max_iter}, {"tol", fit.tol},
                      {"reg_covar", fit.reg_covar}, {"seed", fit.seed},   {"n_init", fit.n_init}};

    json gmms = json::array();
    for (const auto& entry : model.gmms()) {
        json weights = json::array();
        json means = json::array();
        json covariances = json::array();
        for (size_t k = 0; k < entry.gmm.k(); ++k) {
            weights.push_back(entry.gmm.weights[k]);
            const Gaussian& g = entry.gmm.components[k];
            json mean = json::array();
            for (int i = 0; i < 4; ++i) mean.push_back(g.mean()[i]);
            json cov = json::array();
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) cov.push_back(g.covariance()(r, c));
            }
            means.push_back(std::move(mean));
            covariances.push_back(std::move(cov));
        }
        gmms.push_back({{"subject", entry.key.subject},
                        {"relation", entry.key.relation},
                        {"object", entry.key.object},
                        {"context_weight", entry.context_weight},
                        {"weights", std::move(weights)},
                        {"means", std::move(means)},
                        {"covariances", std::move(covariances)}});
    }
    payload["gmms"] = std::move(gmms);
    return payload;
}

}  // namespace

void save_model(const ContextModel& model, const std::filesystem::path& path) {
    json payload = model_payload(model);
    json file = {{"format", kModelFormatName},
                 {"format_version", kModelFormatVersion},
                 {"checksum", "fnv1a64:" + to_hex(fnv1a64(payload.dump()))},
                 {"payload", std::move(payload)}};
    std::ofstream out = open_output(path);
    out << file.dump(2) << '\n';
    if (!out) throw ValidationError("failed writing model file: " + path.string());
}

ContextModel load_model(const std::filesystem::path& path) {
    std::ifstream in = open_input(path);
    json file;
    try {
        file = json::parse(in);
    } catch (const json::exception& e) {
        throw CorruptModelError("model file " + path.string() + " is not valid JSON: " + e.what());
    }

    try {
        const json& version = require_field(file, "format_version");
        if (!version.is_number_integer() || version.get<int64_t>() != kModelFormatVersion) {
            throw UnsupportedVersionError(
                "model file " + path.string() + " uses format version " + version.dump() +
                "; this build understands version " + std::to_string(kModelFormatVersion));
        }
        const json& payload = require_field(file, "payload");
        std::string checksum = require_string(file, "checksum");
        std::string expected = "fnv1a64:" + to_hex(fnv1a64(payload.dump()));
        if (checksum != expected) {
            throw CorruptModelError("model file " + path.string() +
                                    " failed its checksum; the file is corrupt");
        }

        const json& vocab_json = require_field(payload, "vocabulary");
        Vocabulary vocab(require_field(vocab_json, "insertable").get<std::vector<std::string>>(),
                         require_field(vocab_json, "context").get<std::vector<std::string>>(),
                         require_field(vocab_json, "relations").get<std::vector<std::string>>());

        CountTables counts;
        const json& counts_json = require_field(payload, "counts");
        for (const json& item : require_field(counts_json, "category")) {
            counts.category[item.at(0).get<std::string>()] = item.at(1).get<int64_t>();
        }
        for (const json& item : require_field(counts_json, "pair")) {
            counts.pair[{item.at(0).get<std::string>(), item.at(1).get<std::string>()}] =
                item.at(2).get<int64_t>();
        }
        for (const json& item : require_field(counts_json, "triple")) {
            counts.triple[{item.at(0).get<std::string>(), item.at(1).get<std::string>(),
                           item.at(2).get<std::string>()}] = item.at(3).get<int64_t>();
        }

        const json& cfg_json = require_field(payload, "config");
        ScorerConfig cfg;
        cfg.det_threshold = require_field(cfg_json, "det_threshold").get<double>();
        cfg.max_context = require_field(cfg_json, "max_context").get<int>();
        cfg.scales = require_field(cfg_json, "scales").get<std::vector<double>>();
        cfg.stride_ratio = require_field(cfg_json, "stride_ratio").get<double>();
        cfg.refine_values = require_field(cfg_json, "refine_values").get<int>();

        const json& fit_json = require_field(payload, "fit");
        FitConfig fit;
        fit.k = require_field(fit_json, "k").get<int>();
        fit.max_iter = require_field(fit_json, "max_iter").get<int>();
        fit.tol = require_field(fit_json, "tol").get<double>();
        fit.reg_covar = require_field(fit_json, "reg_covar").get<double>();
        fit.seed = require_field(fit_json, "seed").get<uint64_t>();
        fit.n_init = require_field(fit_json, "n_init").get<int>();

        std::vector<TripleGmm> gmms;
        for (const json& entry : require_field(payload, "gmms")) {
            TripleGmm out;
            out.key = {require_string(entry, "subject"), require_string(entry, "relation"),
                       require_string(entry, "object")};
            out.context_weight = require_field(entry, "context_weight").get<double>();
            const json& weights = require_field(entry, "weights");
            const json& means = require_field(entry, "means");
            const json& covariances = require_field(entry, "covariances");
            if (weights.size() != means.size() || weights.size() != covariances.size() ||
                weights.empty()) {
                throw CorruptModelError("model triple " + to_string(out.key) +
                                        " has inconsistent component arrays");
            }
            for (size_t k = 0; k < weights.size(); ++k) {
                out.gmm.weights.push_back(weights[k].get<double>());
                if (!means[k].is_array() || means[k].size() != 4 || !covariances[k].is_array() ||
                    covariances[k].size() != 16) {
                    throw CorruptModelError("model triple " + to_string(out.key) +
                                            " has malformed component parameters");
                }
                Eigen::Vector4d mean;
                for (int i = 0; i < 4; ++i) mean[i] = means[k][static_cast<size_t>(i)].get<double>();
                Eigen::Matrix4d cov;
                for (int r = 0; r < 4; ++r) {
                    for (int c = 0; c < 4; ++c) {
                        cov(r, c) = covariances[k][static_cast<size_t>(r * 4 + c)].get<double>();
                    }
                }
                out.gmm.components.emplace_back(mean, cov);
            }
            gmms.push_back(std::move(out));
        }

        return ContextModel(std::move(vocab), std::move(counts), std::move(gmms), std::move(cfg),
                            fit);
    } catch (const json::exception& e) {
        throw CorruptModelError("model file " + path.string() + " is structurally invalid: " +
                                e.what());
    }
}

// ---- PGM ----------------------------------------------------------------------

void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const uint8_t> rows_topdown) {
    if (width < 1 || height < 1) {
        throw ContractViolationError("write_pgm: raster dimensions must be positive");
    }
    if (rows_topdown.size() != static_cast<size_t>(width) * static_cast<size_t>(height)) {
        throw ContractViolationError("write_pgm: pixel buffer does not match dimensions");
    }
    std::ofstream out = open_output(path);
    out << "P5\n" << width << " " << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(rows_topdown.data()),
              static_cast<std::streamsize>(rows_topdown.size()));
    if (!out) throw ValidationError("failed writing PGM file: " + path.string());
}

std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height) {
    std::ifstream in = open_input(path);
    auto next_token = [&]() -> std::string {
        std::string token;
        while (true) {
            int c = in.get();
            if (c == EOF) {
                if (!token.empty()) return token;
                throw ValidationError("truncated PGM header in " + path.string());
            }
            if (c == '#') {  // comment to end of line
                while (c != EOF && c != '\n') c = in.get();
                continue;
            }
            if (std::isspace(c)) {
                if (!token.empty()) return token;
                continue;
            }
            token.push_back(static_cast<char>(c));
        }
    };

    if (next_token() != "P5") throw ValidationError(path.string() + " is not a binary (P5) PGM");
    int maxval;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw ValidationError("malformed PGM header in " + path.string());
    }
    if (width < 1 || height < 1) throw ValidationError("invalid PGM dimensions in " + path.string());
    if (maxval < 1 || maxval > 255) {
        throw ValidationError(path.string() + " uses an unsupported PGM maxval");
    }

    std::vector<uint8_t> pixels(static_cast<size_t>(width) * static_cast<size_t>(height));
    in.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(pixels.size())) {
        throw ValidationError("truncated PGM pixel data in " + path.string());
    }
    return pixels;
}

RegionMask read_mask(const std::filesystem::path& path) {
    RegionMask mask;
    std::vector<uint8_t> topdown = read_pgm(path, mask.width, mask.height);
    mask.bitmap.resize(topdown.size());
    for (int y = 0; y < mask.height; ++y) {
        const uint8_t* src = topdown.data() + static_cast<size_t>(mask.height - 1 - y) * mask.width;
        uint8_t* dst = mask.bitmap.data() + static_cast<size_t>(y) * mask.width;
        for (int x = 0; x < mask.width; ++x) dst[x] = src[x] > 0 ? 1 : 0;
    }
    return mask;
}

void write_mask(const RegionMask& mask, const std::filesystem::path& path) {
    std::vector<uint8_t> topdown(mask.bitmap.size());
    for (int y = 0; y < mask.height; ++y) {
        const uint8_t* src = mask.bitmap.data() + static_cast<size_t>(y) * mask.width;
        uint8_t* dst = topdown.data() + static_cast<size_t>(mask.height - 1 - y) * mask.width;
        for (int x = 0; x < mask.width; ++x) dst[x] = src[x] != 0 ? 255 : 0;
    }
    write_pgm(path, mask.width, mask.height, topdown);
}

void write_heatmap(const Heatmap& heatmap, const std::filesystem::path& path) {
    if (heatmap.width < 1 || heatmap.height < 1) {
        throw ContractViolationError("write_heatmap: raster must be non-empty");
    }
    double max_value = 0.0;
    for (double v : heatmap.raster) max_value = std::max(max_value, v);

    std::vector<uint8_t> topdown(heatmap.raster.size());
    for (int y = 0; y < heatmap.height; ++y) {
        for (int x = 0; x < heatmap.width; ++x) {
            double v = heatmap.at(x, y);
            uint8_t byte = 0;
            if (max_value > 0.0) {
                byte = static_cast<uint8_t>(std::lround(v / max_value * 255.0));
            }
            topdown[static_cast<size_t>(heatmap.height - 1 - y) * heatmap.width + x] = byte;
        }
    }
    write_pgm(path, heatmap.width, heatmap.height, topdown);

    json sidecar = {{"image_id", heatmap.image_id},
                    {"category", heatmap.category},
                    {"width", heatmap.width},
                    {"height", heatmap.height},
                    {"max_value", max_value}};
    std::ofstream out = open_output(path.string() + ".json");
    out << sidecar.dump(2) << '\n';
}

Heatmap read_heatmap(const std::filesystem::path& path) {
    Heatmap heatmap;
    std::vector<uint8_t> topdown = read_pgm(path, heatmap.width, heatmap.height);

    std::ifstream side = open_input(path.string() + ".json");
    json sidecar;
    try {
        sidecar = json::parse(side);
    } catch (const json::exception& e) {
        throw ValidationError("heatmap sidecar for " + path.string() + " is invalid: " + e.what());
    }
    heatmap.image_id = require_string(sidecar, "image_id");
    heatmap.category = require_string(sidecar, "category");
    double max_value = require_field(sidecar, "max_value").get<double>();

    heatmap.raster.resize(topdown.size());
    for (int y = 0; y < heatmap.height; ++y) {
        for (int x = 0; x < heatmap.width; ++x) {
            uint8_t byte = topdown[static_cast<size_t>(heatmap.height - 1 - y) * heatmap.width + x];
            heatmap.at(x, y) = max_value > 0.0 ? byte / 255.0 * max_value : 0.0;
        }
    }
    return heatmap;
}

}  // namespace ctxinsert
