#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctxinsert/corpus.hpp"
#include "ctxinsert/rank_eval.hpp"
#include "ctxinsert/scorer.hpp"

namespace ctxinsert {

struct LoadOptions {
    // Strict mode turns semantic problems (unknown names, bad boxes, invalid
    // scores) into errors; lenient mode skips the offending line and counts
    // it. Unparseable JSON is an error in both modes.
    bool strict = false;
};

struct LoadStats {
    size_t skipped_lines = 0;
    size_t ignored_score_keys = 0;
};

// JSON Lines readers. All file formats use top-left y-down boxes; readers
// convert to the internal bottom-left y-up convention. Detection boxes are
// clamped to the image at ingestion; corpus boxes are taken as annotated.
std::vector<SceneGraphRecord> load_corpus(const std::filesystem::path& path,
                                          const LoadOptions& options = {},
                                          LoadStats* stats = nullptr);

std::vector<SceneDetections> load_detections(const std::filesystem::path& path,
                                             const Vocabulary& vocab,
                                             const LoadOptions& options = {},
                                             LoadStats* stats = nullptr);

// Region-mask paths inside the file are resolved relative to its directory.
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path,
                                               const LoadOptions& options = {},
                                               LoadStats* stats = nullptr);

// JSON Lines writers (deterministic: sorted keys, shortest round-trip floats).
void save_corpus(std::span<const SceneGraphRecord> records, const std::filesystem::path& path);
void save_detections(std::span<const SceneDetections> scenes,
                     std::span<const std::string> context_names,
                     const std::filesystem::path& path);
// Returns the mask path written for each record (relative to the JSONL file).
void save_annotations(std::span<const AnnotationRecord> records,
                      const std::filesystem::path& path);

// Versioned, checksummed model file. Loading a saved model reproduces
// scoring bit-identically.
void save_model(const ContextModel& model, const std::filesystem::path& path);
ContextModel load_model(const std::filesystem::path& path);

// 8-bit binary PGM. Rows are stored top-down in the file; mask/heatmap
// helpers flip to the internal y-up row order.
void write_pgm(const std::filesystem::path& path, int width, int height,
               std::span<const uint8_t> rows_topdown);
std::vector<uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height);

RegionMask read_mask(const std::filesystem::path& path);
void write_mask(const RegionMask& mask, const std::filesystem::path& path);

// Heatmap as max-scaled PGM plus a JSON sidecar (path + ".json") recording
// the true maximum so score ratios survive quantization.
void write_heatmap(const Heatmap& heatmap, const std::filesystem::path& path);
Heatmap read_heatmap(const std::filesystem::path& path);

}  // namespace ctxinsert
