// harness.hpp
//
// Dataset ingestion, benchmark execution, ablation matrices, synthetic suite
// generation and run configuration.
//
// Dataset layout: an images directory and a ground-truth directory whose
// files pair up by filename stem (COD10K / CAMO / CHAMELEON ship this way).
//
// Benchmark output directory:
//   masks/<id>.png        predicted masks, 8-bit {0, 255}
//   overlays/<id>.png     diagnostic mode only
//   diagnostics.jsonl     one JSON record per image
//   report.csv            id,s_alpha,f_beta,mae,e_m + "mean" row
//   report.md             three-decimal markdown table

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "camoseg/backends.hpp"
#include "camoseg/consensus.hpp"
#include "camoseg/metrics.hpp"
#include "camoseg/synthetic.hpp"

namespace camoseg
{

struct DatasetSpec
{
    std::filesystem::path images;
    std::filesystem::path ground_truth;
    std::string name;
    std::optional<std::size_t> expected_count;
};

struct DatasetPair
{
    ImageRef image;
    BinaryMask gt;
};

struct DatasetIssue
{
    std::string id;
    std::string problem;
};

struct Dataset
{
    std::string name;
    std::vector<DatasetPair> pairs; // sorted by id
    std::vector<DatasetIssue> issues;
};

/// Pairs images with ground truths by stem, binarizing GT at 128. Unpaired
/// files and dimension mismatches are reported as issues and skipped.
/// Throws std::runtime_error if a directory does not exist.
Dataset load_dataset(const DatasetSpec& spec);

struct AblationFlags
{
    bool wo_msdcot = false;          // caption -> keywords instead of the four-step chain
    bool wo_rdvp = false;            // consensus map + global selection
    bool consensus_baseline = false; // single fg - bg map
    bool global_region = false;      // select points over the whole image
    bool wo_tmg1 = false;            // skip the coarse stage
    bool wo_tmg2 = false;            // skip the fine stage

    std::string describe() const;
};

struct RunConfig
{
    BackendConfig mllm;
    BackendConfig vlm;
    BackendConfig vfm;
    TaskGenericPrompt prompts;
    QueryTemplates templates;
    std::size_t repetitions = 3;
    RdvpConfig rdvp;
    int refine_margin = 0;
    AblationFlags ablation;
    std::filesystem::path output_dir;
    std::size_t workers = 1;
    std::size_t repetition_parallelism = 1;
    std::uint64_t seed = 0;
    /// Write overlays for every image.
    bool diagnostic_mode = false;
    /// Fraction of failed images above which a run counts as failed.
    double failure_budget = 0.10;

    void validate() const;
    PipelineConfig pipeline_config() const;
};

/// Overrides fields present in a JSON object (keys mirror the CLI flags:
/// repeats, threshold, cap, spacing, prompts, templates, ablation flags, ...).
void apply_config_json(RunConfig& config, const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

struct ImageOutcome
{
    std::string id;
    bool ok = false;
    std::string error;
    BinaryMask mask;
    std::optional<PipelineResult> pipeline;
};

struct BenchmarkResult
{
    MetricReport report;
    std::vector<ImageOutcome> images; // dataset order
    std::size_t failures = 0;
    bool budget_exceeded = false;
};

/// Runs the pipeline on every pair. Per-image failures are recorded and
/// skipped; the report covers successful images only. Artifacts are written
/// when config.output_dir is set.
BenchmarkResult run_benchmark(const RunConfig& config, const Dataset& dataset, const Backends& backends);

/// JSON record of one image's run (hierarchies, boxes, points, distances,
/// timings).
nlohmann::json diagnostics_record(const ImageOutcome& outcome);

struct AblationVariant
{
    std::string name;
    AblationFlags flags;
    std::size_t repetitions = 3;
};

/// The six module-removal variants.
std::vector<AblationVariant> module_ablation_variants();
/// The four dual-stream / region-constrained combinations.
std::vector<AblationVariant> rdvp_ablation_variants();
/// Repetition counts first..last with all modules on.
std::vector<AblationVariant> repetition_sweep(std::size_t first = 1, std::size_t last = 6);

struct AblationRow
{
    std::string variant;
    MetricRow mean;
    std::size_t images = 0;
    std::size_t failures = 0;
};

/// Runs each variant over the dataset (artifacts go to
/// <output_dir>/<variant name> when an output directory is set).
std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& dataset, const Backends& backends,
                                      const std::vector<AblationVariant>& variants);

std::string render_ablation_csv(const std::vector<AblationRow>& rows);
std::string render_ablation_markdown(const std::vector<AblationRow>& rows);

struct SyntheticSuite
{
    std::vector<SyntheticScene> scenes;
    DatasetSpec spec;
};

/// Generates `count` scenes cycling through `noise_levels`, writing
/// images/, gt/ and scenes.json under `directory` (skipped if empty).
SyntheticSuite make_synthetic_suite(std::size_t count, const std::vector<double>& noise_levels, std::uint64_t seed,
                                    const std::filesystem::path& directory, const SceneOptions& options = {});

nlohmann::json scene_to_json(const SyntheticScene& scene);
SyntheticScene scene_from_json(const nlohmann::json& j);
void write_scene_manifest(const std::filesystem::path& path, const std::vector<SyntheticScene>& scenes);
std::vector<SyntheticScene> read_scene_manifest(const std::filesystem::path& path);

std::shared_ptr<SceneRegistry> make_registry(const std::vector<SyntheticScene>& scenes);

/// In-memory dataset built from scenes (rendered images + planted GT).
Dataset synthetic_dataset(const std::vector<SyntheticScene>& scenes, std::string name = "synthetic");

} // namespace camoseg
