// camoseg command line: run, synth, eval, ablate.
//
// Exit codes: 0 success, 1 usage or fatal error, 2 failure budget exceeded.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>

#include "camoseg/harness.hpp"
#include "camoseg/image_io.hpp"
#include "camoseg/remote.hpp"

namespace fs = std::filesystem;
using namespace camoseg;

namespace
{

struct RunFlags
{
    std::optional<std::string> config;
    std::optional<std::string> images;
    std::optional<std::string> gt;
    std::optional<std::string> out;
    std::optional<std::string> name;
    std::optional<std::size_t> repeats;
    std::optional<double> threshold;
    std::optional<std::string> cap;
    std::optional<int> spacing;
    std::optional<std::string> prompts;
    std::optional<std::string> mode;
    std::optional<std::string> region;
    std::optional<std::string> backend_mllm;
    std::optional<std::string> backend_vlm;
    std::optional<std::string> backend_vfm;
    std::optional<std::size_t> workers;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scenes;
    std::size_t count = 50;
    std::vector<double> noise{0.0};
    bool synthetic = false;
    bool diagnostic = false;
    bool wo_msdcot = false;
    bool wo_rdvp = false;
    bool consensus_baseline = false;
    bool global_region = false;
    bool wo_tmg1 = false;
    bool wo_tmg2 = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f)
{
    cmd->add_option("--config", f.config, "JSON config file; flags win over its values")->check(CLI::ExistingFile);
    cmd->add_option("--images", f.images, "Image directory");
    cmd->add_option("--gt", f.gt, "Ground-truth mask directory");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--name", f.name, "Dataset name used in reports");
    cmd->add_option("--repeats", f.repeats, "Pipeline repetitions per image");
    cmd->add_option("--threshold", f.threshold, "Point-selection threshold in (0, 1]");
    cmd->add_option("--cap", f.cap, "Maximum points per stream, or 'inf'");
    cmd->add_option("--spacing", f.spacing, "Minimum Chebyshev distance between points");
    cmd->add_option("--prompts", f.prompts, "Comma-separated task-generic synonyms");
    cmd->add_option("--mode", f.mode, "dual-stream | consensus-baseline")
        ->check(CLI::IsMember({"dual-stream", "consensus-baseline"}));
    cmd->add_option("--region", f.region, "box-constrained | global")->check(CLI::IsMember({"box-constrained", "global"}));
    cmd->add_option("--backend-mllm", f.backend_mllm, "MLLM endpoint URL");
    cmd->add_option("--backend-vlm", f.backend_vlm, "VLM endpoint URL");
    cmd->add_option("--backend-vfm", f.backend_vfm, "VFM endpoint URL");
    cmd->add_option("--workers", f.workers, "Images processed concurrently");
    cmd->add_option("--seed", f.seed, "Seed for generated synthetic scenes");
    cmd->add_flag("--synthetic", f.synthetic, "Use the synthetic backends");
    cmd->add_option("--scenes", f.scenes, "Scene manifest for --synthetic (default: scenes.json beside --images)");
    cmd->add_option("--count", f.count, "Scenes to generate when --synthetic runs without --images");
    cmd->add_option("--noise", f.noise, "Noise levels for generated scenes")->delimiter(',');
    cmd->add_flag("--diagnostic", f.diagnostic, "Write overlay images");
    cmd->add_flag("--wo-msdcot", f.wo_msdcot, "Query keywords directly after the caption");
    cmd->add_flag("--wo-rdvp", f.wo_rdvp, "Consensus map with global point selection");
    cmd->add_flag("--consensus-baseline", f.consensus_baseline, "Select points from a single fg - bg map");
    cmd->add_flag("--global-region", f.global_region, "Select points over the whole image");
    cmd->add_flag("--wo-tmg1", f.wo_tmg1, "Skip the coarse stage");
    cmd->add_flag("--wo-tmg2", f.wo_tmg2, "Skip the fine stage");
}

void set_remote(BackendConfig& b, const std::optional<std::string>& endpoint)
{
    if (endpoint) {
        b.kind = BackendConfig::Kind::Remote;
        b.endpoint = *endpoint;
    }
}

RunConfig resolve_config(const RunFlags& f)
{
    RunConfig c = f.config ? load_run_config(*f.config) : RunConfig{};
    if (f.out)
        c.output_dir = *f.out;
    if (f.repeats)
        c.repetitions = *f.repeats;
    if (f.threshold)
        c.rdvp.threshold = *f.threshold;
    if (f.cap)
        c.rdvp.cap = *f.cap == "inf" ? RdvpConfig::kUncapped : std::stoul(*f.cap);
    if (f.spacing)
        c.rdvp.spacing = *f.spacing;
    if (f.mode)
        c.rdvp.mode = *f.mode == "consensus-baseline" ? RdvpConfig::Mode::ConsensusBaseline : RdvpConfig::Mode::DualStream;
    if (f.region)
        c.rdvp.region = *f.region == "global" ? RdvpConfig::Region::Global : RdvpConfig::Region::BoxConstrained;
    if (f.prompts)
        apply_config_json(c, {{"prompts", *f.prompts}});
    if (f.workers)
        c.workers = *f.workers;
    if (f.seed)
        c.seed = *f.seed;
    if (f.synthetic)
        c.mllm.kind = c.vlm.kind = c.vfm.kind = BackendConfig::Kind::Synthetic;
    set_remote(c.mllm, f.backend_mllm);
    set_remote(c.vlm, f.backend_vlm);
    set_remote(c.vfm, f.backend_vfm);
    c.diagnostic_mode |= f.diagnostic;
    c.ablation.wo_msdcot |= f.wo_msdcot;
    c.ablation.wo_rdvp |= f.wo_rdvp;
    c.ablation.consensus_baseline |= f.consensus_baseline;
    c.ablation.global_region |= f.global_region;
    c.ablation.wo_tmg1 |= f.wo_tmg1;
    c.ablation.wo_tmg2 |= f.wo_tmg2;
    c.validate();
    return c;
}

bool any_synthetic(const RunConfig& c)
{
    using K = BackendConfig::Kind;
    return c.mllm.kind == K::Synthetic || c.vlm.kind == K::Synthetic || c.vfm.kind == K::Synthetic;
}

struct Workload
{
    Dataset dataset;
    Backends backends;
};

Workload prepare(const RunFlags& f, const RunConfig& c)
{
    Workload w;
    std::vector<SyntheticScene> scenes;
    if (f.images || f.gt) {
        if (!f.images || !f.gt)
            throw CLI::ValidationError("--images and --gt go together");
        w.dataset = load_dataset({*f.images, *f.gt, f.name.value_or(fs::path(*f.images).parent_path().filename().string()), {}});
        for (const auto& issue : w.dataset.issues)
            std::cerr << "dataset: " << issue.id << ": " << issue.problem << "\n";
        if (any_synthetic(c)) {
            const fs::path manifest = f.scenes ? fs::path(*f.scenes) : fs::path(*f.images).parent_path() / "scenes.json";
            scenes = read_scene_manifest(manifest);
        }
    } else {
        if (!any_synthetic(c))
            throw CLI::ValidationError("--images and --gt are required with remote backends");
        scenes = f.scenes ? read_scene_manifest(*f.scenes)
                          : make_synthetic_suite(f.count, f.noise, c.seed, {}).scenes;
        w.dataset = synthetic_dataset(scenes, f.name.value_or("synthetic"));
    }
    if (w.dataset.pairs.empty())
        throw std::runtime_error("dataset holds no usable image/mask pairs");

    Backends synthetic;
    if (any_synthetic(c))
        synthetic = make_synthetic_backends(make_registry(scenes));
    using K = BackendConfig::Kind;
    Backends remote;
    if (c.mllm.kind == K::Remote || c.vlm.kind == K::Remote || c.vfm.kind == K::Remote) {
        // Placeholder endpoints keep the unused remote slots constructible.
        auto slot = [](BackendConfig b) {
            if (b.kind == K::Synthetic)
                b.endpoint = "http://127.0.0.1:9";
            return b;
        };
        remote = make_remote_backends(slot(c.mllm), slot(c.vlm), slot(c.vfm));
    }
    w.backends.mllm = c.mllm.kind == K::Remote ? remote.mllm : synthetic.mllm;
    w.backends.vlm = c.vlm.kind == K::Remote ? remote.vlm : synthetic.vlm;
    w.backends.vfm = c.vfm.kind == K::Remote ? remote.vfm : synthetic.vfm;
    return w;
}

void print_summary(const std::string& name, const BenchmarkResult& r)
{
    const MetricRow& m = r.report.mean;
    std::printf("dataset   %s\n", name.c_str());
    std::printf("images    %zu\n", r.images.size());
    std::printf("succeeded %zu\n", r.report.rows.size());
    std::printf("failed    %zu\n", r.failures);
    std::printf("S_alpha   %.6f\n", m.s_alpha);
    std::printf("F_beta    %.6f\n", m.f_beta);
    std::printf("MAE       %.6f\n", m.mae);
    std::printf("E_m       %.6f\n", m.e_m);
    for (const auto& img : r.images)
        if (!img.ok)
            std::printf("failure   %s: %s\n", img.id.c_str(), img.error.c_str());
}

int cmd_run(const RunFlags& f)
{
    const RunConfig c = resolve_config(f);
    const Workload w = prepare(f, c);
    const BenchmarkResult r = run_benchmark(c, w.dataset, w.backends);
    print_summary(w.dataset.name, r);
    if (r.budget_exceeded) {
        std::fprintf(stderr, "error: %zu of %zu images failed (budget %.0f%%)\n", r.failures, r.images.size(),
                     c.failure_budget * 100);
        return 2;
    }
    return 0;
}

int cmd_ablate(const RunFlags& f, const std::string& matrix)
{
    const RunConfig c = resolve_config(f);
    const Workload w = prepare(f, c);
    std::vector<AblationVariant> variants;
    if (matrix == "modules" || matrix == "all")
        for (auto v : module_ablation_variants())
            variants.push_back(std::move(v));
    if (matrix == "rdvp" || matrix == "all")
        for (auto v : rdvp_ablation_variants())
            variants.push_back(std::move(v));
    if (matrix == "repeats" || matrix == "all")
        for (auto v : repetition_sweep(1, 6))
            variants.push_back(std::move(v));
    for (auto& v : variants)
        if (v.name.rfind("repeat-", 0) != 0)
            v.repetitions = c.repetitions;

    const auto rows = run_ablation(c, w.dataset, w.backends, variants);
    const std::string md = render_ablation_markdown(rows);
    std::cout << md;
    if (!c.output_dir.empty()) {
        std::ofstream(c.output_dir / "ablation.csv") << render_ablation_csv(rows);
        std::ofstream(c.output_dir / "ablation.md") << md;
    }
    for (const auto& r : rows)
        if (static_cast<double>(r.failures) > c.failure_budget * static_cast<double>(w.dataset.pairs.size()))
            return 2;
    return 0;
}

int cmd_synth(const fs::path& out, std::size_t count, const std::vector<double>& noise, std::uint64_t seed,
              const SceneOptions& options)
{
    const SyntheticSuite suite = make_synthetic_suite(count, noise, seed, out, options);
    std::printf("wrote %zu scenes to %s\n", suite.scenes.size(), out.string().c_str());
    return 0;
}

int cmd_eval(const fs::path& pred_dir, const fs::path& gt_dir, const std::optional<std::string>& out, bool sweep)
{
    Dataset gts = load_dataset({pred_dir, gt_dir, "eval", {}});
    for (const auto& issue : gts.issues)
        std::cerr << "eval: " << issue.id << ": " << issue.problem << "\n";

    std::vector<std::pair<std::string, Heatmap>> preds;
    std::vector<std::pair<std::string, BinaryMask>> truths;
    std::map<std::string, fs::path> pred_paths;
    for (const auto& entry : fs::directory_iterator(pred_dir))
        if (entry.is_regular_file())
            pred_paths[entry.path().stem().string()] = entry.path();
    for (const auto& pair : gts.pairs) {
        preds.emplace_back(pair.image.id(), load_soft_map(pred_paths.at(pair.image.id())));
        truths.emplace_back(pair.image.id(), pair.gt);
    }
    EvaluationOptions options;
    options.sweep_e_measure = sweep;
    const MetricReport report = evaluate_pairs(preds, truths, options);
    const std::string csv = render_csv(report);
    std::cout << csv;
    if (out) {
        fs::create_directories(*out);
        std::ofstream(fs::path(*out) / "report.csv") << csv;
        std::ofstream(fs::path(*out) / "report.md") << render_markdown(report, "eval");
    }
    return gts.issues.empty() ? 0 : 2;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Training-free camouflaged object segmentation"};
    app.require_subcommand(1);

    RunFlags run_flags;
    auto* run = app.add_subcommand("run", "Segment a dataset and write masks plus a metric report");
    add_run_flags(run, run_flags);

    RunFlags ablate_flags;
    std::string matrix = "modules";
    auto* ablate = app.add_subcommand("ablate", "Run an ablation matrix");
    add_run_flags(ablate, ablate_flags);
    ablate->add_option("--matrix", matrix, "modules | rdvp | repeats | all")
        ->check(CLI::IsMember({"modules", "rdvp", "repeats", "all"}));

    std::string synth_out;
    std::size_t synth_count = 50;
    std::vector<double> synth_noise{0.0};
    std::uint64_t synth_seed = 0;
    SceneOptions synth_options;
    auto* synth = app.add_subcommand("synth", "Write a synthetic suite (images/, gt/, scenes.json)");
    synth->add_option("--out", synth_out, "Output directory")->required();
    synth->add_option("--count", synth_count, "Number of scenes")->check(CLI::PositiveNumber);
    synth->add_option("--noise", synth_noise, "Noise levels, cycled over scenes")->delimiter(',');
    synth->add_option("--seed", synth_seed, "Suite seed");
    synth->add_option("--max-decoys", synth_options.max_decoys, "Upper bound on decoy regions per scene");
    synth->add_option("--surround-margin", synth_options.surround_margin,
                      "Margin of the look-alike surround around each object; negative disables it");

    std::string eval_pred;
    std::string eval_gt;
    std::optional<std::string> eval_out;
    bool eval_sweep = false;
    auto* eval = app.add_subcommand("eval", "Score prediction masks against ground truth");
    eval->add_option("--pred", eval_pred, "Prediction directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--gt", eval_gt, "Ground-truth directory")->required()->check(CLI::ExistingDirectory);
    eval->add_option("--out", eval_out, "Directory for report.csv and report.md");
    eval->add_flag("--sweep-e", eval_sweep, "Average E-measure over 256 thresholds on soft predictions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*run)
            return cmd_run(run_flags);
        if (*ablate)
            return cmd_ablate(ablate_flags, matrix);
        if (*synth)
            return cmd_synth(synth_out, synth_count, synth_noise, synth_seed, synth_options);
        if (*eval)
            return cmd_eval(eval_pred, eval_gt, eval_out, eval_sweep);
    } catch (const CLI::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
