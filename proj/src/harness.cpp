#include "camoseg/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>

#include "camoseg/image_io.hpp"
#include "camoseg/parallel.hpp"

namespace camoseg
{

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

const std::set<std::string> kImageExtensions{".jpg", ".jpeg", ".png", ".bmp", ".tif", ".tiff", ".webp"};

std::string lower_ext(const fs::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

std::map<std::string, fs::path> index_by_stem(const fs::path& dir, std::vector<DatasetIssue>& issues)
{
    if (!fs::is_directory(dir))
        throw std::runtime_error("not a directory: " + dir.string());
    std::map<std::string, fs::path> out;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && kImageExtensions.count(lower_ext(entry.path())))
            files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        const std::string stem = f.stem().string();
        if (!out.emplace(stem, f).second)
            issues.push_back({stem, "duplicate stem in " + dir.string() + ": " + f.filename().string()});
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out << text;
}

json box_json(const BoundingBox& b)
{
    return json::array({b.x0, b.y0, b.x1, b.y1});
}

json points_json(const std::vector<Point>& pts)
{
    json arr = json::array();
    for (Point p : pts)
        arr.push_back({p.x, p.y});
    return arr;
}

json stage_json(const StageResult& s)
{
    return {{"stage", to_string(s.stage)},
            {"box", box_json(s.box_used)},
            {"fg_points", points_json(s.prompt.fg_points)},
            {"bg_points", points_json(s.prompt.bg_points)},
            {"degenerate_fg", s.prompt.degenerate_fg},
            {"degenerate_bg", s.prompt.degenerate_bg},
            {"box_only", s.box_only},
            {"mask_pixels", count_foreground(s.mask)}};
}

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace

Dataset load_dataset(const DatasetSpec& spec)
{
    Dataset ds;
    ds.name = spec.name;
    const auto images = index_by_stem(spec.images, ds.issues);
    const auto gts = index_by_stem(spec.ground_truth, ds.issues);

    for (const auto& [id, path] : images) {
        const auto gt_it = gts.find(id);
        if (gt_it == gts.end()) {
            ds.issues.push_back({id, "no ground truth for image " + path.filename().string()});
            continue;
        }
        try {
            ImageRef image = load_image(path, id);
            BinaryMask gt = load_mask(gt_it->second, 128);
            if (gt.width() != image.width() || gt.height() != image.height()) {
                ds.issues.push_back({id, "ground truth is " + std::to_string(gt.width()) + "x" +
                                             std::to_string(gt.height()) + ", image is " +
                                             std::to_string(image.width()) + "x" + std::to_string(image.height())});
                continue;
            }
            ds.pairs.push_back({std::move(image), std::move(gt)});
        } catch (const std::exception& e) {
            ds.issues.push_back({id, e.what()});
        }
    }
    for (const auto& [id, path] : gts)
        if (!images.count(id))
            ds.issues.push_back({id, "no image for ground truth " + path.filename().string()});
    if (spec.expected_count && *spec.expected_count != ds.pairs.size())
        ds.issues.push_back({spec.name, "expected " + std::to_string(*spec.expected_count) + " pairs, found " +
                                            std::to_string(ds.pairs.size())});
    return ds;
}

std::string AblationFlags::describe() const
{
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (on)
            out += (out.empty() ? "" : ",") + std::string(name);
    };
    add(wo_msdcot, "wo-msdcot");
    add(wo_rdvp, "wo-rdvp");
    add(consensus_baseline, "consensus-baseline");
    add(global_region, "global-region");
    add(wo_tmg1, "wo-tmg1");
    add(wo_tmg2, "wo-tmg2");
    return out.empty() ? "full" : out;
}

void RunConfig::validate() const
{
    if (repetitions < 1)
        throw ContractViolation("repeats must be at least 1");
    if (workers < 1)
        throw ContractViolation("workers must be at least 1");
    if (!(failure_budget >= 0 && failure_budget <= 1))
        throw ContractViolation("failure budget must lie in [0, 1]");
    mllm.validate();
    vlm.validate();
    vfm.validate();
    pipeline_config().validate();
}

PipelineConfig RunConfig::pipeline_config() const
{
    PipelineConfig p;
    p.repetitions = repetitions;
    p.prompts = prompts;
    p.templates = templates;
    p.parallelism = repetition_parallelism;
    p.stages.rdvp = rdvp;
    p.stages.refine_margin = refine_margin;
    p.direct_keywords = ablation.wo_msdcot;
    if (ablation.wo_rdvp || ablation.consensus_baseline)
        p.stages.rdvp.mode = RdvpConfig::Mode::ConsensusBaseline;
    if (ablation.wo_rdvp || ablation.global_region)
        p.stages.rdvp.region = RdvpConfig::Region::Global;
    p.stages.skip_coarse = ablation.wo_tmg1;
    p.stages.skip_fine = ablation.wo_tmg2;
    return p;
}

namespace
{

void apply_backend_json(BackendConfig& b, const json& j)
{
    if (j.contains("endpoint")) {
        b.endpoint = j.at("endpoint").get<std::string>();
        b.kind = BackendConfig::Kind::Remote;
    }
    if (j.contains("model"))
        b.model = j.at("model").get<std::string>();
    if (j.contains("timeout"))
        b.timeout_seconds = j.at("timeout").get<double>();
    if (j.contains("retries"))
        b.retries = j.at("retries").get<int>();
    if (j.contains("serialized"))
        b.serialized = j.at("serialized").get<bool>();
}

bool flag_value(const json& j, const std::string& snake)
{
    std::string kebab = snake;
    std::replace(kebab.begin(), kebab.end(), '_', '-');
    if (j.contains(snake))
        return j.at(snake).get<bool>();
    if (j.contains(kebab))
        return j.at(kebab).get<bool>();
    return false;
}

std::vector<std::string> split_list(const std::string& text)
{
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(' ');
        const auto b = item.find_last_not_of(' ');
        if (a != std::string::npos)
            out.push_back(item.substr(a, b - a + 1));
    }
    return out;
}

} // namespace

void apply_config_json(RunConfig& config, const json& j)
{
    if (!j.is_object())
        throw std::runtime_error("config file must hold a JSON object");
    if (j.contains("repeats"))
        config.repetitions = j.at("repeats").get<std::size_t>();
    if (j.contains("threshold"))
        config.rdvp.threshold = j.at("threshold").get<double>();
    if (j.contains("cap")) {
        const json& c = j.at("cap");
        config.rdvp.cap = c.is_string() && c.get<std::string>() == "inf" ? RdvpConfig::kUncapped : c.get<std::size_t>();
    }
    if (j.contains("spacing"))
        config.rdvp.spacing = j.at("spacing").get<int>();
    if (j.contains("mode"))
        config.rdvp.mode = j.at("mode").get<std::string>() == "consensus-baseline" ? RdvpConfig::Mode::ConsensusBaseline
                                                                                   : RdvpConfig::Mode::DualStream;
    if (j.contains("region"))
        config.rdvp.region =
            j.at("region").get<std::string>() == "global" ? RdvpConfig::Region::Global : RdvpConfig::Region::BoxConstrained;
    if (j.contains("refine_margin"))
        config.refine_margin = j.at("refine_margin").get<int>();
    if (j.contains("prompts")) {
        const json& p = j.at("prompts");
        config.prompts.synonyms = p.is_string() ? split_list(p.get<std::string>()) : p.get<std::vector<std::string>>();
    }
    if (j.contains("templates")) {
        const json& t = j.at("templates");
        for (auto [key, slot] : {std::pair{"caption", &config.templates.caption}, std::pair{"phrase", &config.templates.phrase},
                                 std::pair{"keyword", &config.templates.keyword}, std::pair{"box", &config.templates.box}})
            if (t.contains(key))
                *slot = t.at(key).get<std::string>();
    }
    const json& flags = j.contains("ablation") ? j.at("ablation") : j;
    config.ablation.wo_msdcot |= flag_value(flags, "wo_msdcot");
    config.ablation.wo_rdvp |= flag_value(flags, "wo_rdvp");
    config.ablation.consensus_baseline |= flag_value(flags, "consensus_baseline");
    config.ablation.global_region |= flag_value(flags, "global_region");
    config.ablation.wo_tmg1 |= flag_value(flags, "wo_tmg1");
    config.ablation.wo_tmg2 |= flag_value(flags, "wo_tmg2");
    if (j.contains("backends")) {
        const json& b = j.at("backends");
        if (b.contains("mllm"))
            apply_backend_json(config.mllm, b.at("mllm"));
        if (b.contains("vlm"))
            apply_backend_json(config.vlm, b.at("vlm"));
        if (b.contains("vfm"))
            apply_backend_json(config.vfm, b.at("vfm"));
    }
    if (j.contains("synthetic") && j.at("synthetic").get<bool>())
        config.mllm.kind = config.vlm.kind = config.vfm.kind = BackendConfig::Kind::Synthetic;
    if (j.contains("out"))
        config.output_dir = j.at("out").get<std::string>();
    if (j.contains("workers"))
        config.workers = j.at("workers").get<std::size_t>();
    if (j.contains("repetition_parallelism"))
        config.repetition_parallelism = j.at("repetition_parallelism").get<std::size_t>();
    if (j.contains("seed"))
        config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("diagnostics"))
        config.diagnostic_mode = j.at("diagnostics").get<bool>();
    if (j.contains("failure_budget"))
        config.failure_budget = j.at("failure_budget").get<double>();
}

RunConfig load_run_config(const fs::path& path, RunConfig base)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read config " + path.string());
    json j;
    try {
        j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
    apply_config_json(base, j);
    return base;
}

json diagnostics_record(const ImageOutcome& outcome)
{
    json rec{{"id", outcome.id}, {"status", outcome.ok ? "ok" : "failed"}};
    if (!outcome.ok)
        rec["error"] = outcome.error;
    if (!outcome.pipeline)
        return rec;
    const PipelineResult& r = *outcome.pipeline;
    rec["selected_repetition"] = r.selected_repetition;
    rec["consensus_members"] = r.consensus_members;
    rec["distances"] = r.consensus.distances;
    rec["prompts_cycled"] = r.prompts_cycled;
    rec["mask_pixels"] = count_foreground(r.mask);
    rec["seconds"] = r.seconds;
    json reps = json::array();
    for (const auto& rep : r.repetitions) {
        json jr{{"index", rep.index}, {"prompt", rep.prompt}, {"ok", rep.ok()}, {"seconds", rep.seconds}};
        if (rep.error)
            jr["error"] = *rep.error;
        jr["hierarchy"] = {{"caption", rep.hierarchy.caption},
                           {"fg_phrase", rep.hierarchy.fg_phrase},
                           {"bg_phrase", rep.hierarchy.bg_phrase},
                           {"fg_word", rep.hierarchy.fg_word},
                           {"bg_word", rep.hierarchy.bg_word}};
        jr["coarse_box"] = box_json(rep.coarse_box);
        jr["box_fallback"] = rep.box_fallback;
        jr["exchanges"] = rep.exchanges;
        if (rep.stages) {
            json stages = json::array();
            if (rep.stages->coarse)
                stages.push_back(stage_json(*rep.stages->coarse));
            if (rep.stages->fine)
                stages.push_back(stage_json(*rep.stages->fine));
            jr["stages"] = stages;
        }
        reps.push_back(jr);
    }
    rec["repetitions"] = reps;
    return rec;
}

BenchmarkResult run_benchmark(const RunConfig& config, const Dataset& dataset, const Backends& backends)
{
    config.validate();
    const PipelineConfig pipeline = config.pipeline_config();

    BenchmarkResult result;
    result.images.resize(dataset.pairs.size());
    parallel_for(dataset.pairs.size(), config.workers, [&](std::size_t i) {
        const DatasetPair& pair = dataset.pairs[i];
        ImageOutcome& out = result.images[i];
        out.id = pair.image.id();
        try {
            PipelineResult r = run_pipeline(pair.image, pipeline, backends);
            out.mask = r.mask;
            out.ok = true;
            out.pipeline = std::move(r);
        } catch (const PipelineError& e) {
            out.error = e.what();
            PipelineResult partial;
            partial.repetitions = e.outcomes();
            out.pipeline = std::move(partial);
        } catch (const std::runtime_error& e) {
            out.error = e.what();
        }
    });

    std::vector<std::pair<std::string, Heatmap>> preds;
    std::vector<std::pair<std::string, BinaryMask>> gts;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
        const ImageOutcome& out = result.images[i];
        if (!out.ok) {
            ++result.failures;
            continue;
        }
        preds.emplace_back(out.id, to_soft(out.mask));
        gts.emplace_back(out.id, dataset.pairs[i].gt);
    }
    result.report = evaluate_pairs(preds, gts);
    result.budget_exceeded = !dataset.pairs.empty() &&
                             static_cast<double>(result.failures) >
                                 config.failure_budget * static_cast<double>(dataset.pairs.size());

    if (config.output_dir.empty())
        return result;

    const fs::path out_dir = config.output_dir;
    fs::create_directories(out_dir);
    std::string diagnostics;
    for (std::size_t i = 0; i < dataset.pairs.size(); ++i) {
        const ImageOutcome& out = result.images[i];
        diagnostics += diagnostics_record(out).dump() + "\n";
        if (!out.ok)
            continue;
        write_mask(out_dir / "masks" / (out.id + ".png"), out.mask);
        if (config.diagnostic_mode) {
            std::vector<OverlayStage> stages;
            const auto& rep = out.pipeline->repetitions[out.pipeline->selected_repetition];
            if (rep.stages->coarse)
                stages.push_back({rep.stages->coarse->box_used, rep.stages->coarse->prompt});
            if (rep.stages->fine)
                stages.push_back({rep.stages->fine->box_used, rep.stages->fine->prompt});
            write_overlay(out_dir / "overlays" / (out.id + ".png"), dataset.pairs[i].image, out.mask, stages);
        }
    }
    write_text(out_dir / "diagnostics.jsonl", diagnostics);
    write_text(out_dir / "report.csv", render_csv(result.report));
    write_text(out_dir / "report.md", render_markdown(result.report, dataset.name));
    return result;
}

std::vector<AblationVariant> module_ablation_variants()
{
    std::vector<AblationVariant> v(6);
    v[0].name = "wo-msdcot-rdvp";
    v[0].flags.wo_msdcot = v[0].flags.wo_rdvp = true;
    v[1].name = "wo-msdcot";
    v[1].flags.wo_msdcot = true;
    v[2].name = "wo-rdvp";
    v[2].flags.wo_rdvp = true;
    v[3].name = "wo-tmg1";
    v[3].flags.wo_tmg1 = true;
    v[4].name = "wo-tmg2";
    v[4].flags.wo_tmg2 = true;
    v[5].name = "full";
    return v;
}

std::vector<AblationVariant> rdvp_ablation_variants()
{
    std::vector<AblationVariant> v(4);
    v[0].name = "ds0-rc0";
    v[0].flags.consensus_baseline = v[0].flags.global_region = true;
    v[1].name = "ds1-rc0";
    v[1].flags.global_region = true;
    v[2].name = "ds0-rc1";
    v[2].flags.consensus_baseline = true;
    v[3].name = "ds1-rc1";
    return v;
}

std::vector<AblationVariant> repetition_sweep(std::size_t first, std::size_t last)
{
    std::vector<AblationVariant> v;
    for (std::size_t i = first; i <= last; ++i)
        v.push_back({"repeat-" + std::to_string(i), {}, i});
    return v;
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const Dataset& dataset, const Backends& backends,
                                      const std::vector<AblationVariant>& variants)
{
    std::vector<AblationRow> rows;
    for (const auto& variant : variants) {
        RunConfig cfg = base;
        cfg.ablation = variant.flags;
        cfg.repetitions = variant.repetitions;
        if (!base.output_dir.empty())
            cfg.output_dir = base.output_dir / variant.name;
        const BenchmarkResult r = run_benchmark(cfg, dataset, backends);
        rows.push_back({variant.name, r.report.mean, r.report.rows.size(), r.failures});
    }
    return rows;
}

std::string render_ablation_csv(const std::vector<AblationRow>& rows)
{
    std::ostringstream out;
    out << "variant,s_alpha,f_beta,mae,e_m,images,failures\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g", r.mean.s_alpha, r.mean.f_beta, r.mean.mae,
                      r.mean.e_m);
        out << r.variant << ',' << buf << ',' << r.images << ',' << r.failures << '\n';
    }
    return out.str();
}

std::string render_ablation_markdown(const std::vector<AblationRow>& rows)
{
    std::size_t width = 7;
    for (const auto& r : rows)
        width = std::max(width, r.variant.size());
    std::ostringstream out;
    auto pad = [&](const std::string& s) { return s + std::string(width - std::min(width, s.size()), ' '); };
    out << "| " << pad("variant") << " | S_alpha | F_beta  | MAE     | E_m     |\n";
    out << "|" << std::string(width + 2, '-') << "|---------|---------|---------|---------|\n";
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " | %-7s | %-7s | %-7s | %-7s |", format_score(r.mean.s_alpha).c_str(),
                      format_score(r.mean.f_beta).c_str(), format_score(r.mean.mae).c_str(),
                      format_score(r.mean.e_m).c_str());
        out << "| " << pad(r.variant) << buf << "\n";
    }
    return out.str();
}

json scene_to_json(const SyntheticScene& scene)
{
    json rle = json::array();
    const auto labels = scene.labels.values();
    for (std::size_t i = 0; i < labels.size();) {
        std::size_t j = i;
        while (j < labels.size() && labels[j] == labels[i])
            ++j;
        rle.push_back({labels[i], j - i});
        i = j;
    }
    return {{"id", scene.id},
            {"width", scene.width},
            {"height", scene.height},
            {"planted_count", scene.planted_count},
            {"object_word", scene.object_word},
            {"object_phrase", scene.object_phrase},
            {"environment_word", scene.environment_word},
            {"environment_phrase", scene.environment_phrase},
            {"noise", scene.noise},
            {"seed", scene.seed},
            {"decoy_strength", scene.decoy_strength},
            {"leakage", scene.leakage},
            {"surround_margin", scene.surround_margin},
            {"labels_rle", rle}};
}

SyntheticScene scene_from_json(const json& j)
{
    SyntheticScene s;
    s.id = j.at("id").get<std::string>();
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.planted_count = j.at("planted_count").get<int>();
    s.object_word = j.at("object_word").get<std::string>();
    s.object_phrase = j.at("object_phrase").get<std::string>();
    s.environment_word = j.at("environment_word").get<std::string>();
    s.environment_phrase = j.at("environment_phrase").get<std::string>();
    s.noise = j.at("noise").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.decoy_strength = j.value("decoy_strength", s.decoy_strength);
    s.leakage = j.value("leakage", s.leakage);
    s.surround_margin = j.value("surround_margin", s.surround_margin);
    s.labels = Grid<std::uint8_t>(s.width, s.height, 0);
    std::size_t at = 0;
    for (const auto& run : j.at("labels_rle")) {
        const auto label = run.at(0).get<std::uint8_t>();
        const auto len = run.at(1).get<std::size_t>();
        if (at + len > s.labels.size())
            throw std::runtime_error("scene '" + s.id + "': label runs overflow the frame");
        std::fill_n(s.labels.values().begin() + static_cast<std::ptrdiff_t>(at), len, label);
        at += len;
    }
    if (at != s.labels.size())
        throw std::runtime_error("scene '" + s.id + "': label runs do not cover the frame");
    s.validate();
    return s;
}

void write_scene_manifest(const fs::path& path, const std::vector<SyntheticScene>& scenes)
{
    json arr = json::array();
    for (const auto& s : scenes)
        arr.push_back(scene_to_json(s));
    write_text(path, json{{"scenes", arr}}.dump(1) + "\n");
}

std::vector<SyntheticScene> read_scene_manifest(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read scene manifest " + path.string());
    const json j = json::parse(in);
    std::vector<SyntheticScene> scenes;
    for (const auto& s : j.at("scenes"))
        scenes.push_back(scene_from_json(s));
    return scenes;
}

std::shared_ptr<SceneRegistry> make_registry(const std::vector<SyntheticScene>& scenes)
{
    auto registry = std::make_shared<SceneRegistry>();
    for (const auto& s : scenes)
        registry->add(s);
    return registry;
}

Dataset synthetic_dataset(const std::vector<SyntheticScene>& scenes, std::string name)
{
    Dataset ds;
    ds.name = std::move(name);
    for (const auto& s : scenes)
        ds.pairs.push_back({render_scene(s), s.region()});
    std::sort(ds.pairs.begin(), ds.pairs.end(),
              [](const DatasetPair& a, const DatasetPair& b) { return a.image.id() < b.image.id(); });
    return ds;
}

SyntheticSuite make_synthetic_suite(std::size_t count, const std::vector<double>& noise_levels, std::uint64_t seed,
                                    const fs::path& directory, const SceneOptions& options)
{
    if (count < 1)
        throw ContractViolation("synthetic suite needs at least one scene");
    if (noise_levels.empty())
        throw ContractViolation("synthetic suite needs at least one noise level");

    SyntheticSuite suite;
    for (std::size_t i = 0; i < count; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "scene_%03zu", i);
        suite.scenes.push_back(generate_scene(id, splitmix64(seed + i), noise_levels[i % noise_levels.size()], options));
    }
    suite.spec.name = "synthetic";
    suite.spec.expected_count = count;
    if (directory.empty())
        return suite;

    suite.spec.images = directory / "images";
    suite.spec.ground_truth = directory / "gt";
    fs::create_directories(suite.spec.images);
    fs::create_directories(suite.spec.ground_truth);
    for (const auto& s : suite.scenes) {
        write_image(suite.spec.images / (s.id + ".png"), render_scene(s));
        write_mask(suite.spec.ground_truth / (s.id + ".png"), s.region());
    }
    write_scene_manifest(directory / "scenes.json", suite.scenes);
    return suite;
}

} // namespace camoseg
