#include <doctest.h>

#include <fstream>
#include <sstream>

#include "camoseg/harness.hpp"
#include "camoseg/image_io.hpp"
#include "support.hpp"

using namespace camoseg;
namespace fs = std::filesystem;

namespace
{

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double mean_iou(const BenchmarkResult& r, const Dataset& ds)
{
    double total = 0;
    for (std::size_t i = 0; i < ds.pairs.size(); ++i)
        total += r.images[i].ok ? mask_iou(r.images[i].mask, ds.pairs[i].gt) : 0.0;
    return total / static_cast<double>(ds.pairs.size());
}

RunConfig quiet_config()
{
    RunConfig c;
    c.workers = 2;
    return c;
}

} // namespace

TEST_CASE("load_dataset pairs by stem and reports strays")
{
    testing::TempDir dir("dataset");
    fs::create_directories(dir / "img");
    fs::create_directories(dir / "gt");
    const ImageRef image = ImageRef::blank("x", 6, 4);
    BinaryMask gt(6, 4);
    gt(2, 1) = 1;
    for (const char* id : {"c", "a", "b"}) {
        write_image(dir / "img" / (std::string(id) + ".jpg"), image);
        write_mask(dir / "gt" / (std::string(id) + ".png"), gt);
    }
    Dataset ds = load_dataset({dir / "img", dir / "gt", "demo", 3});
    REQUIRE(ds.pairs.size() == 3);
    CHECK(ds.issues.empty());
    CHECK(ds.pairs[0].image.id() == "a");
    CHECK(ds.pairs[2].image.id() == "c");
    CHECK(ds.pairs[1].gt == gt);

    fs::remove(dir / "gt" / "b.png");
    write_mask(dir / "gt" / "orphan.png", gt);
    write_mask(dir / "gt" / "c.png", BinaryMask(3, 3));
    ds = load_dataset({dir / "img", dir / "gt", "demo", 3});
    REQUIRE(ds.pairs.size() == 1);
    CHECK(ds.pairs[0].image.id() == "a");
    CHECK(ds.issues.size() == 4); // b missing GT, c size, orphan image, count

    CHECK_THROWS(load_dataset({dir / "nope", dir / "gt", "demo", {}}));
}

TEST_CASE("ground truth {0, 255} is binarized losslessly")
{
    testing::TempDir dir("gt");
    std::mt19937_64 rng(1);
    const BinaryMask m = testing::random_mask(rng, 17, 9, 0.4);
    write_mask(dir / "m.png", m);
    CHECK(load_mask(dir / "m.png", 128) == m);
}

TEST_CASE("config JSON overrides and flag spellings")
{
    RunConfig c;
    apply_config_json(c, nlohmann::json::parse(R"({
        "repeats": 5, "threshold": 0.8, "cap": "inf", "spacing": 2, "region": "global",
        "prompts": "hidden animal, concealed thing", "templates": {"box": "box of the {prompt}"},
        "ablation": {"wo-tmg2": true}, "backends": {"vlm": {"endpoint": "http://h:1/v", "retries": 4}},
        "failure_budget": 0.2
    })"));
    CHECK(c.repetitions == 5);
    CHECK(c.rdvp.threshold == 0.8);
    CHECK(c.rdvp.cap == RdvpConfig::kUncapped);
    CHECK(c.rdvp.spacing == 2);
    CHECK(c.rdvp.region == RdvpConfig::Region::Global);
    CHECK(c.prompts.synonyms == std::vector<std::string>{"hidden animal", "concealed thing"});
    CHECK(c.templates.box == "box of the {prompt}");
    CHECK(c.ablation.wo_tmg2);
    CHECK(c.ablation.describe() == "wo-tmg2");
    CHECK(c.vlm.kind == BackendConfig::Kind::Remote);
    CHECK(c.vlm.retries == 4);
    CHECK(c.failure_budget == 0.2);
    CHECK(c.pipeline_config().stages.skip_fine);

    testing::TempDir dir("cfg");
    {
        std::ofstream out(dir / "run.json");
        out << "{\n  // comments are fine\n  \"wo_rdvp\": true, \"repeats\": 2\n}\n";
    }
    const RunConfig loaded = load_run_config(dir / "run.json");
    CHECK(loaded.repetitions == 2);
    const PipelineConfig p = loaded.pipeline_config();
    CHECK(p.stages.rdvp.mode == RdvpConfig::Mode::ConsensusBaseline);
    CHECK(p.stages.rdvp.region == RdvpConfig::Region::Global);

    RunConfig bad;
    bad.failure_budget = 1.5;
    CHECK_THROWS_AS(bad.validate(), ContractViolation);
}

TEST_CASE("scene manifests round-trip")
{
    const SyntheticSuite suite = make_synthetic_suite(4, {0.0, 0.3}, 5, {});
    testing::TempDir dir("manifest");
    write_scene_manifest(dir / "scenes.json", suite.scenes);
    const auto back = read_scene_manifest(dir / "scenes.json");
    REQUIRE(back.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(back[i].labels == suite.scenes[i].labels);
        CHECK(back[i].noise == suite.scenes[i].noise);
        CHECK(back[i].seed == suite.scenes[i].seed);
        CHECK(back[i].object_phrase == suite.scenes[i].object_phrase);
        CHECK(back[i].surround_margin == suite.scenes[i].surround_margin);
    }
    CHECK(suite.scenes[1].noise == 0.3);
}

TEST_CASE("synthetic suites are byte-identical for the same seed")
{
    testing::TempDir a("suite_a"), b("suite_b");
    make_synthetic_suite(5, {0.0}, 7, a.path());
    make_synthetic_suite(5, {0.0}, 7, b.path());
    for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
        if (!entry.is_regular_file())
            continue;
        const fs::path rel = fs::relative(entry.path(), a.path());
        CHECK_MESSAGE(slurp(entry.path()) == slurp(b.path() / rel), rel.string());
    }
    CHECK(fs::exists(a / "scenes.json"));
    CHECK(fs::exists(a / "images" / "scene_004.png"));
}

TEST_CASE("clean suite is recovered image by image; noise lowers IoU")
{
    const SyntheticSuite clean = make_synthetic_suite(12, {0.0}, 3, {});
    const Dataset ds = synthetic_dataset(clean.scenes);
    const BenchmarkResult r = run_benchmark(quiet_config(), ds, make_synthetic_backends(make_registry(clean.scenes)));
    CHECK(r.failures == 0);
    for (std::size_t i = 0; i < ds.pairs.size(); ++i)
        CHECK(mask_iou(r.images[i].mask, ds.pairs[i].gt) >= 0.95);
    CHECK(r.report.mean.mae <= 0.01);

    const SyntheticSuite noisy = make_synthetic_suite(12, {0.4}, 3, {});
    const Dataset nds = synthetic_dataset(noisy.scenes);
    const BenchmarkResult nr =
        run_benchmark(quiet_config(), nds, make_synthetic_backends(make_registry(noisy.scenes)));
    CHECK(mean_iou(nr, nds) < mean_iou(r, ds));
}

TEST_CASE("benchmark writes its artifacts and counts failures against the budget")
{
    const SyntheticSuite suite = make_synthetic_suite(10, {0.0}, 9, {});
    const Dataset ds = synthetic_dataset(suite.scenes);
    // Only 9 scenes are known to the backends: one image fails.
    const std::vector<SyntheticScene> known(suite.scenes.begin() + 1, suite.scenes.end());
    const Backends backends = make_synthetic_backends(make_registry(known));

    testing::TempDir dir("bench");
    RunConfig cfg = quiet_config();
    cfg.output_dir = dir.path();
    cfg.diagnostic_mode = true;
    BenchmarkResult r = run_benchmark(cfg, ds, backends);
    CHECK(r.failures == 1);
    CHECK_FALSE(r.budget_exceeded);
    CHECK(r.report.rows.size() == 9);
    CHECK(fs::exists(dir / "report.csv"));
    CHECK(fs::exists(dir / "report.md"));
    CHECK(fs::exists(dir / "masks" / "scene_001.png"));
    CHECK_FALSE(fs::exists(dir / "masks" / "scene_000.png"));
    CHECK(fs::exists(dir / "overlays" / "scene_001.png"));
    CHECK(parse_csv(slurp(dir / "report.csv")).rows.size() == 9);

    std::istringstream lines(slurp(dir / "diagnostics.jsonl"));
    std::string line;
    std::size_t n = 0, failed = 0;
    while (std::getline(lines, line)) {
        const auto rec = nlohmann::json::parse(line);
        ++n;
        failed += rec["status"] == "failed";
        if (rec["status"] == "ok")
            CHECK(rec["repetitions"].size() == 3);
    }
    CHECK(n == 10);
    CHECK(failed == 1);

    cfg.failure_budget = 0.05;
    cfg.output_dir.clear();
    CHECK(run_benchmark(cfg, ds, backends).budget_exceeded);
}

TEST_CASE("ablation matrices emit one row per variant")
{
    const SyntheticSuite suite = make_synthetic_suite(4, {0.3}, 2, {});
    const Dataset ds = synthetic_dataset(suite.scenes);
    const Backends backends = make_synthetic_backends(make_registry(suite.scenes));

    const auto modules = module_ablation_variants();
    REQUIRE(modules.size() == 6);
    CHECK(modules.back().name == "full");
    const auto rows = run_ablation(quiet_config(), ds, backends, modules);
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
        CHECK(rows[i].variant == modules[i].name);
        CHECK(rows[i].images == 4);
    }

    const auto sweep = run_ablation(quiet_config(), ds, backends, repetition_sweep());
    REQUIRE(sweep.size() == 6);
    CHECK(sweep[0].variant == "repeat-1");
    CHECK(sweep[5].variant == "repeat-6");

    CHECK(rdvp_ablation_variants().size() == 4);

    const std::string csv = render_ablation_csv(rows);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
    CHECK(render_ablation_markdown(rows).find("wo-tmg1") != std::string::npos);
}
