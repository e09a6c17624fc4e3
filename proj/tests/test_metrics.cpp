#include <doctest.h>

#include <algorithm>
#include <random>

#include "camoseg/metrics.hpp"
#include "reference_metrics.hpp"
#include "support.hpp"

using namespace camoseg;
using testing::mask_from;

namespace
{

reference::Map as_map(const Heatmap& h)
{
    return {h.height(), h.width(), std::vector<double>(h.values().begin(), h.values().end())};
}

reference::Map as_map(const BinaryMask& m)
{
    return as_map(to_soft(m));
}

} // namespace

TEST_CASE("mae")
{
    const BinaryMask gt = mask_from({"#.", ".#"});
    CHECK(mae(gt, gt) == 0.0);
    CHECK(mae(mask_from({".#", "#."}), gt) == 1.0);
    CHECK(mae(mask_from({"##", "##"}), gt) == 0.5);
    CHECK_THROWS_AS(mae(BinaryMask(2, 3), gt), ContractViolation);
}

TEST_CASE("mae of a mask and its complement sum to one")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const BinaryMask gt = testing::random_mask(rng, 6, 5, 0.4);
        const BinaryMask pred = testing::random_mask(rng, 6, 5, 0.5);
        BinaryMask inv = pred;
        for (auto& v : inv.values())
            v = v ? 0 : 1;
        CHECK(mae(pred, gt) + mae(inv, gt) == doctest::Approx(1.0));
    }
}

TEST_CASE("s_measure conventions")
{
    const BinaryMask gt = mask_from({"..##", "..##", "....", "...."});
    CHECK(s_measure(to_soft(gt), gt) == doctest::Approx(1.0));
    CHECK(s_measure(Heatmap(4, 4, 0.0), BinaryMask(4, 4)) == 1.0);
    CHECK(s_measure(Heatmap(4, 4, 0.25), BinaryMask(4, 4)) == 0.75);
    CHECK(s_measure(Heatmap(4, 4, 0.25), BinaryMask(4, 4, 1)) == 0.25);
}

TEST_CASE("s_measure matches the reference on random soft maps")
{
    std::mt19937_64 rng(17);
    for (int i = 0; i < 40; ++i) {
        const BinaryMask gt = testing::random_mask(rng, 16 + i % 5, 12 + i % 7, 0.1 + 0.02 * i);
        const Heatmap pred = testing::random_heatmap(rng, gt.width(), gt.height());
        CHECK(s_measure(pred, gt) == doctest::Approx(reference::structure_measure(as_map(pred), as_map(gt))).epsilon(1e-12));
    }
}

TEST_CASE("s_measure and e_measure reach one only on an exact match")
{
    std::mt19937_64 rng(23);
    for (int i = 0; i < 30; ++i) {
        const BinaryMask gt = testing::random_mask(rng, 8, 8, 0.4);
        if (count_foreground(gt) == 0 || count_foreground(gt) == gt.size())
            continue;
        CHECK(s_measure(to_soft(gt), gt) == doctest::Approx(1.0));
        CHECK(e_measure(gt, gt) == doctest::Approx(1.0));
        BinaryMask off = gt;
        off.values()[static_cast<std::size_t>(i) % off.size()] ^= 1;
        CHECK(s_measure(to_soft(off), gt) < 1.0 - 1e-9);
        CHECK(e_measure(off, gt) < 1.0 - 1e-9);
    }
}

TEST_CASE("adaptive_f_measure")
{
    const BinaryMask gt = mask_from({"##", ".."});
    CHECK(adaptive_f_measure(to_soft(gt), gt) == doctest::Approx(1.0));
    CHECK(adaptive_f_measure(Heatmap(2, 2, 1.0), gt) == doctest::Approx(0.65 / 1.15));
    CHECK(adaptive_f_measure(Heatmap(2, 2, 0.0), gt) == 0.0);
}

TEST_CASE("adaptive_f_measure ignores a uniform rescale below the clamp")
{
    std::mt19937_64 rng(29);
    for (int i = 0; i < 20; ++i) {
        const BinaryMask gt = testing::random_mask(rng, 7, 6, 0.3);
        Heatmap pred = testing::random_heatmap(rng, 7, 6);
        for (double& v : pred.values())
            v *= 0.2;
        Heatmap scaled = pred;
        for (double& v : scaled.values())
            v *= 2.0;
        CHECK(adaptive_f_measure(pred, gt) == doctest::Approx(adaptive_f_measure(scaled, gt)));
    }
}

TEST_CASE("e_measure conventions and reference")
{
    const BinaryMask gt = mask_from({"##..", "##..", "....", "...."});
    CHECK(e_measure(gt, gt) == doctest::Approx(1.0));
    CHECK(e_measure(BinaryMask(4, 4, 1), BinaryMask(4, 4, 1)) == 1.0);
    CHECK(e_measure(BinaryMask(4, 4), BinaryMask(4, 4)) == 1.0);
    CHECK(e_measure(BinaryMask(4, 4, 1), BinaryMask(4, 4)) == 0.0);

    std::mt19937_64 rng(31);
    for (int i = 0; i < 30; ++i) {
        const BinaryMask g = testing::random_mask(rng, 12, 9, 0.35);
        const BinaryMask p = testing::random_mask(rng, 12, 9, 0.45);
        CHECK(e_measure(p, g) == doctest::Approx(reference::enhanced_measure(as_map(p), as_map(g))).epsilon(1e-12));
    }
}

TEST_CASE("mean_e_measure of a binary map equals its single evaluation")
{
    const BinaryMask gt = mask_from({"##..", "##..", "....", "...#"});
    const BinaryMask pred = mask_from({"###.", "##..", "....", "...."});
    // Every threshold above 0 gives the binary map; threshold 0 gives all-ones.
    const double expected = (e_measure(BinaryMask(4, 4, 1), gt) + 255 * e_measure(pred, gt)) / 256.0;
    CHECK(mean_e_measure(to_soft(pred), gt) == doctest::Approx(expected));
}

TEST_CASE("metrics stay in [0, 1]")
{
    std::mt19937_64 rng(37);
    for (int i = 0; i < 50; ++i) {
        const BinaryMask gt = testing::random_mask(rng, 10, 10, 0.02 * i);
        const Heatmap pred = testing::random_heatmap(rng, 10, 10);
        const MetricRow r = evaluate_pair("x", pred, gt, {true});
        for (double v : {r.s_alpha, r.f_beta, r.mae, r.e_m}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("evaluate_pairs aligns by identifier and averages")
{
    const BinaryMask gt = mask_from({"#.", ".."});
    const BinaryMask inv = mask_from({".#", "##"});
    const MetricReport single = evaluate_pairs({{"a", to_soft(gt)}}, {{"a", gt}});
    CHECK(single.rows.size() == 1);
    CHECK(single.mean.s_alpha == doctest::Approx(1.0));
    CHECK(single.mean.f_beta == doctest::Approx(1.0));
    CHECK(single.mean.mae == 0.0);
    CHECK(single.mean.e_m == doctest::Approx(1.0));

    const MetricReport two = evaluate_pairs({{"b", to_soft(inv)}, {"a", to_soft(gt)}}, {{"a", gt}, {"b", gt}});
    REQUIRE(two.rows.size() == 2);
    CHECK(two.rows[0].id == "a");
    CHECK(two.rows[1].id == "b");
    CHECK(two.mean.mae == 0.5);

    CHECK_THROWS_AS(evaluate_pairs({{"a", to_soft(gt)}}, {{"c", gt}}), ContractViolation);
    CHECK_THROWS_AS(evaluate_pairs({{"a", to_soft(gt)}}, {{"a", gt}, {"a", gt}}), ContractViolation);
}

TEST_CASE("dataset means do not depend on image order")
{
    std::mt19937_64 rng(41);
    std::vector<std::pair<std::string, Heatmap>> preds;
    std::vector<std::pair<std::string, BinaryMask>> gts;
    for (int i = 0; i < 6; ++i) {
        const std::string id = "img" + std::to_string(i);
        preds.emplace_back(id, testing::random_heatmap(rng, 8, 8));
        gts.emplace_back(id, testing::random_mask(rng, 8, 8, 0.3));
    }
    const MetricReport a = evaluate_pairs(preds, gts);
    std::reverse(preds.begin(), preds.end());
    const MetricReport b = evaluate_pairs(preds, gts);
    CHECK(render_csv(a) == render_csv(b));
}

TEST_CASE("report rendering")
{
    CHECK(format_score(0.8254) == ".825");
    CHECK(format_score(0.0379) == ".038");
    CHECK(format_score(1.0) == "1.000");

    MetricReport report;
    report.rows = {{"a", 0.5, 0.25, 0.125, 1.0 / 3.0}, {"b", 1.0, 0.75, 0.0, 0.5}};
    report.mean = mean_row(report.rows);
    const std::string csv = render_csv(report);
    CHECK(csv.rfind("id,s_alpha,f_beta,mae,e_m\n", 0) == 0);
    const MetricReport back = parse_csv(csv);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.rows[0].e_m == 1.0 / 3.0);
    CHECK(back.mean.s_alpha == 0.75);

    const std::string md = render_markdown(report, "demo");
    CHECK(md.find(".500") != std::string::npos);
    CHECK(md.find(".333") != std::string::npos);
}
