#include "doctest.h"

#include "txseg/metrics.hpp"
#include "txseg/rng.hpp"

#include <cmath>

using namespace txseg;

namespace {

LabelMap halves(int n, bool vertical) {
    LabelMap lm(n, n);
    for (int r = 0; r < n; ++r)
        for (int x = 0; x < n; ++x) lm.at(r, x) = vertical ? (x >= n / 2) : (r >= n / 2);
    lm.region_count = 2;
    return lm;
}

LabelMap random_map(int h, int w, int colours, std::uint64_t seed) {
    CounterRng rng(seed);
    std::vector<int> ids(static_cast<std::size_t>(h) * w);
    for (int& id : ids) id = static_cast<int>(rng.uniform_index(colours));
    return relabel(h, w, ids);
}

LabelMap permuted(const LabelMap& lm) {
    LabelMap out = lm;
    for (int& id : out.labels) id = lm.region_count - 1 - id;
    return out;
}

}  // namespace

TEST_CASE("identical maps") {
    const LabelMap lm = random_map(8, 8, 4, 1);
    const MetricsReport m = evaluate(lm, lm);
    CHECK(m.cs == 100.0);
    CHECK(m.os == 0.0);
    CHECK(m.us == 0.0);
    CHECK(m.me == 0.0);
    CHECK(m.ne == 0.0);
    CHECK(m.gce == 0.0);
    CHECK(m.lce == 0.0);
    CHECK(m.dd == 0.0);
    CHECK(m.dm == 0.0);
    CHECK(m.dvi == 0.0);
}

TEST_CASE("one region against two halves") {
    const LabelMap whole(8, 8);
    const LabelMap gt = halves(8, true);
    const RegionScores r = region_metrics(whole, gt);
    CHECK(r.cs == 0.0);
    CHECK(r.us == 100.0);
    const Distances d = distance_metrics(whole, gt);
    CHECK(d.dm == 0.5);
    CHECK(d.dvi == 1.0);
    CHECK(d.dd == 0.25);
    const Distances swapped = distance_metrics(gt, whole);
    CHECK(swapped.dm == d.dm);
    CHECK(swapped.dvi == d.dvi);
    CHECK(swapped.dd == d.dd);
}

TEST_CASE("split ground-truth region counts as over-segmentation") {
    // gt: left half one region, right half one region; pred splits the left half
    const LabelMap gt = halves(8, true);
    LabelMap pred(8, 8);
    for (int r = 0; r < 8; ++r)
        for (int x = 0; x < 8; ++x) pred.at(r, x) = x >= 4 ? 2 : (r >= 4 ? 1 : 0);
    pred.region_count = 3;
    const RegionScores s = region_metrics(pred, gt, 0.75);
    CHECK(s.cs == 50.0);
    CHECK(s.os == 50.0);
    CHECK(s.us == 0.0);
    CHECK(s.me == 0.0);
    CHECK(s.ne == 0.0);
}

TEST_CASE("missed and noise regions") {
    // gt halves; pred diagonal-ish blocks overlapping both halves evenly
    const LabelMap gt = halves(8, true);
    const LabelMap pred = halves(8, false);
    const RegionScores s = region_metrics(pred, gt);
    CHECK(s.cs == 0.0);
    CHECK(s.me == 100.0);
    CHECK(s.ne == 100.0);
}

TEST_CASE("consistency errors") {
    const LabelMap gt = random_map(6, 6, 3, 2);
    std::vector<int> singles(36);
    for (int i = 0; i < 36; ++i) singles[i] = i;
    const LabelMap fine = relabel(6, 6, singles);
    CHECK(consistency_metrics(fine, gt).first == 0.0);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto [gce, lce] = consistency_metrics(random_map(6, 6, 3, seed), random_map(6, 6, 4, seed + 1000));
        CHECK(gce >= lce);
        CHECK(lce >= 0.0);
        CHECK(gce <= 1.0);
    }
}

TEST_CASE("relabelling invariance and ranges") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const LabelMap a = random_map(7, 9, 3, seed), b = random_map(7, 9, 5, seed + 50);
        const MetricsReport m = evaluate(a, b), p = evaluate(permuted(a), b);
        CHECK(m.cs == p.cs);
        CHECK(m.ne == p.ne);
        CHECK(m.gce == doctest::Approx(p.gce));
        CHECK(m.dvi == doctest::Approx(p.dvi));
        CHECK(m.dd >= 0.0);
        CHECK(m.dd <= 1.0);
        CHECK(m.dm >= 0.0);
        CHECK(m.dm <= 1.0);
        CHECK(m.dvi <= std::log2(63.0));
    }
}

TEST_CASE("report formats and errors") {
    MetricsReport m;
    m.cs = 100.0;
    CHECK(report_csv_header() == "image,cs,os,us,me,ne,gce,lce,dd,dm,dvi");
    CHECK(report_csv_row("x.png", m) == "x.png,100,0,0,0,0,0,0,0,0,0");
    const std::string json = report_json(m);
    for (const char* key : {"\"cs\"", "\"os\"", "\"us\"", "\"me\"", "\"ne\"", "\"gce\"", "\"lce\"", "\"dd\"", "\"dm\"", "\"dvi\""})
        CHECK(json.find(key) != std::string::npos);
    CHECK_THROWS(evaluate(LabelMap(4, 4), LabelMap(4, 5)));
    CHECK_THROWS(region_metrics(LabelMap(4, 4), LabelMap(4, 4), 0.4));
}
