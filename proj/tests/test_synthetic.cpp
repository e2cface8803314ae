#include <doctest.h>

#include <set>

#include "support.hpp"
#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"
#include "tipscan/synthetic.hpp"

using namespace tipscan;
using tipscan::test::TempDir;

namespace {

// Mean absolute difference between the centre and a border band.
double centre_contrast(const RgbPatch& p) {
    auto mean_abs_grad = [&](int r0, int r1, int c0, int c1) {
        double s = 0.0;
        int n = 0;
        for (int r = r0; r < r1; ++r) {
            for (int c = c0; c + 1 < c1; ++c) {
                for (int ch = 0; ch < 3; ++ch) s += std::abs(p.channel(r, c + 1, ch) - p.channel(r, c, ch));
                ++n;
            }
        }
        return s / n;
    };
    const int s = p.width();
    return mean_abs_grad(s / 4, 3 * s / 4, s / 4, 3 * s / 4);
}

}  // namespace

TEST_SUITE("synthetic") {

TEST_CASE("generator writes a balanced manifest of PNGs") {
    TempDir dir("synth");
    const auto m = generate_synthetic(5, 7, {}, dir.path());
    CHECK(m.size() == 10);
    CHECK(validate_balance(m).balanced);
    std::set<std::string> ids;
    for (const auto& r : m.records) {
        CHECK(ids.insert(r.id).second);
        CHECK(r.provenance_id == r.id);
        CHECK(r.augmentation_tag == "original");
        const auto p = load_patch(m, r);
        CHECK(p.width() == 200);
        CHECK(p.height() == 200);
        const GeoBox box;
        CHECK(r.lat > box.min_lat);
        CHECK(r.lat < box.max_lat);
        CHECK(r.lon > box.min_lon);
        CHECK(r.lon < box.max_lon);
    }
}

TEST_CASE("minimal dataset has both labels") {
    TempDir dir("synth");
    const auto m = generate_synthetic(1, 0, {}, dir.path());
    REQUIRE(m.size() == 2);
    CHECK(m.records[0].label != m.records[1].label);
    CHECK_THROWS_AS(generate_synthetic(0, 0, {}, dir.path()), Error);
}

TEST_CASE("same seed gives byte-identical files, different seeds differ") {
    TempDir a("synth");
    TempDir b("synth");
    const auto ma = generate_synthetic(3, 11, {}, a.path());
    const auto mb = generate_synthetic(3, 11, {}, b.path());
    for (std::size_t i = 0; i < ma.size(); ++i) {
        CHECK(read_file_bytes(a / ma.records[i].file_path) == read_file_bytes(b / mb.records[i].file_path));
    }
    CHECK(render_synthetic_patch(PatchLabel::garbage, 1) != render_synthetic_patch(PatchLabel::garbage, 2));
}

TEST_CASE("independent sets do not share ids") {
    TempDir a("synth");
    TempDir b("synth");
    const auto ma = generate_synthetic(2, 1, {}, a.path());
    const auto mb = generate_synthetic(2, 2, {}, b.path());
    for (const auto& r : ma.records) {
        for (const auto& s : mb.records) CHECK(r.provenance_id != s.provenance_id);
    }
}

TEST_CASE("garbage patches carry more central clutter than terrain") {
    int higher = 0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        if (centre_contrast(render_synthetic_patch(PatchLabel::garbage, s)) >
            centre_contrast(render_synthetic_patch(PatchLabel::not_garbage, s))) {
            ++higher;
        }
    }
    CHECK(higher == 20);
}

TEST_CASE("invalid clutter range is rejected") {
    SyntheticParams p;
    p.clutter_min = 5;
    p.clutter_max = 2;
    CHECK_THROWS_AS(render_synthetic_patch(PatchLabel::garbage, 0, p), Error);
}

}
