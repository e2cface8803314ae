#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "tipscan/cli.hpp"
#include "tipscan/image_io.hpp"
#include "tipscan/manifest.hpp"
#include "tipscan/model_io.hpp"

using namespace tipscan;
using nlohmann::json;
using tipscan::test::TempDir;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "tipscan");
    std::ostringstream out, err;
    const int code = dispatch(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::filesystem::path& p) {
    const auto bytes = read_file_bytes(p);
    return {bytes.begin(), bytes.end()};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("help and version exit cleanly") {
    const auto h = run({"--help"});
    CHECK(h.code == 0);
    CHECK(h.out.find("Usage") != std::string::npos);
    CHECK(run({"eval", "--help"}).code == 0);
    const auto v = run({"--version"});
    CHECK(v.code == 0);
    CHECK(v.out.find("0.1.0") != std::string::npos);
}

TEST_CASE("usage errors exit 2 with suggestions") {
    auto r = run({"evl", "crossval"});
    CHECK(r.code == 2);
    CHECK(r.err.find("did you mean 'eval'") != std::string::npos);
    r = run({"map", "estimate", "--area-km2", "5", "--fromat", "json"});
    CHECK(r.code == 2);
    CHECK(r.err.find("did you mean '--format'") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"eval"}).code == 2);
    CHECK(run({"map", "estimate", "--area-km2", "5", "--format", "xml"}).code == 2);
    TempDir dir("cli");
    CHECK(run({"augment", "--manifest", (dir / "m.csv").string(), "--out", (dir / "o").string()}).code == 2);
}

TEST_CASE("domain errors exit 1") {
    TempDir dir("cli");
    const auto r = run({"dataset", "validate", "--manifest", (dir / "absent.csv").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("not found") != std::string::npos);
}

TEST_CASE("json output carries the tool version") {
    const auto r = run({"--format", "json", "map", "estimate", "--area-km2", "9250", "--patch-m", "100"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j.at("tool_version") == "0.1.0");
    CHECK(j.at("report").at("patches") == 925000);
    const auto csv = run({"--format", "csv", "map", "estimate", "--area-km2", "9250", "--patch-m", "20"});
    CHECK(csv.out.find("patches,23125000") != std::string::npos);
}

TEST_CASE("config file, environment fallback and flag precedence") {
    TempDir dir("cli");
    std::ofstream(dir / "a.cfg") << "map.patch_m = 100\n";
    std::ofstream(dir / "b.cfg") << "map.patch_m = 50\n";
    std::ofstream(dir / "bad.cfg") << "map.patchm = 50\n";
    auto patches = [](const Run& r) { return json::parse(r.out).at("report").at("patches").get<long>(); };
    const std::vector<std::string> base = {"--format", "json", "map", "estimate", "--area-km2", "1"};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return run(args);
    };
    CHECK(patches(with({"--config", (dir / "a.cfg").string()})) == 100);
    ::setenv("TIPSCAN_CONFIG", (dir / "b.cfg").c_str(), 1);
    CHECK(patches(with({})) == 400);
    CHECK(patches(with({"--config", (dir / "a.cfg").string()})) == 100);
    CHECK(patches(with({"--patch-m", "1000"})) == 1);
    ::unsetenv("TIPSCAN_CONFIG");
    const auto bad = with({"--config", (dir / "bad.cfg").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("map.patch_m") != std::string::npos);
}

TEST_CASE("synth then augment, with logs and idempotent outputs") {
    TempDir dir("cli");
    const auto data = (dir / "data").string();
    auto r = run({"dataset", "synth", "--per-class", "50", "--seed", "7", "--out", data});
    REQUIRE(r.code == 0);
    CHECK(load_manifest(dir / "data/manifest.csv").size() == 100);
    const auto log = slurp(dir / "data/run.log");
    CHECK(log.find("seed: 7") != std::string::npos);
    CHECK(log.find("config synthetic.clutter_min = 3") != std::string::npos);

    const auto first = slurp(dir / "data/manifest.csv");
    const auto png = read_file_bytes(dir / "data/patches/s7-g00003.png");
    REQUIRE(run({"dataset", "synth", "--per-class", "50", "--seed", "7", "--out", data}).code == 0);
    CHECK(slurp(dir / "data/manifest.csv") == first);
    CHECK(read_file_bytes(dir / "data/patches/s7-g00003.png") == png);

    r = run({"--jobs", "2", "augment", "--manifest", data + "/manifest.csv", "--pipeline", "3",
             "--out", (dir / "p3").string()});
    REQUIRE(r.code == 0);
    CHECK(load_manifest(dir / "p3/manifest.csv").size() == 2400);
    r = run({"augment", "--manifest", data + "/manifest.csv", "--technique", "flip", "--out",
             (dir / "flip").string()});
    REQUIRE(r.code == 0);
    CHECK(load_manifest(dir / "flip/manifest.csv").size() == 300);
    r = run({"augment", "--manifest", data + "/manifest.csv", "--technique", "flp", "--out",
             (dir / "x").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("did you mean 'flip'") != std::string::npos);
    r = run({"--format", "json", "dataset", "validate", "--manifest", data + "/manifest.csv"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("report").at("balanced") == true);
}

TEST_CASE("train, evaluate and merge reports") {
    TempDir dir("cli");
    const auto d = dir.path().string();
    REQUIRE(run({"dataset", "synth", "--per-class", "6", "--seed", "1", "--out", d + "/train"}).code == 0);
    REQUIRE(run({"dataset", "synth", "--per-class", "4", "--seed", "2", "--out", d + "/test"}).code == 0);
    const std::vector<std::string> fast = {"--arch", "mini_plain", "--input-side", "8", "--epochs", "2", "--batch", "4"};
    auto args = std::vector<std::string>{"train", "--manifest", d + "/train/manifest.csv", "--out", d + "/model.bin"};
    args.insert(args.end(), fast.begin(), fast.end());
    REQUIRE(run(args).code == 0);
    CHECK(std::filesystem::exists(d + "/model.bin.layers.txt"));

    auto r = run({"--format", "json", "eval", "test", "--model", d + "/model.bin", "--manifest",
                  d + "/test/manifest.csv", "--train-manifest", d + "/train/manifest.csv", "--out",
                  d + "/test.json"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(slurp(d + "/test.json")).at("report").at("matrix").at("tp").is_number());

    args = {"--format", "json", "eval", "crossval", "--manifest", d + "/train/manifest.csv", "--k", "3", "--out", d + "/cv.json"};
    args.insert(args.end(), fast.begin(), fast.end());
    REQUIRE(run(args).code == 0);
    args = {"--format", "json", "eval", "split", "--manifest", d + "/train/manifest.csv", "--fraction", "0.5", "--out", d + "/split.json"};
    args.insert(args.end(), fast.begin(), fast.end());
    REQUIRE(run(args).code == 0);
    CHECK(json::parse(slurp(d + "/split.json")).at("report").at("matrix").at("tn").is_number());

    r = run({"--format", "json", "report", "merge", "--crossval", d + "/cv.json", "--split",
             d + "/split.json", "--test", d + "/test.json"});
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("report").at("methods").size() == 3);

    r = run({"eval", "test", "--model", d + "/model.bin", "--manifest", d + "/train/manifest.csv",
             "--train-manifest", d + "/train/manifest.csv"});
    CHECK(r.code == 1);
    CHECK(r.err.find("leakage") != std::string::npos);
    CHECK(run({"--allow-overlap", "eval", "test", "--model", d + "/model.bin", "--manifest",
               d + "/train/manifest.csv", "--train-manifest", d + "/train/manifest.csv"}).code == 0);

    args = {"--format", "json", "compare", "--archs", "mini_plain,mini_resnet", "--manifest", d + "/train/manifest.csv", "--k", "3",
            "--input-side", "8", "--epochs", "1", "--batch", "4"};
    r = run(args);
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out).at("report").size() == 2);
}

TEST_CASE("report merge of printed values flags the inconsistent row") {
    TempDir dir("cli");
    auto write = [&](const std::string& name, double acc, double mcc) {
        std::ofstream(dir / name) << json{{"accuracy", acc}, {"mcc", mcc}}.dump();
        return (dir / name).string();
    };
    const auto r = run({"--format", "json", "report", "merge", "--crossval", write("a.json", 0.98, 0.96),
                        "--split", write("b.json", 0.967, 0.93), "--test", write("c.json", 0.79, 0.60),
                        "--printed-accuracy", "90.23", "--printed-mcc", "0.83", "--label", "pipeline 1"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out).at("report");
    CHECK(j.at("discrepancy") == true);
    CHECK(j.at("discrepancies").at(0).at("computed") == "91.23");
}

TEST_CASE("map scan resumes and removes its journal when done") {
    TempDir dir("cli");
    const auto spec = build_architecture("mini_plain", 16);
    save_model(dir / "model.bin", spec, tipscan::test::constant_model(spec, PatchLabel::garbage));
    const std::string bbox = "34.99983,32.99979,35.00017,33.00021";
    test::write_fixture_tiles(dir / "tiles", 34.99983, 32.99979, 35.00017, 33.00021, 21, 400);
    const std::vector<std::string> base = {"map", "scan", "--model", (dir / "model.bin").string(), "--bbox", bbox,
                                           "--tiles-dir", (dir / "tiles").string(), "--out", (dir / "map.geojson").string()};
    auto args = base;
    args.insert(args.end(), {"--stop-after", "1"});
    REQUIRE(run(args).code == 0);
    CHECK(std::filesystem::exists(dir / "map.geojson.journal"));
    CHECK_FALSE(std::filesystem::exists(dir / "map.geojson"));
    args = base;
    args.insert(args.begin(), {"--jobs", "2"});
    const auto r = run(args);
    REQUIRE(r.code == 0);
    CHECK(r.err.find("resumed 1 cells") != std::string::npos);
    CHECK_FALSE(std::filesystem::exists(dir / "map.geojson.journal"));
    const auto doc = json::parse(slurp(dir / "map.geojson"));
    CHECK(doc.at("summary").at("cells_error") == 0);
    CHECK(doc.at("summary").at("cells_garbage") == doc.at("summary").at("cells_total"));
}

}
