#include <doctest.h>

#include <fstream>

#include "support.hpp"
#include "tipscan/error.hpp"
#include "tipscan/image_io.hpp"
#include "tipscan/model_io.hpp"

using namespace tipscan;
using tipscan::test::TempDir;

TEST_SUITE("model_io") {

TEST_CASE("serialize round-trips spec and params exactly") {
    for (auto name : {"mini_plain", "mini_resnet"}) {
        const auto spec = build_architecture(name, 24);
        const auto params = init_params(spec, 77);
        const auto bytes = serialize_model(spec, params);
        const auto back = deserialize_model(bytes);
        CHECK(back.spec.name == spec.name);
        CHECK(back.spec.input == spec.input);
        CHECK(back.params == params);
        CHECK(serialize_model(back.spec, back.params) == bytes);
    }
}

TEST_CASE("layout starts with the magic and version") {
    const auto spec = build_architecture("mini_plain", 16);
    const auto bytes = serialize_model(spec, init_params(spec, 0));
    REQUIRE(bytes.size() > 17);
    CHECK(std::string(bytes.begin(), bytes.begin() + 13) == "TIPSCAN-MODEL");
    CHECK(bytes[13] == 1);
    CHECK(bytes[14] == 0);
}

TEST_CASE("corrupt model files are rejected") {
    const auto spec = build_architecture("mini_plain", 16);
    auto bytes = serialize_model(spec, init_params(spec, 0));
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bad_magic), Error);
    auto truncated = bytes;
    truncated.resize(bytes.size() - 9);
    CHECK_THROWS_AS(deserialize_model(truncated), Error);
    auto extra = bytes;
    extra.push_back(0);
    CHECK_THROWS_AS(deserialize_model(extra), Error);
}

TEST_CASE("save writes the model and a layer sidecar") {
    TempDir dir("model");
    const auto spec = build_architecture("mini_resnet", 16);
    const auto params = init_params(spec, 1);
    save_model(dir / "m.bin", spec, params);
    CHECK(load_model(dir / "m.bin").params == params);
    const auto sidecar = read_file_bytes(model_sidecar_path(dir / "m.bin"));
    const std::string text(sidecar.begin(), sidecar.end());
    CHECK(text.find("residual_block") != std::string::npos);
    CHECK_THROWS_AS(load_model(dir / "absent.bin"), Error);
}

}
