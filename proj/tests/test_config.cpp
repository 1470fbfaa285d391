#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>

#include "hcpo/config.hpp"

using namespace hcpo;
using nlohmann::json;

namespace {

std::string write_temp(const char* name, const std::string& text) {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "hcpo_cfg_test";
    fs::create_directories(dir);
    std::string p = (dir / name).string();
    std::ofstream(p) << text;
    return p;
}

bool throws_with(const json& j, const std::string& needle) {
    try {
        (void)config_from_json(j);
    } catch (const std::exception& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("empty file and empty object give defaults") {
    RunConfig a = load_config(write_temp("empty.json", "  \n"));
    RunConfig b = config_from_json(json::object());
    CHECK(a.seed == 0);
    CHECK(a.train.eps == 0.2);
    CHECK(a.train.beta == 0.04);
    CHECK(a.train.mode == TrainMode::HCPO);
    CHECK(a.train.dcs.window == 2);
    CHECK(config_to_json(a) == config_to_json(b));
}

TEST_CASE("round trip through json is lossless") {
    json j = {{"seed", 7},
              {"train",
               {{"mode", "UNIFORM_DCS"}, {"group_size", 4}, {"total_steps", 123},
                {"warmup_steps", 9}, {"optimizer", "sgd"},
                {"dcs", {{"lambda_max", 1.5}, {"alpha", 0.25}}}}},
              {"task_counts", {{"local", 10}, {"copy2", 5}}},
              {"out_dir", "runs/x"}};
    RunConfig cfg = config_from_json(j);
    CHECK(cfg.train.mode == TrainMode::UNIFORM_DCS);
    CHECK(cfg.train.dcs.total_steps == 123);  // mirrored from total_steps
    CHECK(cfg.task_counts.at("copy2") == 5);
    RunConfig again = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("unknown keys are rejected at every level") {
    CHECK(throws_with({{"sed", 1}}, "ParseError"));
    CHECK(throws_with({{"train", {{"epsilon", 0.1}}}}, "ParseError"));
    CHECK(throws_with({{"train", {{"dcs", {{"lambda", 1.0}}}}}}, "ParseError"));
    CHECK(throws_with({{"model", {{"width", 8}}}}, "ParseError"));
    CHECK(throws_with({{"task_counts", {{"recall9", 1}}}}, "recall9"));
}

TEST_CASE("constraint violations carry the constraint text") {
    CHECK(throws_with({{"train", {{"eps", 1.5}}}}, "0 < eps < 1"));
    CHECK(throws_with({{"train", {{"group_size", 1}}}}, "group_size >= 2"));
    CHECK(throws_with({{"train", {{"optimizer", "lbfgs"}}}}, "optimizer"));
    CHECK(throws_with({{"train", {{"temperature", 0.0}}}}, "temperature > 0"));
    CHECK(throws_with({{"train", {{"drop_layer", 9}}}}, "drop_layer"));
    CHECK(throws_with({{"model", {{"d_model", 30}}}}, "divisible"));
    CHECK(throws_with({{"model", {{"vocab", 64}}}}, "vocab"));
    CHECK(throws_with({{"model", {{"max_seq", 64}}}}, "max_seq"));
    CHECK(throws_with({{"env", {{"min_len", 2}}}}, "min_len"));
    CHECK(throws_with({{"train", {{"mode", "PPO"}}}}, "mode"));
}

TEST_CASE("malformed json reports a parse error") {
    std::string p = write_temp("bad.json", "{ seed: }");
    CHECK_THROWS_WITH_AS((void)load_config(p), doctest::Contains("ParseError"),
                         std::runtime_error);
    CHECK_THROWS_AS((void)load_config("/nonexistent/cfg.json"), std::runtime_error);
}

}  // TEST_SUITE
