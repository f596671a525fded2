#include <doctest.h>

#include "attfc/train_config.hpp"

using namespace attfc;
using nlohmann::json;

TEST_CASE("defaults follow the reference setup") {
    const TrainConfig c;
    CHECK(c.batch_size == 384);
    CHECK(c.epochs == 5);
    CHECK(c.size_ratio == 0.3);
    CHECK(c.k == 2);
    CHECK(c.gamma == 0.999);
    CHECK(c.lr0 == 0.1);
    CHECK(c.momentum == 0.9);
    CHECK(c.weight_decay == 0.0005);
    CHECK(c.margin.scale == 64.0);
    CHECK(c.margin.margin == 0.5);
    CHECK(c.feature_dim == 512);
}

TEST_CASE("json round trip") {
    TrainConfig c;
    c.head = HeadMode::fc;
    c.strategy = GccStrategy::single;
    c.hidden = {8, 4};
    c.dataset.identities = 77;
    c.margin.mode = SimilarityMode::plain;
    c.fc_weight_decay = false;
    c.record_timing = true;
    const json j = to_json(c);
    const TrainConfig back = config_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.hidden == std::vector<std::size_t>{8, 4});
    CHECK_FALSE(back.fc_weight_decay);
}

TEST_CASE("strict parsing names the field") {
    CHECK_THROWS_WITH_AS(config_from_json(json{{"bogus", 1}}), doctest::Contains("bogus"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"dataset", {{"noise", 1}}}}), doctest::Contains("dataset.noise"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"batch_size", -3}}), doctest::Contains("batch_size"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"head", "softmax"}}), doctest::Contains("head"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"record_timing", 1}}), doctest::Contains("record_timing"),
                         ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"gamma", 2.0}}), doctest::Contains("gamma"), ConfigError);
    CHECK_THROWS_WITH_AS(config_from_json(json{{"k", 6}}), doctest::Contains("k"), ConfigError);
}

TEST_CASE("dotted overrides") {
    json doc = json::object();
    apply_override(doc, "dataset.identities=40");
    apply_override(doc, "head=fc");
    apply_override(doc, "margin.mode=plain");
    apply_override(doc, "hidden=[3,3]");
    const TrainConfig c = config_from_json(doc);
    CHECK(c.dataset.identities == 40);
    CHECK(c.head == HeadMode::fc);
    CHECK(c.margin.mode == SimilarityMode::plain);
    CHECK(c.hidden == std::vector<std::size_t>{3, 3});
    CHECK_THROWS_AS(apply_override(doc, "noequals"), ConfigError);
    CHECK_THROWS_AS(apply_override(doc, "a..b=1"), ConfigError);
}

TEST_CASE("step accounting") {
    TrainConfig c;
    c.dataset.identities = 500;
    c.batch_size = 64;
    c.epochs = 20;
    CHECK(c.steps_per_epoch() == 47);
    CHECK(c.total_steps() == 940);
    c.steps = 12;
    CHECK(c.total_steps() == 12);
    c.feature_dim = 32;
    c.hidden = {64};
    CHECK(c.encoder_widths() == std::vector<std::size_t>{64, 64, 32});
    CHECK(c.head_slots() == 128);
    c.head = HeadMode::fc;
    CHECK(c.head_slots() == 500);
}

TEST_CASE("missing config file") {
    CHECK_THROWS_WITH_AS(load_config("/nonexistent/cfg.json", {}), doctest::Contains("/nonexistent/cfg.json"),
                         ConfigError);
}
