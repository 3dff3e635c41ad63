#include <gtest/gtest.h>

#include "config.hpp"
#include "error.hpp"

using namespace geoconcept;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kUsage;
}

}  // namespace

TEST(RunConfig, DefaultsRoundTrip) {
  const RunConfig d;
  const Json j = run_config_to_json(d);
  EXPECT_EQ(j["train"]["batch_size"], 128);
  EXPECT_EQ(j["loss"]["lambda"], 10.0);
  EXPECT_EQ(j["loss"]["temperature_init"], 0.07);
  EXPECT_EQ(j["interpret"]["k_top"], 20);
  EXPECT_EQ(run_config_to_json(run_config_from_json(j)), j);
  EXPECT_EQ(config_hash(run_config_from_json(j)), config_hash(d));
}

TEST(RunConfig, PartialJsonOverlaysDefaults) {
  const RunConfig c = run_config_from_json(Json::parse(R"({"train": {"epochs": 3}, "loss": {"lambda": 0}})"));
  EXPECT_EQ(c.train.epochs, 3u);
  EXPECT_EQ(c.train.loss.lambda, 0.0);
  EXPECT_EQ(c.train.batch_size, 128u);
  EXPECT_EQ(c.train.lr_location_encoder, 3e-5);
}

TEST(RunConfig, StrictValidation) {
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"train": {"epoch": 3}})")); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"bogus": {}})")); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"train": {"epochs": "3"}})")); }),
            ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"train": {"epochs": -1}})")); }),
            ErrorCode::kValidation);
  EXPECT_EQ(code_of([] { run_config_from_json(Json::parse(R"({"loss": {"divergence_variant": "kl"}})")); }),
            ErrorCode::kValidation);
  EXPECT_NE(code_of([] { run_config_from_json(Json::parse(R"({"train": {"batch_size": 0}})")); }),
            ErrorCode::kData);
}

TEST(RunConfig, SetValueByDottedKey) {
  RunConfig c;
  set_config_value(c, "train.batch_size", "32");
  set_config_value(c, "loss.divergence_variant", "cs_divergence");
  set_config_value(c, "kernel.sigma", "2");
  set_config_value(c, "eval.thresholds_km", "[1, 10]");
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.loss.divergence_variant, DivergenceVariant::kCsDivergence);
  EXPECT_EQ(c.train.kernel.sigma, 2.0);
  EXPECT_EQ(c.eval.thresholds_km, (std::vector<double>{1, 10}));
  EXPECT_EQ(code_of([&] { set_config_value(c, "train.nope", "1"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([&] { set_config_value(c, "train", "1"); }), ErrorCode::kValidation);
  EXPECT_EQ(code_of([&] { set_config_value(c, "train.epochs", "many"); }), ErrorCode::kValidation);
}

TEST(RunConfig, HashChangesWithAnyField) {
  RunConfig a, b;
  b.interpret.table_n = 9;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(RunConfig, DeskConfigLoads) {
  const RunConfig c = load_run_config(GEOCONCEPT_SOURCE_DIR "/configs/desk.json");
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.train.epochs, 30u);
  EXPECT_EQ(code_of([] { load_run_config("/nonexistent/config.json"); }), ErrorCode::kIo);
}

TEST(SubConfigs, RoundTrip) {
  ModelArchitecture a;
  a.image_hidden = {32, 16};
  a.image_activation = Activation::kTanh;
  const ModelArchitecture ab = architecture_from_json(architecture_to_json(a));
  EXPECT_EQ(ab.image_hidden, a.image_hidden);
  EXPECT_EQ(ab.image_activation, Activation::kTanh);
  TrainConfig t;
  t.loss.symmetric = true;
  t.kernel.sigma = 0.5;
  EXPECT_EQ(train_config_to_json(train_config_from_json(train_config_to_json(t))), train_config_to_json(t));
  WorldSpec w;
  w.n_train = 10;
  EXPECT_EQ(world_spec_from_json(world_spec_to_json(w)).n_train, 10u);
}
