#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "synthworld.hpp"
#include "trainer.hpp"

using namespace geoconcept;

namespace {

struct ToyRun {
  SyntheticWorld world;
  ImageDataset data;
  ModelArchitecture arch;
  TrainConfig cfg;
};

ToyRun small_setup(std::size_t n = 100) {
  WorldSpec spec;
  spec.dim = 16;
  spec.n_concepts = 4;
  spec.n_train = n;
  spec.n_test = 1;
  ToyRun s{generate(spec), {}, {}, {}};
  s.data = to_dataset(s.world.train, "train");
  s.arch.location_encoder.frequencies = 8;
  s.arch.location_encoder.hidden = 32;
  s.arch.image_hidden = {32};
  s.cfg.batch_size = 16;
  s.cfg.epochs = 2;
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("geoconcept_test_trainer_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Trainer, StepsPerEpochDropsLast) {
  TrainConfig c;
  c.batch_size = 32;
  EXPECT_EQ(steps_per_epoch(100, c), 3u);
  EXPECT_EQ(steps_per_epoch(96, c), 3u);
  EXPECT_EQ(steps_per_epoch(10, c), 1u);
  c.drop_last = false;
  EXPECT_EQ(steps_per_epoch(100, c), 4u);
}

TEST(Trainer, RecordsEveryStep) {
  const ToyRun s = small_setup();
  const TrainResult r = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  EXPECT_EQ(r.record.steps.size(), 12u);
  EXPECT_EQ(r.state.step, 12u);
  EXPECT_EQ(r.record.steps.front().step, 0u);
  EXPECT_EQ(r.record.steps.back().step, 11u);
  EXPECT_EQ(r.record.steps.back().epoch, 1u);
  for (const auto& st : r.record.steps) {
    EXPECT_TRUE(std::isfinite(st.total));
    EXPECT_NEAR(st.total, st.infonce + s.cfg.loss.lambda * st.divergence, 1e-12 * std::abs(st.total));
  }
  const CsvTable csv = r.record.to_csv();
  EXPECT_EQ(csv.rows(), 12u);
}

TEST(Trainer, ZeroEpochsLeavesInitialization) {
  ToyRun s = small_setup();
  s.cfg.epochs = 0;
  const TrainResult r = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  EXPECT_TRUE(states_identical(r.state, initialize_model(s.world.concept_set(), s.arch, s.cfg)));
  EXPECT_TRUE(r.record.steps.empty());
}

TEST(Trainer, DeterministicForFixedSeed) {
  const ToyRun s = small_setup();
  const TrainResult a = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  const TrainResult b = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  EXPECT_TRUE(states_identical(a.state, b.state));
  EXPECT_EQ(a.record, b.record);
  ToyRun other = s;
  other.cfg.seed = 1;
  const TrainResult c = train(s.data, s.world.concept_set(), s.arch, other.cfg);
  EXPECT_FALSE(states_identical(a.state, c.state));
}

TEST(Trainer, ResumeAtAnyStepMatchesUninterrupted) {
  const ToyRun s = small_setup();
  const TrainResult full = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  for (std::uint64_t stop : {1u, 6u, 7u, 11u}) {
    TrainOptions opt;
    opt.stop_at_step = stop;
    const TrainResult head = train(s.data, s.world.concept_set(), s.arch, s.cfg, opt);
    EXPECT_EQ(head.state.step, stop);
    const TrainResult tail = train(s.data, model_from_blob(checkpoint_blob(head.state)));
    EXPECT_TRUE(states_identical(full.state, tail.state)) << "stop " << stop;
    TrainRecord joined = head.record;
    joined.steps.insert(joined.steps.end(), tail.record.steps.begin(), tail.record.steps.end());
    EXPECT_EQ(joined, full.record);
  }
}

TEST(Trainer, LossDecreasesOnToyWorld) {
  ToyRun s = small_setup(256);
  s.cfg.epochs = 15;
  s.cfg.batch_size = 32;
  const TrainResult r = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  const std::size_t per = steps_per_epoch(256, s.cfg);
  double first = 0, last = 0;
  for (std::size_t i = 0; i < per; ++i) {
    first += r.record.steps[i].total;
    last += r.record.steps[r.record.steps.size() - 1 - i].total;
  }
  EXPECT_LT(last, first);
}

TEST(Adam, FirstStepMovesByLearningRatePerGroup) {
  const ToyRun s = small_setup();
  ModelState state = initialize_model(s.world.concept_set(), s.arch, s.cfg);
  const ModelState before = state;
  ModelParams grads = state.params.zeros_like();
  auto gviews = param_views(grads);
  for (auto& v : gviews) {
    for (std::size_t i = 0; i < v.value->size(); ++i) (*v.value)[i] = (i % 3 == 0) ? 0.0 : ((i % 2) ? 0.3 : -2.0);
  }
  adam_step(state, grads);
  EXPECT_EQ(state.step, 1u);
  const auto after = param_views(std::as_const(state.params));
  const auto prev = param_views(before.params);
  const auto g = param_views(std::as_const(grads));
  for (std::size_t t = 0; t < after.size(); ++t) {
    const double lr = after[t].group == ParamGroup::kLocationEncoder ? s.cfg.lr_location_encoder : s.cfg.lr_other;
    for (std::size_t i = 0; i < after[t].value->size(); ++i) {
      const double moved = (*after[t].value)[i] - (*prev[t].value)[i];
      const double gi = (*g[t].value)[i];
      if (gi == 0.0) {
        EXPECT_EQ(moved, 0.0);
      } else {
        EXPECT_NEAR(moved, -lr * (gi > 0 ? 1 : -1), lr * 1e-6) << after[t].name;
      }
    }
  }
}

TEST(Adam, TemperatureIsClamped) {
  const ToyRun s = small_setup();
  ModelState state = initialize_model(s.world.concept_set(), s.arch, s.cfg);
  state.params.log_tau[0] = std::log(kTauMin) + 1e-5;
  ModelParams grads = state.params.zeros_like();
  grads.log_tau[0] = 1.0;  // pushes log tau down by lr
  adam_step(state, grads);
  EXPECT_DOUBLE_EQ(state.tau(), kTauMin);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const ToyRun s = small_setup();
  const TrainResult r = train(s.data, s.world.concept_set(), s.arch, s.cfg);
  const fs::path dir = temp_dir("roundtrip");
  save_checkpoint(r.state, dir / "a.gckp");
  const ModelState loaded = load_checkpoint(dir / "a.gckp");
  EXPECT_TRUE(states_identical(r.state, loaded));
  EXPECT_EQ(model_hash(r.state), model_hash(loaded));
  save_checkpoint(loaded, dir / "b.gckp");
  EXPECT_EQ(read_file_bytes(dir / "a.gckp"), read_file_bytes(dir / "b.gckp"));
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptionAndMagicDetected) {
  const ToyRun s = small_setup();
  const ModelState state = initialize_model(s.world.concept_set(), s.arch, s.cfg);
  auto bytes = encode_checkpoint(checkpoint_blob(state));
  auto flipped = bytes;
  flipped[bytes.size() / 2] ^= std::byte{0x10};
  try {
    decode_checkpoint(flipped);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kChecksumMismatch);
  }
  auto magic = bytes;
  magic[0] = std::byte{'X'};
  try {
    decode_checkpoint(magic);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBadMagic);
  }
  try {
    decode_checkpoint(std::span<const std::byte>(bytes).first(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(e.code(), ErrorCode::kUsage);
  }
}

TEST(Trainer, DimensionMismatchRejected) {
  const ToyRun s = small_setup();
  ImageDataset bad = s.data;
  bad.vectors = Matrix(bad.size(), 8, 0.25);
  EXPECT_THROW(train(bad, s.world.concept_set(), s.arch, s.cfg), Error);
  ImageDataset unlabeled = s.data;
  unlabeled.locations[3] = std::nullopt;
  EXPECT_THROW(train(unlabeled, s.world.concept_set(), s.arch, s.cfg), Error);
}
