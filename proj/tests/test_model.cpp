#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "gradient_trials.hpp"
#include "model.hpp"
#include "oracles.hpp"
#include "synthworld.hpp"

using namespace geoconcept;

namespace {

struct Fixture {
  SyntheticWorld world;
  ModelState model;
  BatchInputs batch;
};

Fixture make_fixture(std::size_t n = 8) {
  WorldSpec spec;
  spec.dim = 12;
  spec.n_concepts = 4;
  spec.n_train = n;
  spec.n_test = 1;
  Fixture f{generate(spec), {}, {}};
  ModelArchitecture arch;
  arch.location_encoder.frequencies = 4;
  arch.location_encoder.hidden = 16;
  arch.image_hidden = {16};
  f.model = initialize_model(f.world.concept_set(), arch, TrainConfig{});
  const ImageDataset ds = to_dataset(f.world.train, "t");
  f.batch.x_img = ds.vectors;
  for (const auto& s : f.world.train) f.batch.locations.push_back(s.location);
  return f;
}

}  // namespace

TEST(Model, InitializationShapes) {
  const Fixture f = make_fixture();
  EXPECT_EQ(f.model.dim(), 12u);
  EXPECT_EQ(f.model.k(), 4u);
  EXPECT_EQ(f.model.params.delta.rows(), 12u);
  EXPECT_EQ(f.model.params.delta.cols(), 4u);
  EXPECT_EQ(f.model.params.image_projector.input_dim(), 12u);
  EXPECT_EQ(f.model.params.image_projector.output_dim(), 4u);
  EXPECT_EQ(f.model.params.location_encoder.output_dim(), 12u);
  EXPECT_NEAR(f.model.tau(), 0.07, 1e-15);
  for (double v : f.model.params.delta.values()) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(f.model.step, 0u);
}

TEST(Model, ParamViewsCoverEveryTrainableTensor) {
  const Fixture f = make_fixture();
  const auto views = param_views(f.model.params);
  std::size_t total = 0, loc = 0;
  for (const auto& v : views) {
    total += v.value->size();
    if (v.group == ParamGroup::kLocationEncoder) loc += v.value->size();
  }
  EXPECT_EQ(total, param_count(f.model.params));
  // 3 scales of (2*4 -> 16 -> 12)
  EXPECT_EQ(loc, 3u * (8 * 16 + 16 + 16 * 12 + 12));
  // delta + log_tau + f_img (12 -> 16 -> 4)
  EXPECT_EQ(total - loc, 12u * 4 + 1 + (12 * 16 + 16 + 16 * 4 + 4));
}

TEST(Model, HashTracksParameters) {
  Fixture f = make_fixture();
  const auto h = model_hash(f.model);
  EXPECT_EQ(h, model_hash(f.model));
  f.model.params.delta(0, 0) = 1e-12;
  EXPECT_NE(h, model_hash(f.model));
}

TEST(Objective, MatchesLongDoubleOracle) {
  const Fixture f = make_fixture();
  const oracle::ObjectiveInputs in =
      oracle::make_inputs(f.model.params, f.batch, f.model.concepts.selected_embeddings());
  LossConfig cfg;
  for (auto space : {ContrastiveSpace::kRaw, ContrastiveSpace::kConcept}) {
    for (auto variant : {DivergenceVariant::kAsWritten, DivergenceVariant::kCsDivergence}) {
      cfg.contrastive_space = space;
      cfg.divergence_variant = variant;
      const ObjectiveResult r = evaluate_objective(f.model.params, f.model.concepts.selected_embeddings(), f.batch,
                                                   cfg, KernelConfig{}, false);
      const double want = static_cast<double>(oracle::objective(f.model.params, in, cfg, KernelConfig{}, LossTerms::kTotal));
      EXPECT_NEAR(r.loss.total, want, 1e-11 * std::max(1.0, std::abs(want)));
    }
  }
}

TEST(Objective, GradientTrialsPass) {
  for (std::size_t t = 0; t < 8; ++t) {
    const auto o = gradtrial::run_trial(t, 777, 1e-5);
    EXPECT_LT(o.worst_rel, 1e-5) << "trial " << t << " " << o.worst_where;
    EXPECT_LT(o.forward_rel, 1e-12);
  }
}

TEST(Objective, GradientsOnlyWhenRequested) {
  const Fixture f = make_fixture();
  const auto base = f.model.concepts.selected_embeddings();
  const ObjectiveResult a = evaluate_objective(f.model.params, base, f.batch, LossConfig{}, KernelConfig{}, true);
  const ObjectiveResult b = evaluate_objective(f.model.params, base, f.batch, LossConfig{}, KernelConfig{}, false);
  EXPECT_EQ(a.loss.total, b.loss.total);
  EXPECT_EQ(param_count(a.grads), param_count(f.model.params));
}

TEST(Objective, RejectsMismatchedBatch) {
  Fixture f = make_fixture();
  f.batch.locations.pop_back();
  EXPECT_THROW(evaluate_objective(f.model.params, f.model.concepts.selected_embeddings(), f.batch, LossConfig{},
                                  KernelConfig{}, false),
               Error);
}

TEST(Model, ConceptProjections) {
  const Fixture f = make_fixture();
  const Matrix z = image_concepts(f.model, f.batch.x_img);
  EXPECT_EQ(z.rows(), f.batch.x_img.rows());
  EXPECT_EQ(z.cols(), 4u);
  const Matrix x_loc = encode_locations(f.model.params.location_encoder, f.batch.locations);
  const Matrix zl = location_concepts(f.model, x_loc);
  const Matrix want = matmul(x_loc, f.model.basis().effective());
  EXPECT_EQ(zl, want);
}
