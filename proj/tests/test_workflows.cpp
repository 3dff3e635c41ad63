#include <gtest/gtest.h>

#include <fstream>

#include "error.hpp"
#include "trainer.hpp"
#include "workflows.hpp"

using namespace geoconcept;

namespace {

RunConfig small_config() {
  RunConfig cfg;
  cfg.world.n_train = 200;
  cfg.world.n_test = 40;
  cfg.world.dim = 32;
  cfg.world.n_concepts = 8;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 32;
  cfg.model.location_encoder.frequencies = 16;
  cfg.model.location_encoder.hidden = 32;
  cfg.model.image_hidden = {32};
  cfg.gallery.grid_deg = 30.0;
  cfg.interpret.min_support = 1;
  cfg.interpret.clusters = 3;
  cfg.probe.trials = 2;
  cfg.probe.epochs = 20;
  return cfg;
}

class Workflows : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "geoconcept_test_workflows";
    fs::remove_all(root_);
    cfg_ = small_config();
    run_simulate(cfg_, {root_ / "data"});
    run_train(cfg_, {root_ / "data/concepts", root_ / "data/train", root_ / "run", std::nullopt, std::nullopt});
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static fs::path data(const std::string& name) { return root_ / "data" / name; }
  static fs::path ckpt() { return root_ / "run/checkpoint.gckp"; }

  static inline fs::path root_;
  static inline RunConfig cfg_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

}  // namespace

TEST_F(Workflows, SimulateWritesPairsAndIntensities) {
  for (const char* name : {"concepts", "train", "test"}) {
    EXPECT_TRUE(fs::exists(data(std::string(name) + ".gemb")));
    EXPECT_TRUE(fs::exists(data(std::string(name) + ".json")));
  }
  const EmbeddingBundle train = read_embeddings(data("train"));
  EXPECT_EQ(train.matrix.rows(), 200u);
  EXPECT_TRUE(train.manifest.has_locations());
  EXPECT_EQ(read_manifest(data("concepts.json")).kind, ManifestKind::kConceptSet);
  EXPECT_EQ(read_csv(data("test_intensities.csv")).rows.size(), 40u);
  const Json stamp = Json::parse(read_file_text(data("stamp.json")));
  EXPECT_EQ(stamp["command"], "simulate");
  EXPECT_EQ(stamp["config_hash"], hex64(config_hash(cfg_)));
  EXPECT_EQ(stamp["code_version"], code_version());
}

TEST_F(Workflows, TrainWritesCheckpointAndLog) {
  const ModelState m = load_checkpoint(ckpt());
  EXPECT_EQ(m.step, 12u);
  EXPECT_EQ(m.k(), 8u);
  EXPECT_EQ(read_csv(root_ / "run/train_log.csv").rows.size(), 12u);
  EXPECT_EQ(run_config_from_json(Json::parse(read_file_text(root_ / "run/config.json"))).train.epochs, 2u);
}

TEST_F(Workflows, ResumeMatchesUninterrupted) {
  run_train(cfg_, {data("concepts"), data("train"), root_ / "half", std::nullopt, 5});
  run_train(cfg_, {data("concepts"), data("train"), root_ / "resumed", root_ / "half/checkpoint.gckp", std::nullopt});
  EXPECT_EQ(read_file_bytes(root_ / "resumed/checkpoint.gckp"), read_file_bytes(ckpt()));
}

TEST_F(Workflows, ConceptSelectionByName) {
  RunConfig cfg = cfg_;
  const auto names = read_manifest(data("concepts.json")).ids;
  cfg.concepts = {names[3], names[1]};
  cfg.train.epochs = 0;
  run_train(cfg, {data("concepts"), data("train"), root_ / "selected", std::nullopt, std::nullopt});
  const ModelState m = load_checkpoint(root_ / "selected/checkpoint.gckp");
  EXPECT_EQ(m.concepts.selected_names(), cfg.concepts);
  cfg.concepts = {"not a concept"};
  EXPECT_THROW(run_train(cfg, {data("concepts"), data("train"), root_ / "bad", std::nullopt, std::nullopt}), Error);
}

TEST_F(Workflows, EvalSummaryAndItems) {
  const WorkflowReport r = run_eval(cfg_, {ckpt(), data("test"), root_ / "eval", std::nullopt, data("train")});
  ASSERT_EQ(r.fractions.size(), 5u);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_GE(r.fractions[i], r.fractions[i - 1]);
  const CsvData summary = read_csv(root_ / "eval/eval_summary.csv");
  EXPECT_EQ(summary.header, (std::vector<std::string>{"threshold_km", "accuracy", "random_baseline"}));
  EXPECT_EQ(summary.rows.size(), 5u);
  EXPECT_EQ(read_csv(root_ / "eval/eval_items.csv").rows.size(), 40u);
}

TEST_F(Workflows, EvalGroupsViewsOfOneImage) {
  const EmbeddingBundle test = read_embeddings(data("test"));
  Manifest m = test.manifest;
  // Four views per image: the first row of each group repeated with its
  // neighbours' vectors, all at the group's true location.
  for (std::size_t i = 0; i < m.ids.size(); ++i) {
    m.view_of.push_back("img" + std::to_string(i / 4));
    m.locations[i] = test.manifest.locations[(i / 4) * 4];
  }
  write_embeddings(root_ / "views", test.matrix, m);
  const WorkflowReport r = run_eval(cfg_, {ckpt(), root_ / "views", root_ / "eval_views", std::nullopt, data("train")});
  const CsvData items = read_csv(root_ / "eval_views/eval_items.csv");
  ASSERT_EQ(items.rows.size(), 10u);
  EXPECT_EQ(items.rows[3][0], "img3");

  // A view repeated twice gives the single-view prediction (the mean of two
  // equal vectors is exact).
  Matrix repeated(4, test.matrix.cols());
  Manifest rep;
  rep.dim = test.matrix.cols();
  for (std::size_t i = 0; i < 4; ++i) {
    std::copy(test.matrix.row(i / 2).begin(), test.matrix.row(i / 2).end(), repeated.row(i).begin());
    rep.ids.push_back("r" + std::to_string(i));
    rep.view_of.push_back(test.manifest.ids[i / 2]);
    rep.locations.push_back(test.manifest.locations[i / 2]);
  }
  write_embeddings(root_ / "repeated", repeated, rep);
  run_eval(cfg_, {ckpt(), root_ / "repeated", root_ / "eval_rep", std::nullopt, data("train")});
  run_eval(cfg_, {ckpt(), data("test"), root_ / "eval_single", std::nullopt, data("train")});
  const CsvData a = read_csv(root_ / "eval_rep/eval_items.csv");
  const CsvData b = read_csv(root_ / "eval_single/eval_items.csv");
  for (std::size_t i = 0; i < 2; ++i) EXPECT_EQ(a.rows[i], b.rows[i]);

  m.locations[1] = GeoCoordinate::make(0, 0);
  write_embeddings(root_ / "conflict", test.matrix, m);
  EXPECT_THROW(run_eval(cfg_, {ckpt(), root_ / "conflict", root_ / "e4", std::nullopt, data("train")}), Error);
  (void)r;
}

TEST_F(Workflows, EvalNeedsAGallerySource) {
  RunConfig cfg = cfg_;
  cfg.gallery.grid_deg = 0.0;
  try {
    run_eval(cfg, {ckpt(), data("test"), root_ / "nogallery", std::nullopt, std::nullopt});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUsage);
  }
}

TEST_F(Workflows, ExplainWithErrorsAndLabels) {
  run_eval(cfg_, {ckpt(), data("test"), root_ / "eval2", std::nullopt, data("train")});
  const auto ids = read_manifest(data("test.json")).ids;
  std::string labels = "id,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) labels += ids[i] + "," + (i % 2 ? "urban" : "rural") + "\n";
  write_text(root_ / "labels.csv", labels);
  run_explain(cfg_, {ckpt(), data("test"), root_ / "explain", root_ / "eval2/eval_items.csv", root_ / "labels.csv"});
  const CsvData ex = read_csv(root_ / "explain/explanations.csv");
  EXPECT_EQ(ex.header, (std::vector<std::string>{"id", "rank", "concept", "score"}));
  EXPECT_EQ(ex.rows.size(), 40u * 8u);  // k = 8 < k_top
  EXPECT_EQ(read_embeddings(root_ / "explain/activations").matrix.rows(), 40u);
  EXPECT_EQ(read_csv(root_ / "explain/clusters.csv").rows.size(), 40u);
  for (const char* f : {"influence.csv", "influence_ranked.csv", "sankey.csv", "contributions.csv"}) {
    EXPECT_TRUE(fs::exists(root_ / "explain" / f)) << f;
  }
}

TEST_F(Workflows, MapOnGridAndPoints) {
  const std::string name = read_manifest(data("concepts.json")).ids[2];
  run_map(cfg_, {ckpt(), name, root_ / "map", std::nullopt, 45.0, false});
  EXPECT_EQ(read_csv(root_ / "map/map.csv").rows.size(), sphere_grid(45.0).size());
  write_text(root_ / "points.csv", "lat,lon,region\n10,10,a\n20,20,a\n-30,40,b\n");
  run_map(cfg_, {ckpt(), name, root_ / "map2", root_ / "points.csv", 5.0, true});
  EXPECT_EQ(read_csv(root_ / "map2/map_regions.csv").rows.size(), 2u);
  EXPECT_THROW(run_map(cfg_, {ckpt(), "unknown", root_ / "map3", std::nullopt, 45.0, false}), Error);
}

TEST_F(Workflows, ProbeRegressionAndClassification) {
  const auto ids = read_manifest(data("train.json")).ids;
  const CsvData truth = read_csv(data("train_intensities.csv"));
  std::string reg = "id,target\n", cls = "id,biome\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    reg += ids[i] + "," + truth.rows[i][truth.header.size() - 1] + "\n";
    cls += ids[i] + "," + (i % 3 == 0 ? "a" : "b") + "\n";
  }
  write_text(root_ / "reg.csv", reg);
  write_text(root_ / "cls.csv", cls);
  const WorkflowReport r =
      run_probe(cfg_, {ckpt(), data("train"), root_ / "reg.csv", root_ / "probe", "target", false, ProbeFeatures::kFused});
  const CsvData out = read_csv(root_ / "probe/probe.csv");
  EXPECT_EQ(out.rows[0][out.column("metric")], "r_squared");
  run_probe(cfg_, {ckpt(), data("train"), root_ / "cls.csv", root_ / "probe2", "biome", true, ProbeFeatures::kImage});
  EXPECT_EQ(read_csv(root_ / "probe2/probe.csv").rows[0][1], "accuracy");
  EXPECT_EQ(probe_features_from_name("location"), ProbeFeatures::kLocation);
  EXPECT_THROW(probe_features_from_name("text"), Error);
  (void)r;
}

TEST_F(Workflows, ExportTemplateIsAValidEmptyPair) {
  run_export_template({root_ / "tmpl/images", ManifestKind::kImageEmbeddings, 512});
  const EmbeddingBundle b = read_embeddings(root_ / "tmpl/images");
  EXPECT_EQ(b.matrix.rows(), 0u);
  EXPECT_EQ(b.matrix.cols(), 512u);
  EXPECT_EQ(b.manifest.dim, 512u);
  EXPECT_THROW(run_export_template({root_ / "tmpl/bad", ManifestKind::kGallery, 0}), Error);
}

TEST_F(Workflows, DimensionMismatchIsReported) {
  run_export_template({root_ / "wrongdim", ManifestKind::kImageEmbeddings, 16});
  EXPECT_THROW(run_eval(cfg_, {ckpt(), root_ / "wrongdim", root_ / "e3", std::nullopt, data("train")}), Error);
}
