#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "concepts.hpp"
#include "encoder.hpp"
#include "error.hpp"
#include "io.hpp"
#include "rng.hpp"

using namespace geoconcept;

namespace {

ConceptSet small_set(std::vector<std::size_t> selected = {}) {
  Matrix e = Matrix::from_rows({{3, 0, 1}, {4, 2, 0}, {0, 0, 0}});
  return ConceptSet({"mountain", "river", "desert"}, e, std::move(selected));
}

}  // namespace

TEST(ConceptSet, NormalizesColumnsAndDefaultsToAll) {
  const ConceptSet s = small_set();
  EXPECT_EQ(s.dim(), 3u);
  EXPECT_EQ(s.count(), 3u);
  EXPECT_EQ(s.k(), 3u);
  EXPECT_DOUBLE_EQ(s.embeddings()(0, 0), 0.6);
  EXPECT_DOUBLE_EQ(s.embeddings()(1, 0), 0.8);
  EXPECT_DOUBLE_EQ(s.embeddings()(1, 1), 1.0);
}

TEST(ConceptSet, SelectionAndLookup) {
  const ConceptSet s = small_set({2, 0});
  EXPECT_EQ(s.k(), 2u);
  EXPECT_EQ(s.selected_names(), (std::vector<std::string>{"desert", "mountain"}));
  const Matrix sel = s.selected_embeddings();
  EXPECT_EQ(sel.cols(), 2u);
  EXPECT_DOUBLE_EQ(sel(0, 1), 0.6);
  EXPECT_EQ(s.find("river"), std::optional<std::size_t>(1));
  EXPECT_EQ(s.find_selected("river"), std::nullopt);
  EXPECT_EQ(s.find_selected("mountain"), std::optional<std::size_t>(1));
  EXPECT_EQ(s.find("glacier"), std::nullopt);
}

TEST(ConceptSet, RejectsBadInput) {
  const Matrix e = Matrix::from_rows({{1, 0}, {0, 1}});
  EXPECT_THROW(ConceptSet({"a"}, e), Error);
  EXPECT_THROW(ConceptSet({"a", "a"}, e), Error);
  EXPECT_THROW(ConceptSet({"a", ""}, e), Error);
  EXPECT_THROW(ConceptSet({"a", "b"}, e, {5}), Error);
  EXPECT_THROW(ConceptSet({"a", "b"}, Matrix::from_rows({{0, 1}, {0, 0}})), Error);
}

TEST(Basis, ProjectionsUseEffectiveBasis) {
  const ConceptSet s = small_set();
  Matrix delta(3, 3);
  delta(2, 1) = 0.5;
  const ConceptBasis b = build_basis(s, delta);
  EXPECT_EQ(b.effective()(2, 1), 0.5);
  const std::vector<double> x{0.0, 0.0, 1.0};
  const ConceptActivation z = project_location(b, x);
  EXPECT_EQ(z.values, (std::vector<double>{0.0, 0.5, 0.0}));
  EXPECT_EQ(z.concept_indices, (std::vector<std::size_t>{0, 1, 2}));
  const Matrix batched = project_locations(b.effective(), Matrix::row_vector(x));
  EXPECT_EQ(batched(0, 1), 0.5);
  EXPECT_THROW(build_basis(s, Matrix(2, 3)), Error);
}

TEST(Basis, ImageProjectionUsesProjector) {
  Rng rng(1);
  const std::vector<std::size_t> hidden{4};
  const MlpParams f = MlpParams::create(3, hidden, 2, rng);
  const std::vector<double> x{0.1, 0.2, 0.3};
  const ConceptActivation z = project_image(f, x, {0, 2});
  EXPECT_EQ(z.values, mlp_forward(f, x));
}

TEST(ConceptSet, LoadsFromTextNamesAndGemb) {
  const fs::path dir = fs::temp_directory_path() / "geoconcept_test_concepts";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "names.txt");
    out << "mountain\nriver\n\ndesert\n";
  }
  write_gemb(dir / "emb.gemb", Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 2}}));
  const ConceptSet s = load_concept_set(dir / "names.txt", dir / "emb.gemb");
  EXPECT_EQ(s.names(), (std::vector<std::string>{"mountain", "river", "desert"}));
  EXPECT_EQ(s.dim(), 3u);
  EXPECT_DOUBLE_EQ(s.embeddings()(2, 2), 1.0);
  write_gemb(dir / "short.gemb", Matrix::from_rows({{1, 0, 0}}));
  try {
    load_concept_set(dir / "names.txt", dir / "short.gemb");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCountMismatch);
  }
  fs::remove_all(dir);
}

TEST(SampleVocabulary, HasDistinctNames) {
  const auto& v = sample_vocabulary();
  EXPECT_GE(v.size(), 20u);
  std::set<std::string> unique(v.begin(), v.end());
  EXPECT_EQ(unique.size(), v.size());
}

TEST(SampleVocabulary, MatchesBundledTextFile) {
  EXPECT_EQ(read_concept_names(GEOCONCEPT_SOURCE_DIR "/data/sample_concepts.txt"), sample_vocabulary());
}
