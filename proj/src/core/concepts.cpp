#include "concepts.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "error.hpp"

namespace geoconcept {

ConceptSet::ConceptSet(std::vector<std::string> names, Matrix embeddings,
                       std::vector<std::size_t> selected, bool normalize_columns)
    : names_(std::move(names)), embeddings_(std::move(embeddings)), selected_(std::move(selected)) {
  if (embeddings_.cols() != names_.size()) {
    fail(ErrorCode::kCountMismatch, "concept set has " + std::to_string(names_.size()) +
                                        " names but " + std::to_string(embeddings_.cols()) +
                                        " embedding columns");
  }
  std::set<std::string> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorCode::kValidation, "concept names must be non-empty");
    if (!seen.insert(n).second) fail(ErrorCode::kValidation, "duplicate concept name '" + n + "'");
  }
  if (!embeddings_.all_finite()) {
    fail(ErrorCode::kValidation, "concept embeddings contain non-finite values");
  }
  for (std::size_t c = 0; c < embeddings_.cols(); ++c) {
    double ss = 0.0;
    for (std::size_t r = 0; r < embeddings_.rows(); ++r) ss += embeddings_(r, c) * embeddings_(r, c);
    const double norm = std::sqrt(ss);
    if (norm == 0.0) fail(ErrorCode::kValidation, "concept '" + names_[c] + "' has a zero embedding");
    if (!normalize_columns) continue;
    for (std::size_t r = 0; r < embeddings_.rows(); ++r) embeddings_(r, c) /= norm;
  }
  if (selected_.empty()) {
    for (std::size_t i = 0; i < names_.size(); ++i) selected_.push_back(i);
  }
  std::set<std::size_t> sel_seen;
  for (std::size_t idx : selected_) {
    if (idx >= names_.size()) {
      fail(ErrorCode::kUsage, "concept selection index " + std::to_string(idx) + " out of range");
    }
    if (!sel_seen.insert(idx).second) {
      fail(ErrorCode::kUsage, "concept selection repeats index " + std::to_string(idx));
    }
  }
}

Matrix ConceptSet::selected_embeddings() const {
  Matrix out(dim(), k());
  for (std::size_t j = 0; j < k(); ++j) {
    for (std::size_t r = 0; r < dim(); ++r) out(r, j) = embeddings_(r, selected_[j]);
  }
  return out;
}

std::vector<std::string> ConceptSet::selected_names() const {
  std::vector<std::string> out;
  for (std::size_t idx : selected_) out.push_back(names_[idx]);
  return out;
}

std::optional<std::size_t> ConceptSet::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> ConceptSet::find_selected(const std::string& name) const {
  for (std::size_t j = 0; j < selected_.size(); ++j) {
    if (names_[selected_[j]] == name) return j;
  }
  return std::nullopt;
}

ConceptBasis build_basis(const ConceptSet& set, const Matrix& delta) {
  if (delta.rows() != set.dim() || delta.cols() != set.k()) {
    fail(ErrorCode::kShape, "build_basis: delta is " + delta.shape_string() + ", expected " +
                                std::to_string(set.dim()) + "x" + std::to_string(set.k()));
  }
  return {set.selected_embeddings(), delta, set.selected()};
}

ConceptActivation project_location(const ConceptBasis& basis, std::span<const double> x_loc) {
  if (x_loc.size() != basis.dim()) {
    fail(ErrorCode::kShape, "project_location: x_loc has length " + std::to_string(x_loc.size()) +
                                ", basis dim is " + std::to_string(basis.dim()));
  }
  const Matrix z = project_locations(basis.effective(), Matrix::row_vector(x_loc));
  return {std::vector<double>(z.values().begin(), z.values().end()), basis.concept_indices};
}

Matrix project_locations(const Matrix& basis_effective, const Matrix& x_loc) {
  return matmul(x_loc, basis_effective);
}

ConceptActivation project_image(const MlpParams& f_img, std::span<const double> x_img,
                                const std::vector<std::size_t>& concept_indices) {
  auto z = mlp_forward(f_img, x_img);
  if (!concept_indices.empty() && z.size() != concept_indices.size()) {
    fail(ErrorCode::kShape, "project_image: MLP output width does not match concept count");
  }
  return {std::move(z), concept_indices};
}

std::vector<std::string> read_concept_names(const fs::path& path) {
  if (path.extension() == ".json") {
    const Manifest m = read_manifest(path);
    if (m.kind != ManifestKind::kConceptSet) {
      fail(ErrorCode::kValidation, path.string() + ": manifest kind is not concept_set");
    }
    return m.ids;
  }
  std::istringstream in(read_file_text(path));
  std::vector<std::string> names;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    names.push_back(line);
  }
  return names;
}

ConceptSet load_concept_set(const fs::path& names_path, const fs::path& embeddings_path) {
  auto names = read_concept_names(names_path);
  const Matrix rows = read_gemb(embeddings_path);
  if (rows.rows() != names.size()) {
    fail(ErrorCode::kCountMismatch, "concept names (" + std::to_string(names.size()) +
                                        ") and embedding rows (" + std::to_string(rows.rows()) +
                                        ") disagree");
  }
  if (names_path.extension() == ".json") {
    const Manifest m = read_manifest(names_path);
    if (rows.rows() > 0 && m.dim != rows.cols()) {
      fail(ErrorCode::kCountMismatch, "concept manifest dim does not match embedding file");
    }
  }
  return ConceptSet(std::move(names), transpose(rows));
}

const std::vector<std::string>& sample_vocabulary() {
  static const std::vector<std::string> kVocabulary = {
      "tropical climate", "mountain",     "cathedral",     "desert",       "rainforest",
      "glacier",          "savanna",      "coastline",     "volcano",      "rice terrace",
      "pagoda",           "mosque",       "minaret",       "windmill",     "canal",
      "skyscraper",       "favela",       "eucalyptus",    "palm tree",    "pine forest",
      "birch forest",     "tundra",       "steppe",        "fjord",        "sand dune",
      "mangrove",         "vineyard",     "olive grove",   "tea plantation", "cactus",
      "adobe house",      "thatched roof", "log cabin",    "half-timbered house", "terracotta roof",
      "cobblestone street", "souk",       "tuk-tuk",       "rickshaw",     "double-decker bus",
      "tram",             "monorail",     "left-hand traffic", "snow",     "monsoon rain",
      "prayer flags",     "torii gate",   "stupa",         "lighthouse",   "harbor",
      "esplanade",        "bazaar",       "colonial architecture", "brutalist block", "wooden church",
      "onion dome",       "red soil",     "limestone cliff", "karst peaks", "rolling hills",
      "wheat field",      "cattle ranch", "ice hockey rink", "cricket pitch",
  };
  return kVocabulary;
}

}  // namespace geoconcept
