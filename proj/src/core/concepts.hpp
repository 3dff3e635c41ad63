#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "io.hpp"
#include "numkernel.hpp"

namespace geoconcept {

// Named concept library with frozen text embeddings stored column-wise (d x n).
// `selected` picks the k concepts that form the basis.
class ConceptSet {
 public:
  ConceptSet() = default;
  // Validates names and values and normalizes columns (unless
  // normalize_columns is false, used when restoring exact checkpoint bits).
  // An empty selection means every concept.
  ConceptSet(std::vector<std::string> names, Matrix embeddings,
             std::vector<std::size_t> selected = {}, bool normalize_columns = true);

  const std::vector<std::string>& names() const { return names_; }
  const Matrix& embeddings() const { return embeddings_; }
  const std::vector<std::size_t>& selected() const { return selected_; }

  std::size_t dim() const { return embeddings_.rows(); }
  std::size_t count() const { return names_.size(); }
  std::size_t k() const { return selected_.size(); }

  Matrix selected_embeddings() const;  // d x k
  std::vector<std::string> selected_names() const;
  std::optional<std::size_t> find(const std::string& name) const;
  // Position of a concept name within the selection.
  std::optional<std::size_t> find_selected(const std::string& name) const;

 private:
  std::vector<std::string> names_;
  Matrix embeddings_;
  std::vector<std::size_t> selected_;
};

// B = base + delta, with base the frozen selected text embeddings.
struct ConceptBasis {
  Matrix base;   // d x k
  Matrix delta;  // d x k
  std::vector<std::size_t> concept_indices;

  Matrix effective() const { return base + delta; }
  std::size_t dim() const { return base.rows(); }
  std::size_t k() const { return base.cols(); }
};

struct ConceptActivation {
  std::vector<double> values;
  std::vector<std::size_t> concept_indices;
};

ConceptBasis build_basis(const ConceptSet& set, const Matrix& delta);

// z_loc = x_loc^T B.
ConceptActivation project_location(const ConceptBasis& basis, std::span<const double> x_loc);
// Batched form: rows of x_loc (N x d) times B gives N x k.
Matrix project_locations(const Matrix& basis_effective, const Matrix& x_loc);

// z_img = f_img(x_img).
ConceptActivation project_image(const MlpParams& f_img, std::span<const double> x_img,
                                const std::vector<std::size_t>& concept_indices);

// Names come from a concept_set manifest (.json) or a UTF-8 text file with one
// name per line; embeddings are a GEMB file with one row per concept.
ConceptSet load_concept_set(const fs::path& names_path, const fs::path& embeddings_path);
std::vector<std::string> read_concept_names(const fs::path& path);

// Sample geography vocabulary bundled with the toolkit.
const std::vector<std::string>& sample_vocabulary();

}  // namespace geoconcept
