#include "interpret.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "error.hpp"
#include "rng.hpp"

namespace geoconcept {

namespace {

// Indices ordered by descending value, lower index first on ties.
std::vector<std::size_t> descending_order(std::span<const double> z) {
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });
  return idx;
}

}  // namespace

std::vector<double> sparsify_top_k(std::span<const double> z, std::size_t k) {
  std::vector<double> out(z.size(), 0.0);
  const auto order = descending_order(z);
  for (std::size_t i = 0; i < std::min(k, z.size()); ++i) out[order[i]] = z[order[i]];
  return out;
}

Explanation explain(const ModelState& model, const std::string& image_id,
                    std::span<const double> x_img, const std::optional<Prediction>& prediction,
                    std::size_t k_top) {
  if (k_top == 0) fail(ErrorCode::kUsage, "explain: k_top must be >= 1");
  if (x_img.size() != model.dim()) {
    fail(ErrorCode::kShape, "explain: image embedding has " + std::to_string(x_img.size()) +
                                " dims, model expects " + std::to_string(model.dim()));
  }
  Explanation e;
  e.image_id = image_id;
  const std::size_t k = model.k();
  if (k_top > k) {
    e.warnings.push_back("k_top " + std::to_string(k_top) + " exceeds the " + std::to_string(k) +
                         " available concepts; using " + std::to_string(k));
    k_top = k;
  }
  const std::vector<double> z = mlp_forward(model.params.image_projector, x_img);
  const auto order = descending_order(z);
  e.sparse.assign(k, 0.0);
  const auto names = model.concepts.selected_names();
  for (std::size_t i = 0; i < k_top; ++i) {
    const std::size_t c = order[i];
    e.sparse[c] = z[c];
    e.top.push_back({names[c], c, z[c]});
  }
  if (prediction) e.predicted = prediction->coordinate;
  return e;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::kUsage, "median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

InfluenceTable influence_table(std::span<const Explanation> explanations,
                               std::span<const double> errors_km, std::size_t min_support,
                               std::size_t table_n) {
  if (explanations.size() != errors_km.size()) {
    fail(ErrorCode::kShape, "influence_table: explanations and errors differ in length");
  }
  InfluenceTable table;
  if (explanations.empty()) {
    table.notices.push_back("no explanations supplied");
    return table;
  }
  const std::size_t k = explanations.front().sparse.size();
  std::vector<std::string> names(k);
  for (const auto& e : explanations) {
    if (e.sparse.size() != k) fail(ErrorCode::kShape, "influence_table: explanations disagree on k");
    for (const auto& t : e.top) names[t.index] = t.name;
  }
  for (ErrorBin bin : kAllErrorBins) {
    std::vector<std::vector<double>> retained(k);
    std::size_t images = 0;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
      if (error_bin(errors_km[i]) != bin) continue;
      ++images;
      for (const auto& t : explanations[i].top) retained[t.index].push_back(t.score);
    }
    if (images == 0) {
      table.notices.push_back("bin " + std::string(error_bin_label(bin)) + " has no images; omitted");
      continue;
    }
    InfluenceBin b;
    b.bin = bin;
    b.images = images;
    for (std::size_t c = 0; c < k; ++c) {
      if (retained[c].size() < std::max<std::size_t>(min_support, 1)) continue;
      b.entries.push_back({names[c], c, median(retained[c]), retained[c].size()});
    }
    std::vector<InfluenceEntry> sorted = b.entries;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& x, const auto& y) { return x.median > y.median; });
    const std::size_t n = std::min(table_n, sorted.size());
    b.top.assign(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(n));
    b.lowest.assign(sorted.rbegin(), sorted.rbegin() + static_cast<std::ptrdiff_t>(n));
    if (b.entries.empty()) {
      table.notices.push_back("bin " + std::string(error_bin_label(bin)) +
                              " has no concept with the required support");
    }
    table.bins.push_back(std::move(b));
  }
  return table;
}

std::vector<Differential> ClassDifferential::top(std::size_t m) const {
  std::vector<Differential> out;
  for (std::size_t l = 0; l < labels.size(); ++l) {
    std::vector<double> row(differentials.row(l).begin(), differentials.row(l).end());
    const auto order = descending_order(row);
    for (std::size_t i = 0; i < std::min(m, order.size()); ++i) {
      const std::size_t c = order[i];
      out.push_back({labels[l], concept_names[c], c, class_means(l, c), differentials(l, c)});
    }
  }
  return out;
}

ClassDifferential class_differential(const std::map<std::string, std::vector<Explanation>>& groups) {
  if (groups.size() < 2) fail(ErrorCode::kUsage, "class_differential needs at least two groups");
  ClassDifferential out;
  std::size_t k = 0;
  for (const auto& [label, members] : groups) {
    if (members.empty()) fail(ErrorCode::kData, "class_differential: group '" + label + "' is empty");
    k = members.front().sparse.size();
  }
  out.concept_names.assign(k, "");
  Matrix sums(groups.size(), k);
  std::vector<double> counts;
  std::size_t l = 0;
  for (const auto& [label, members] : groups) {
    out.labels.push_back(label);
    for (const auto& e : members) {
      if (e.sparse.size() != k) fail(ErrorCode::kShape, "class_differential: explanations disagree on k");
      for (std::size_t c = 0; c < k; ++c) sums(l, c) += e.sparse[c];
      for (const auto& t : e.top) out.concept_names[t.index] = t.name;
    }
    counts.push_back(static_cast<double>(members.size()));
    ++l;
  }
  const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
  out.class_means = Matrix(groups.size(), k);
  out.differentials = Matrix(groups.size(), k);
  for (std::size_t c = 0; c < k; ++c) {
    double all = 0.0;
    for (std::size_t g = 0; g < groups.size(); ++g) all += sums(g, c);
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const double mean = sums(g, c) / counts[g];
      const double others = (all - sums(g, c)) / (total - counts[g]);
      out.class_means(g, c) = mean;
      out.differentials(g, c) = mean - others;
    }
  }
  return out;
}

ConceptMap concept_map(const ModelState& model, const std::string& concept_name,
                       std::span<const GeoCoordinate> points, std::span<const std::string> regions,
                       bool use_basis) {
  if (!regions.empty() && regions.size() != points.size()) {
    fail(ErrorCode::kShape, "concept_map: region labels must align with points");
  }
  std::vector<double> direction(model.dim());
  if (use_basis) {
    const auto idx = model.concepts.find_selected(concept_name);
    if (!idx) fail(ErrorCode::kUsage, "concept '" + concept_name + "' is not in the model's basis");
    const Matrix b = model.basis().effective();
    for (std::size_t r = 0; r < b.rows(); ++r) direction[r] = b(r, *idx);
  } else {
    const auto idx = model.concepts.find(concept_name);
    if (!idx) fail(ErrorCode::kUsage, "unknown concept '" + concept_name + "'");
    const Matrix& e = model.concepts.embeddings();
    for (std::size_t r = 0; r < e.rows(); ++r) direction[r] = e(r, *idx);
  }
  ConceptMap map;
  map.concept_name = concept_name;
  if (points.empty()) return map;
  const Matrix x_loc = encode_locations(model.params.location_encoder, points);
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (std::size_t i = 0; i < points.size(); ++i) {
    ConceptMapPoint p;
    p.location = points[i];
    p.similarity = std::clamp(cosine(x_loc.row(i), direction), -1.0, 1.0);
    if (!regions.empty()) {
      p.region = regions[i];
      auto& slot = acc[regions[i]];
      slot.first += p.similarity;
      slot.second += 1;
    }
    map.points.push_back(std::move(p));
  }
  for (const auto& [region, s] : acc) map.region_means[region] = s.first / static_cast<double>(s.second);
  return map;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorCode::kShape, "pearson: inputs differ in length");
  if (x.size() < 2) fail(ErrorCode::kUsage, "pearson needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorCode::kNumeric, "pearson is undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

}  // namespace

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  const std::size_t n = points.rows();
  if (k < 1 || k > n) {
    fail(ErrorCode::kUsage, "kmeans: k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
  if (!points.all_finite()) fail(ErrorCode::kNumeric, "kmeans: non-finite input");
  Rng rng(derive_seed(seed, 0x4b4d4e53));  // "KMNS"
  KMeansResult out;
  out.centroids = Matrix(k, points.cols());

  // k-means++ seeding.
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  std::size_t pick = rng.index(n);
  for (std::size_t c = 0; c < k; ++c) {
    std::copy(points.row(pick).begin(), points.row(pick).end(), out.centroids.row(c).begin());
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(points.row(i), out.centroids.row(c)));
      total += d2[i];
    }
    if (c + 1 == k) break;
    if (total == 0.0) {
      pick = rng.index(n);
      continue;
    }
    const double target = rng.uniform() * total;
    double run = 0.0;
    pick = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      run += d2[i];
      if (run > target && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }

  out.assignments.assign(n, k);  // sentinel: nothing assigned yet
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(points.row(i), out.centroids.row(c));
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (out.assignments[i] != best) changed = true;
      out.assignments[i] = best;
      objective += best_d;
    }
    out.objective.push_back(objective);
    out.iterations = iter + 1;
    if (!changed) {
      out.converged = true;
      break;
    }
    Matrix sums(k, points.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto src = points.row(i);
      auto dst = sums.row(out.assignments[i]);
      for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
      ++counts[out.assignments[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // an empty cluster keeps its centroid
      for (std::size_t j = 0; j < points.cols(); ++j) {
        out.centroids(c, j) = sums(c, j) / static_cast<double>(counts[c]);
      }
    }
  }
  return out;
}

ContributionResult linear_probe_contributions(const Matrix& activations,
                                              std::span<const std::size_t> labels,
                                              const LinearProbeConfig& cfg) {
  const std::size_t n = activations.rows();
  const std::size_t k = activations.cols();
  if (labels.size() != n) fail(ErrorCode::kShape, "linear_probe_contributions: label count differs");
  std::set<std::size_t> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) fail(ErrorCode::kData, "linear_probe_contributions needs at least two classes");
  if (!(cfg.lr > 0.0)) fail(ErrorCode::kUsage, "linear_probe_contributions: lr must be positive");
  ContributionResult out;
  out.classes.assign(distinct.begin(), distinct.end());
  const std::size_t m = out.classes.size();
  std::vector<std::size_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::size_t>(std::lower_bound(out.classes.begin(), out.classes.end(), labels[i]) -
                                    out.classes.begin());
  }
  out.weights = Matrix(m, k);
  std::vector<double> bias(m, 0.0);
  std::vector<double> logits(m);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Matrix gw(m, k);
    std::vector<double> gb(m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = activations.row(i);
      for (std::size_t c = 0; c < m; ++c) logits[c] = bias[c] + dot(out.weights.row(c), x);
      const double mx = *std::max_element(logits.begin(), logits.end());
      double sum = 0.0;
      for (double& v : logits) sum += (v = std::exp(v - mx));
      for (std::size_t c = 0; c < m; ++c) {
        const double g = (logits[c] / sum - (c == y[i] ? 1.0 : 0.0)) * inv_n;
        gb[c] += g;
        auto row = gw.row(c);
        for (std::size_t j = 0; j < k; ++j) row[j] += g * x[j];
      }
    }
    for (std::size_t c = 0; c < m; ++c) {
      bias[c] -= cfg.lr * gb[c];
      for (std::size_t j = 0; j < k; ++j) {
        out.weights(c, j) -= cfg.lr * (gw(c, j) + cfg.l2 * out.weights(c, j));
      }
    }
  }
  if (!out.weights.all_finite()) fail(ErrorCode::kNumeric, "linear probe diverged");
  out.contributions = Matrix(m, k);
  for (std::size_t c = 0; c < m; ++c) {
    double l1 = 0.0;
    for (std::size_t j = 0; j < k; ++j) l1 += std::abs(out.weights(c, j));
    for (std::size_t j = 0; j < k; ++j) {
      out.contributions(c, j) = l1 > 0.0 ? out.weights(c, j) / l1 : 0.0;
    }
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    double best_v = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      const double v = bias[c] + dot(out.weights.row(c), activations.row(i));
      if (v > best_v) {
        best_v = v;
        best = c;
      }
    }
    if (best == y[i]) ++hits;
  }
  out.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
  return out;
}

}  // namespace geoconcept
