#include "probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "error.hpp"
#include "rng.hpp"

namespace geoconcept {

const char* metric_kind_name(MetricKind k) {
  return k == MetricKind::kRSquared ? "r_squared" : "accuracy";
}

void ProbeConfig::validate() const {
  if (trials == 0) fail(ErrorCode::kUsage, "probe trials must be >= 1");
  if (batch_size == 0) fail(ErrorCode::kUsage, "probe batch_size must be >= 1");
  if (!(train_fraction > 0.0) || !(val_fraction >= 0.0) || train_fraction + val_fraction >= 1.0) {
    fail(ErrorCode::kUsage, "probe split fractions must leave room for a test split");
  }
  if (lr_choices.empty() || width_choices.empty()) {
    fail(ErrorCode::kUsage, "probe search space is empty");
  }
  if (max_depth > 2) fail(ErrorCode::kUsage, "probe depth is limited to 2 hidden layers");
  for (std::size_t w : width_choices) {
    if (w == 0 || w > 128) fail(ErrorCode::kUsage, "probe widths must lie in [1, 128]");
  }
}

ProbeSplit make_split(std::size_t n, const ProbeConfig& cfg) {
  Rng rng(derive_seed(cfg.seed, 0x53504c54));  // "SPLT"
  const auto perm = permutation(n, rng);
  const auto n_train = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.val_fraction * static_cast<double>(n)));
  ProbeSplit s;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < n_train) s.train.push_back(perm[i]);
    else if (i < n_train + n_val) s.val.push_back(perm[i]);
    else s.test.push_back(perm[i]);
  }
  return s;
}

double r_squared(std::span<const double> truth, std::span<const double> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) {
    fail(ErrorCode::kShape, "r_squared: length mismatch or empty input");
  }
  double mean = 0.0;
  for (double t : truth) mean += t;
  mean /= static_cast<double>(truth.size());
  double ss_tot = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - mean) * (truth[i] - mean);
    ss_res += (truth[i] - predicted[i]) * (truth[i] - predicted[i]);
  }
  if (ss_tot == 0.0) fail(ErrorCode::kData, "r_squared is undefined for zero-variance targets");
  return 1.0 - ss_res / ss_tot;
}

Matrix concat_features(const Matrix& image_block, const Matrix& location_block) {
  if (image_block.rows() != location_block.rows()) {
    fail(ErrorCode::kShape, "concat_features: row counts differ");
  }
  Matrix out(image_block.rows(), image_block.cols() + location_block.cols());
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    const auto a = image_block.row(r);
    const auto b = location_block.row(r);
    std::copy(a.begin(), a.end(), dst.begin());
    std::copy(b.begin(), b.end(), dst.begin() + static_cast<std::ptrdiff_t>(a.size()));
  }
  return out;
}

namespace {

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x, std::span<const std::size_t> rows) {
    Standardizer s;
    s.mean.assign(x.cols(), 0.0);
    s.scale.assign(x.cols(), 1.0);
    if (rows.empty()) return s;
    for (std::size_t r : rows) {
      for (std::size_t c = 0; c < x.cols(); ++c) s.mean[c] += x(r, c);
    }
    for (double& m : s.mean) m /= static_cast<double>(rows.size());
    for (std::size_t c = 0; c < x.cols(); ++c) {
      double var = 0.0;
      for (std::size_t r : rows) var += (x(r, c) - s.mean[c]) * (x(r, c) - s.mean[c]);
      var /= static_cast<double>(rows.size());
      s.scale[c] = var > 1e-24 ? std::sqrt(var) : 1.0;
    }
    return s;
  }

  Matrix apply(const Matrix& x, std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) = (x(rows[i], c) - mean[c]) / scale[c];
    }
    return out;
  }
};

enum class ProbeLoss { kSquared, kSoftmax };

// Small MLP trained with Adam. The output layer starts at zero weights, so an
// untrained probe predicts its output bias.
struct ProbeNet {
  MlpParams net;
  MlpParams m;
  MlpParams v;
  std::size_t t = 0;
};

ProbeNet make_net(std::size_t in, std::size_t out, const ProbeHyperparams& hp, Rng& rng,
                  std::span<const double> output_bias) {
  std::vector<std::size_t> hidden(hp.depth, hp.width);
  ProbeNet p;
  p.net = MlpParams::create(in, hidden, out, rng, Activation::kRelu);
  p.net.layers.back().weight.fill(0.0);
  for (std::size_t c = 0; c < out; ++c) p.net.layers.back().bias[c] = output_bias[c];
  p.m = p.net.zeros_like();
  p.v = p.net.zeros_like();
  return p;
}

void adam_update(ProbeNet& p, const MlpParams& g, double lr) {
  constexpr double b1 = 0.9;
  constexpr double b2 = 0.999;
  ++p.t;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(p.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(p.t));
  for (std::size_t l = 0; l < p.net.layers.size(); ++l) {
    for (int which = 0; which < 2; ++which) {
      Matrix& th = which == 0 ? p.net.layers[l].weight : p.net.layers[l].bias;
      Matrix& m = which == 0 ? p.m.layers[l].weight : p.m.layers[l].bias;
      Matrix& v = which == 0 ? p.v.layers[l].weight : p.v.layers[l].bias;
      const Matrix& gr = which == 0 ? g.layers[l].weight : g.layers[l].bias;
      for (std::size_t i = 0; i < th.size(); ++i) {
        m[i] = b1 * m[i] + (1 - b1) * gr[i];
        v[i] = b2 * v[i] + (1 - b2) * gr[i] * gr[i];
        th[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
      }
    }
  }
}

// targets: N x out (regression values or one-hot labels).
void fit(ProbeNet& p, const Matrix& x, const Matrix& targets, ProbeLoss loss,
         const ProbeHyperparams& hp, const ProbeConfig& cfg, Rng& rng) {
  const std::size_t n = x.rows();
  if (n == 0) return;
  const std::size_t out = targets.cols();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(n, rng);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - begin);
      Matrix xb(count, x.cols());
      Matrix yb(count, out);
      for (std::size_t i = 0; i < count; ++i) {
        const auto xs = x.row(order[begin + i]);
        const auto ys = targets.row(order[begin + i]);
        std::copy(xs.begin(), xs.end(), xb.row(i).begin());
        std::copy(ys.begin(), ys.end(), yb.row(i).begin());
      }
      MlpCache cache;
      const Matrix pred = mlp_forward(p.net, xb, &cache);
      Matrix grad(count, out);
      for (std::size_t i = 0; i < count; ++i) {
        if (loss == ProbeLoss::kSquared) {
          for (std::size_t c = 0; c < out; ++c) {
            grad(i, c) = 2.0 * (pred(i, c) - yb(i, c)) / static_cast<double>(count);
          }
        } else {
          const auto row = pred.row(i);
          const double m = *std::max_element(row.begin(), row.end());
          double sum = 0.0;
          for (double v : row) sum += std::exp(v - m);
          for (std::size_t c = 0; c < out; ++c) {
            grad(i, c) = (std::exp(row[c] - m) / sum - yb(i, c)) / static_cast<double>(count);
          }
        }
      }
      MlpParams g = p.net.zeros_like();
      mlp_backward(p.net, cache, grad, g, false);
      adam_update(p, g, hp.lr);
    }
  }
}

ProbeHyperparams draw_hyperparams(const ProbeConfig& cfg, Rng& rng) {
  ProbeHyperparams hp;
  hp.lr = cfg.lr_choices[rng.index(cfg.lr_choices.size())];
  hp.depth = rng.index(cfg.max_depth + 1);
  hp.width = cfg.width_choices[rng.index(cfg.width_choices.size())];
  return hp;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

double accuracy(const Matrix& logits, std::span<const std::size_t> labels) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax(logits.row(i)) == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

void check_split(const ProbeSplit& split, std::size_t n) {
  if (split.train.empty() || split.test.empty()) {
    fail(ErrorCode::kData, "probe split needs non-empty train and test parts");
  }
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (std::size_t i : *part) {
      if (i >= n) fail(ErrorCode::kUsage, "probe split index out of range");
    }
  }
}

}  // namespace

ProbeResult probe_regression(const Matrix& features, std::span<const double> targets,
                             const ProbeSplit& split, const ProbeConfig& cfg,
                             const std::string& task) {
  cfg.validate();
  if (features.rows() != targets.size()) {
    fail(ErrorCode::kShape, "probe_regression: feature rows and target count differ");
  }
  check_split(split, targets.size());
  const Standardizer xs = Standardizer::fit(features, split.train);
  double y_mean = 0.0;
  for (std::size_t i : split.train) y_mean += targets[i];
  y_mean /= static_cast<double>(split.train.size());
  double y_var = 0.0;
  for (std::size_t i : split.train) y_var += (targets[i] - y_mean) * (targets[i] - y_mean);
  y_var /= static_cast<double>(split.train.size());
  if (y_var == 0.0) fail(ErrorCode::kData, "probe_regression: training targets have zero variance");
  const double y_scale = std::sqrt(y_var);

  auto scaled_targets = [&](std::span<const std::size_t> rows) {
    Matrix t(rows.size(), 1);
    for (std::size_t i = 0; i < rows.size(); ++i) t[i] = (targets[rows[i]] - y_mean) / y_scale;
    return t;
  };
  auto truth = [&](std::span<const std::size_t> rows) {
    std::vector<double> t;
    for (std::size_t r : rows) t.push_back(targets[r]);
    return t;
  };
  auto predictions = [&](const ProbeNet& net, std::span<const std::size_t> rows) {
    const Matrix out = mlp_forward(net.net, xs.apply(features, rows));
    std::vector<double> p;
    for (std::size_t i = 0; i < rows.size(); ++i) p.push_back(out[i] * y_scale + y_mean);
    return p;
  };

  const Matrix x_train = xs.apply(features, split.train);
  const Matrix y_train = scaled_targets(split.train);
  const std::vector<std::size_t>& select_rows = split.val.empty() ? split.train : split.val;
  Rng search(derive_seed(cfg.seed, 0x53524348));  // "SRCH"
  const double zero_bias[] = {0.0};

  ProbeResult best;
  best.task = task;
  best.metric = MetricKind::kRSquared;
  best.validation_value = -std::numeric_limits<double>::infinity();
  ProbeNet best_net;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const ProbeHyperparams hp = draw_hyperparams(cfg, search);
    Rng rng(derive_seed(cfg.seed, 0x50524f42ULL + trial));  // "PROB"
    ProbeNet net = make_net(features.cols(), 1, hp, rng, zero_bias);
    fit(net, x_train, y_train, ProbeLoss::kSquared, hp, cfg, rng);
    const auto sel_truth = truth(select_rows);
    double score = -std::numeric_limits<double>::infinity();
    try {
      score = r_squared(sel_truth, predictions(net, select_rows));
    } catch (const Error&) {
      // Constant validation targets: fall back to negative MSE for selection.
      const auto pred = predictions(net, select_rows);
      double mse = 0.0;
      for (std::size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - sel_truth[i]) * (pred[i] - sel_truth[i]);
      score = -mse;
    }
    if (score > best.validation_value) {
      best.validation_value = score;
      best.chosen = hp;
      best_net = std::move(net);
    }
  }
  best.value = r_squared(truth(split.test), predictions(best_net, split.test));
  return best;
}

ProbeResult probe_regression(const Matrix& features, std::span<const double> targets,
                             const ProbeConfig& cfg, const std::string& task) {
  return probe_regression(features, targets, make_split(targets.size(), cfg), cfg, task);
}

ProbeResult probe_classification(const Matrix& features, std::span<const std::size_t> labels,
                                 const ProbeSplit& split, const ProbeConfig& cfg,
                                 const std::string& task) {
  cfg.validate();
  if (features.rows() != labels.size()) {
    fail(ErrorCode::kShape, "probe_classification: feature rows and label count differ");
  }
  check_split(split, labels.size());
  std::size_t n_classes = 0;
  for (std::size_t l : labels) n_classes = std::max(n_classes, l + 1);
  std::set<std::size_t> train_classes;
  for (std::size_t i : split.train) train_classes.insert(labels[i]);
  if (train_classes.size() < 2) {
    fail(ErrorCode::kData, "probe_classification: training split needs at least two classes");
  }
  ProbeResult best;
  best.task = task;
  best.metric = MetricKind::kAccuracy;
  for (std::size_t i : split.test) {
    if (!train_classes.count(labels[i])) {
      best.warnings.push_back("class " + std::to_string(labels[i]) +
                              " appears in the test split but not in training");
      train_classes.insert(labels[i]);  // warn once per class
    }
  }

  const Standardizer xs = Standardizer::fit(features, split.train);
  const Matrix x_train = xs.apply(features, split.train);
  Matrix y_train(split.train.size(), n_classes);
  std::vector<double> prior(n_classes, 0.0);
  for (std::size_t i = 0; i < split.train.size(); ++i) {
    y_train(i, labels[split.train[i]]) = 1.0;
    prior[labels[split.train[i]]] += 1.0;
  }
  std::vector<double> bias(n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    bias[c] = std::log((prior[c] + 1.0) / static_cast<double>(split.train.size() + n_classes));
  }
  auto labels_of = [&](std::span<const std::size_t> rows) {
    std::vector<std::size_t> out;
    for (std::size_t r : rows) out.push_back(labels[r]);
    return out;
  };

  const std::vector<std::size_t>& select_rows = split.val.empty() ? split.train : split.val;
  Rng search(derive_seed(cfg.seed, 0x53524348));
  best.validation_value = -1.0;
  ProbeNet best_net;
  for (std::size_t trial = 0; trial < cfg.trials; ++trial) {
    const ProbeHyperparams hp = draw_hyperparams(cfg, search);
    Rng rng(derive_seed(cfg.seed, 0x50524f42ULL + trial));
    ProbeNet net = make_net(features.cols(), n_classes, hp, rng, bias);
    fit(net, x_train, y_train, ProbeLoss::kSoftmax, hp, cfg, rng);
    const double score =
        accuracy(mlp_forward(net.net, xs.apply(features, select_rows)), labels_of(select_rows));
    if (score > best.validation_value) {
      best.validation_value = score;
      best.chosen = hp;
      best_net = std::move(net);
    }
  }
  best.value = accuracy(mlp_forward(best_net.net, xs.apply(features, split.test)), labels_of(split.test));
  return best;
}

ProbeResult probe_classification(const Matrix& features, std::span<const std::size_t> labels,
                                 const ProbeConfig& cfg, const std::string& task) {
  return probe_classification(features, labels, make_split(labels.size(), cfg), cfg, task);
}

}  // namespace geoconcept
