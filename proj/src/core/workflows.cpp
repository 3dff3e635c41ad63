#include "workflows.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "error.hpp"
#include "inference.hpp"
#include "interpret.hpp"
#include "probe.hpp"
#include "synthworld.hpp"
#include "trainer.hpp"

namespace geoconcept {

const char* code_version() { return GEOCONCEPT_VERSION; }

namespace {

void prepare_dir(const fs::path& dir) {
  if (dir.empty()) fail(ErrorCode::kUsage, "an output directory is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::kIo, dir.string() + ": " + ec.message());
}

void write_stamp(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                 std::uint64_t seed, WorkflowReport& report) {
  const Json stamp{{"command", command},
                   {"config_hash", hex64(config_hash(cfg))},
                   {"seed", seed},
                   {"code_version", code_version()}};
  write_file_atomic(dir / "stamp.json", stamp.dump(2) + "\n");
  write_file_atomic(dir / "config.json", run_config_to_json(cfg).dump(2) + "\n");
  report.outputs.push_back(dir / "stamp.json");
  report.outputs.push_back(dir / "config.json");
}

void write_table(const CsvTable& t, const fs::path& path, WorkflowReport& report) {
  t.write(path);
  report.outputs.push_back(path);
}

ImageDataset load_dataset(const fs::path& prefix, bool need_locations) {
  EmbeddingBundle b = read_embeddings(prefix);
  if (b.manifest.kind == ManifestKind::kConceptSet || b.manifest.kind == ManifestKind::kCheckpoint) {
    fail(ErrorCode::kValidation, manifest_path(prefix).string() + ": expected image embeddings, found " +
                                     manifest_kind_name(b.manifest.kind));
  }
  if (need_locations && !b.manifest.has_locations()) {
    fail(ErrorCode::kData, manifest_path(prefix).string() + ": lat/lon are required for this command");
  }
  ImageDataset ds;
  ds.ids = b.manifest.ids;
  ds.vectors = std::move(b.matrix);
  for (std::size_t i = 0; i < ds.ids.size(); ++i) {
    if (b.manifest.has_locations()) ds.locations.emplace_back(b.manifest.locations[i]);
    else ds.locations.emplace_back(std::nullopt);
  }
  return ds;
}

void require_dim(const ModelState& model, const ImageDataset& ds, const fs::path& prefix) {
  if (ds.size() > 0 && ds.dim() != model.dim()) {
    fail(ErrorCode::kShape, prefix.string() + ": embeddings have " + std::to_string(ds.dim()) +
                                " dims, model expects " + std::to_string(model.dim()));
  }
}

ConceptSet select_concepts(const ConceptSet& all, const std::vector<std::string>& names) {
  if (names.empty()) return all;
  std::vector<std::size_t> selected;
  for (const auto& n : names) {
    const auto idx = all.find(n);
    if (!idx) fail(ErrorCode::kValidation, "concepts.selected names unknown concept '" + n + "'");
    selected.push_back(*idx);
  }
  return ConceptSet(all.names(), all.embeddings(), selected, false);
}

}  // namespace

WorkflowReport run_simulate(const RunConfig& cfg, const SimulateRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const SyntheticWorld world = generate(cfg.world);
  report.warnings = world.warnings;

  Manifest concepts;
  concepts.kind = ManifestKind::kConceptSet;
  concepts.ids = world.concept_names;
  concepts.dim = world.spec.dim;
  concepts.source = "synthetic world seed " + std::to_string(world.spec.seed);
  concepts.model = "synthworld";
  write_embeddings(req.out_dir / "concepts", transpose(world.concept_embeddings), concepts);
  report.outputs.push_back(gemb_path(req.out_dir / "concepts"));

  auto write_split = [&](const std::vector<SyntheticSample>& samples, const std::string& name) {
    const ImageDataset ds = to_dataset(samples, name);
    Manifest m;
    m.kind = ManifestKind::kImageEmbeddings;
    m.ids = ds.ids;
    m.dim = world.spec.dim;
    for (const auto& s : samples) m.locations.push_back(s.location);
    m.source = concepts.source;
    m.model = "synthworld";
    write_embeddings(req.out_dir / name, ds.vectors, m);
    report.outputs.push_back(gemb_path(req.out_dir / name));

    std::vector<std::string> header{"id", "lat", "lon"};
    for (const auto& n : world.concept_names) header.push_back(n);
    CsvTable truth(header);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      std::vector<std::string> row{ds.ids[i], format_double(samples[i].location.lat),
                                   format_double(samples[i].location.lon)};
      for (double w : samples[i].true_intensities) row.push_back(format_double(w));
      truth.add_row(std::move(row));
    }
    write_table(truth, req.out_dir / (name + "_intensities.csv"), report);
  };
  write_split(world.train, "train");
  write_split(world.test, "test");
  write_stamp(req.out_dir, "simulate", cfg, cfg.world.seed, report);
  report.messages.push_back("wrote " + std::to_string(world.train.size()) + " train and " +
                            std::to_string(world.test.size()) + " test samples, " +
                            std::to_string(world.concept_names.size()) + " concepts");
  return report;
}

WorkflowReport run_train(const RunConfig& cfg, const TrainRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const ImageDataset data = load_dataset(req.data, true);

  ModelState state;
  if (req.resume) {
    state = load_checkpoint(*req.resume);
    state.config.epochs = cfg.train.epochs;
    report.messages.push_back("resuming from step " + std::to_string(state.step));
  } else {
    const ConceptSet all = load_concept_set(manifest_path(req.concepts), gemb_path(req.concepts));
    state = initialize_model(select_concepts(all, cfg.concepts), cfg.model, cfg.train);
  }
  require_dim(state, data, req.data);

  TrainOptions options;
  options.stop_at_step = req.stop_at_step;
  TrainResult result = train(data, std::move(state), options);
  report.warnings = result.warnings;

  const fs::path ckpt = req.out_dir / "checkpoint.gckp";
  save_checkpoint(result.state, ckpt);
  report.outputs.push_back(ckpt);
  write_table(result.record.to_csv(), req.out_dir / "train_log.csv", report);
  write_stamp(req.out_dir, "train", cfg, result.state.config.seed, report);
  if (!result.record.steps.empty()) {
    const auto& first = result.record.steps.front();
    const auto& last = result.record.steps.back();
    report.messages.push_back("steps " + std::to_string(first.step) + ".." + std::to_string(last.step) +
                              ": loss " + format_double(first.total) + " -> " + format_double(last.total));
  } else {
    report.messages.push_back("no optimization steps taken");
  }
  return report;
}

WorkflowReport run_eval(const RunConfig& cfg, const EvalRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const ModelState model = load_checkpoint(req.checkpoint);
  const ImageDataset test = load_dataset(req.test, true);
  require_dim(model, test, req.test);
  const ThresholdSpec spec(cfg.eval.thresholds_km);

  std::vector<GeoCoordinate> coords;
  if (req.gallery) {
    const Manifest g = read_manifest(manifest_path(*req.gallery));
    if (!g.has_locations()) fail(ErrorCode::kData, "gallery manifest carries no lat/lon");
    coords = g.locations;
  } else {
    std::vector<GeoCoordinate> train_coords;
    if (req.train && cfg.gallery.include_train) {
      const Manifest t = read_manifest(manifest_path(*req.train));
      if (!t.has_locations()) fail(ErrorCode::kData, "training manifest carries no lat/lon");
      train_coords = t.locations;
    }
    if (train_coords.empty() && cfg.gallery.grid_deg == 0.0) {
      fail(ErrorCode::kUsage, "no gallery source: pass --gallery or --train, or set gallery.grid_deg");
    }
    coords = default_gallery_coordinates(train_coords, cfg.gallery.grid_deg);
  }
  const LocationGallery gallery = build_gallery(model, coords);

  // Rows sharing a view_of entry are views of one image, in order of first
  // appearance; without view_of every row is its own image.
  const std::vector<std::string> groups = read_manifest(manifest_path(req.test)).view_of;
  std::vector<TestItem> items;
  std::map<std::string, std::size_t> slot;
  std::vector<std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string& key = groups.empty() ? test.ids[i] : groups[i];
    auto [it, fresh] = slot.emplace(key, items.size());
    if (fresh) {
      items.push_back({key, Matrix(), *test.locations[i]});
      rows.emplace_back();
    } else if (!(items[it->second].truth == *test.locations[i])) {
      fail(ErrorCode::kData, "views of '" + key + "' disagree on lat/lon");
    }
    rows[it->second].push_back(i);
  }
  for (std::size_t t = 0; t < items.size(); ++t) {
    items[t].views = Matrix(rows[t].size(), test.dim());
    for (std::size_t v = 0; v < rows[t].size(); ++v) {
      const auto src = test.vectors.row(rows[t][v]);
      std::copy(src.begin(), src.end(), items[t].views.row(v).begin());
    }
  }
  if (items.empty()) fail(ErrorCode::kData, "test set is empty");
  const EvalResult result = evaluate(model, gallery, items, spec);

  std::vector<GeoCoordinate> truths;
  for (const auto& it : items) truths.push_back(it.truth);
  CsvTable summary({"threshold_km", "accuracy", "random_baseline"});
  for (std::size_t i = 0; i < result.thresholds_km.size(); ++i) {
    summary.add_row({format_double(result.thresholds_km[i]), format_double(result.fractions[i]),
                     format_double(random_gallery_baseline(gallery.coordinates, truths,
                                                           result.thresholds_km[i]))});
  }
  write_table(summary, req.out_dir / "eval_summary.csv", report);

  CsvTable per_item({"id", "true_lat", "true_lon", "pred_lat", "pred_lon", "error_km", "similarity"});
  for (const auto& it : result.items) {
    per_item.add_row({it.id, format_double(it.truth.lat), format_double(it.truth.lon),
                      format_double(it.prediction.coordinate.lat),
                      format_double(it.prediction.coordinate.lon),
                      format_double(it.prediction.error_km.value_or(0.0)),
                      format_double(it.prediction.similarity)});
  }
  write_table(per_item, req.out_dir / "eval_items.csv", report);
  write_stamp(req.out_dir, "eval", cfg, model.config.seed, report);
  report.fractions = result.fractions;
  report.messages.push_back(std::to_string(items.size()) + " images against a gallery of " +
                            std::to_string(gallery.size()) + " locations");
  return report;
}

WorkflowReport run_explain(const RunConfig& cfg, const ExplainRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const ModelState model = load_checkpoint(req.checkpoint);
  const ImageDataset data = load_dataset(req.embeddings, false);
  require_dim(model, data, req.embeddings);

  std::map<std::string, std::pair<GeoCoordinate, double>> errors;
  if (req.errors) {
    const CsvData csv = read_csv(*req.errors);
    const std::size_t id = csv.column("id");
    const std::size_t lat = csv.column("pred_lat");
    const std::size_t lon = csv.column("pred_lon");
    const std::size_t err = csv.column("error_km");
    for (const auto& row : csv.rows) {
      errors[row.at(id)] = {GeoCoordinate::make(parse_double(row.at(lat), "pred_lat"),
                                                parse_double(row.at(lon), "pred_lon")),
                            parse_double(row.at(err), "error_km")};
    }
  }

  std::vector<Explanation> explanations;
  std::vector<double> explained_errors;
  std::vector<Explanation> with_errors;
  CsvTable table({"id", "rank", "concept", "score"});
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::optional<Prediction> pred;
    const auto hit = errors.find(data.ids[i]);
    if (hit != errors.end()) {
      pred = Prediction{hit->second.first, 0, 0.0, hit->second.second};
    }
    Explanation e = explain(model, data.ids[i], data.vectors.row(i), pred, cfg.interpret.k_top);
    if (i == 0) report.warnings.insert(report.warnings.end(), e.warnings.begin(), e.warnings.end());
    for (std::size_t r = 0; r < e.top.size(); ++r) {
      table.add_row({e.image_id, std::to_string(r + 1), e.top[r].name, format_double(e.top[r].score)});
    }
    if (hit != errors.end()) {
      with_errors.push_back(e);
      explained_errors.push_back(hit->second.second);
    }
    explanations.push_back(std::move(e));
  }
  write_table(table, req.out_dir / "explanations.csv", report);

  // Concept activations for external projection tools.
  const Matrix z = image_concepts(model, data.vectors);
  Manifest am;
  am.kind = ManifestKind::kImageEmbeddings;
  am.ids = data.ids;
  am.dim = model.k();
  for (const auto& loc : data.locations) {
    if (loc) am.locations.push_back(*loc);
  }
  if (am.locations.size() != am.ids.size()) am.locations.clear();
  am.source = "concept activations of " + manifest_path(req.embeddings).filename().string();
  am.model = "geoconcept " + std::string(code_version());
  write_embeddings(req.out_dir / "activations", z, am);
  report.outputs.push_back(gemb_path(req.out_dir / "activations"));

  if (data.size() > 0) {
    std::size_t k = std::min(cfg.interpret.clusters, data.size());
    if (k != cfg.interpret.clusters) {
      report.warnings.push_back("clusters reduced to " + std::to_string(k) + " (dataset size)");
    }
    const KMeansResult km = kmeans(z, k, model.config.seed, cfg.interpret.kmeans_max_iter);
    CsvTable clusters({"id", "cluster"});
    for (std::size_t i = 0; i < data.size(); ++i) {
      clusters.add_row({data.ids[i], std::to_string(km.assignments[i])});
    }
    write_table(clusters, req.out_dir / "clusters.csv", report);
  }

  if (req.errors) {
    const InfluenceTable inf =
        influence_table(with_errors, explained_errors, cfg.interpret.min_support, cfg.interpret.table_n);
    CsvTable all({"bin", "concept", "median", "support"});
    CsvTable ranked({"bin", "list", "rank", "concept", "median"});
    for (const auto& b : inf.bins) {
      const std::string label(error_bin_label(b.bin));
      for (const auto& e : b.entries) {
        all.add_row({label, e.concept_name, format_double(e.median), std::to_string(e.support)});
      }
      for (std::size_t r = 0; r < b.top.size(); ++r) {
        ranked.add_row({label, "top", std::to_string(r + 1), b.top[r].concept_name, format_double(b.top[r].median)});
      }
      for (std::size_t r = 0; r < b.lowest.size(); ++r) {
        ranked.add_row({label, "lowest", std::to_string(r + 1), b.lowest[r].concept_name,
                        format_double(b.lowest[r].median)});
      }
    }
    write_table(all, req.out_dir / "influence.csv", report);
    write_table(ranked, req.out_dir / "influence_ranked.csv", report);
    report.warnings.insert(report.warnings.end(), inf.notices.begin(), inf.notices.end());
  }

  if (req.labels) {
    const CsvData csv = read_csv(*req.labels);
    const std::size_t id = csv.column("id");
    const std::size_t lab = csv.column("label");
    std::map<std::string, std::string> label_of;
    for (const auto& row : csv.rows) label_of[row.at(id)] = row.at(lab);
    std::map<std::string, std::vector<Explanation>> groups;
    std::vector<std::string> row_labels;
    std::vector<std::size_t> rows_with_label;
    for (std::size_t i = 0; i < explanations.size(); ++i) {
      const auto it = label_of.find(explanations[i].image_id);
      if (it == label_of.end()) continue;
      groups[it->second].push_back(explanations[i]);
      row_labels.push_back(it->second);
      rows_with_label.push_back(i);
    }
    const ClassDifferential diff = class_differential(groups);
    CsvTable sankey({"class", "concept", "weight"});
    for (const auto& d : diff.top(cfg.interpret.sankey_top)) {
      sankey.add_row({d.label, d.concept_name, format_double(d.differential)});
    }
    write_table(sankey, req.out_dir / "sankey.csv", report);

    std::vector<std::size_t> class_ids;
    for (const auto& l : row_labels) {
      class_ids.push_back(static_cast<std::size_t>(
          std::distance(diff.labels.begin(), std::find(diff.labels.begin(), diff.labels.end(), l))));
    }
    Matrix sparse(rows_with_label.size(), model.k());
    for (std::size_t r = 0; r < rows_with_label.size(); ++r) {
      const auto& s = explanations[rows_with_label[r]].sparse;
      std::copy(s.begin(), s.end(), sparse.row(r).begin());
    }
    const ContributionResult contrib = linear_probe_contributions(sparse, class_ids);
    const auto names = model.concepts.selected_names();
    CsvTable ct({"class", "concept", "contribution"});
    for (std::size_t c = 0; c < contrib.classes.size(); ++c) {
      for (std::size_t j = 0; j < names.size(); ++j) {
        ct.add_row({diff.labels[contrib.classes[c]], names[j], format_double(contrib.contributions(c, j))});
      }
    }
    write_table(ct, req.out_dir / "contributions.csv", report);
  }
  write_stamp(req.out_dir, "explain", cfg, model.config.seed, report);
  report.messages.push_back("explained " + std::to_string(explanations.size()) + " images");
  return report;
}

WorkflowReport run_map(const RunConfig& cfg, const MapRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const ModelState model = load_checkpoint(req.checkpoint);
  std::vector<GeoCoordinate> points;
  std::vector<std::string> regions;
  if (req.points) {
    const CsvData csv = read_csv(*req.points);
    const std::size_t lat = csv.column("lat");
    const std::size_t lon = csv.column("lon");
    const auto region_col = std::find(csv.header.begin(), csv.header.end(), "region");
    for (const auto& row : csv.rows) {
      points.push_back(GeoCoordinate::make(parse_double(row.at(lat), "lat"), parse_double(row.at(lon), "lon")));
      if (region_col != csv.header.end()) {
        regions.push_back(row.at(static_cast<std::size_t>(region_col - csv.header.begin())));
      }
    }
  } else {
    points = sphere_grid(req.grid_deg);
  }
  const ConceptMap map = concept_map(model, req.concept_name, points, regions, req.use_basis);
  std::vector<std::string> header{"lat", "lon", "similarity"};
  if (!regions.empty()) header.push_back("region");
  CsvTable table(header);
  for (const auto& p : map.points) {
    std::vector<std::string> row{format_double(p.location.lat), format_double(p.location.lon),
                                 format_double(p.similarity)};
    if (p.region) row.push_back(*p.region);
    table.add_row(std::move(row));
  }
  write_table(table, req.out_dir / "map.csv", report);
  if (!map.region_means.empty()) {
    CsvTable rt({"region", "mean_similarity"});
    for (const auto& [r, m] : map.region_means) rt.add_row({r, format_double(m)});
    write_table(rt, req.out_dir / "map_regions.csv", report);
  }
  write_stamp(req.out_dir, "map", cfg, model.config.seed, report);
  report.messages.push_back("mapped '" + req.concept_name + "' at " + std::to_string(points.size()) + " points");
  return report;
}

ProbeFeatures probe_features_from_name(const std::string& name) {
  if (name == "image") return ProbeFeatures::kImage;
  if (name == "location") return ProbeFeatures::kLocation;
  if (name == "fused") return ProbeFeatures::kFused;
  fail(ErrorCode::kUsage, "unknown probe features '" + name + "' (image, location, fused)");
}

WorkflowReport run_probe(const RunConfig& cfg, const ProbeRequest& req) {
  prepare_dir(req.out_dir);
  WorkflowReport report;
  const ModelState model = load_checkpoint(req.checkpoint);
  const bool need_loc = req.features != ProbeFeatures::kImage;
  const ImageDataset data = load_dataset(req.embeddings, need_loc);
  require_dim(model, data, req.embeddings);

  std::map<std::string, std::size_t> row_of;
  for (std::size_t i = 0; i < data.size(); ++i) row_of.emplace(data.ids[i], i);
  const CsvData csv = read_csv(req.task);
  const std::size_t id_col = csv.column("id");
  const std::size_t target_col = csv.column(req.target_column);
  std::vector<std::size_t> rows;
  std::vector<std::string> targets;
  for (const auto& row : csv.rows) {
    const auto it = row_of.find(row.at(id_col));
    if (it == row_of.end()) fail(ErrorCode::kData, "task id '" + row.at(id_col) + "' has no embedding");
    rows.push_back(it->second);
    targets.push_back(row.at(target_col));
  }
  if (rows.empty()) fail(ErrorCode::kData, "probe task is empty");

  Matrix x_img(rows.size(), data.dim());
  std::vector<GeoCoordinate> locs;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto src = data.vectors.row(rows[r]);
    std::copy(src.begin(), src.end(), x_img.row(r).begin());
    if (need_loc) locs.push_back(*data.locations[rows[r]]);
  }
  Matrix features;
  const Matrix z_img = req.features != ProbeFeatures::kLocation ? image_concepts(model, x_img) : Matrix();
  const Matrix x_loc = need_loc ? encode_locations(model.params.location_encoder, locs) : Matrix();
  switch (req.features) {
    case ProbeFeatures::kImage: features = z_img; break;
    case ProbeFeatures::kLocation: features = x_loc; break;
    case ProbeFeatures::kFused: features = concat_features(z_img, x_loc); break;
  }

  ProbeResult result;
  const std::string task = req.task.stem().string();
  if (req.classification) {
    std::set<std::string> distinct(targets.begin(), targets.end());
    const std::vector<std::string> classes(distinct.begin(), distinct.end());
    std::vector<std::size_t> labels;
    for (const auto& t : targets) {
      labels.push_back(static_cast<std::size_t>(std::lower_bound(classes.begin(), classes.end(), t) - classes.begin()));
    }
    result = probe_classification(features, labels, cfg.probe, task);
  } else {
    std::vector<double> values;
    for (const auto& t : targets) values.push_back(parse_double(t, req.target_column));
    result = probe_regression(features, values, cfg.probe, task);
  }
  report.warnings = result.warnings;
  CsvTable table({"task", "metric", "value", "validation", "lr", "depth", "width"});
  table.add_row({result.task, metric_kind_name(result.metric), format_double(result.value),
                 format_double(result.validation_value), format_double(result.chosen.lr),
                 std::to_string(result.chosen.depth), std::to_string(result.chosen.width)});
  write_table(table, req.out_dir / "probe.csv", report);
  write_stamp(req.out_dir, "probe", cfg, cfg.probe.seed, report);
  report.messages.push_back(std::string(metric_kind_name(result.metric)) + " " + format_double(result.value));
  return report;
}

WorkflowReport run_export_template(const TemplateRequest& req) {
  if (req.out_prefix.empty()) fail(ErrorCode::kUsage, "an output prefix is required");
  if (req.dim == 0) fail(ErrorCode::kUsage, "template dim must be positive");
  WorkflowReport report;
  Manifest m;
  m.kind = req.kind;
  m.dim = req.dim;
  m.source = "template: fill ids (or names), optional lat/lon, and a matching GEMB payload";
  m.model = "unspecified";
  write_embeddings(req.out_prefix, Matrix(0, req.dim), m);
  report.outputs.push_back(gemb_path(req.out_prefix));
  report.outputs.push_back(manifest_path(req.out_prefix));
  report.messages.push_back("wrote an empty " + std::string(manifest_kind_name(req.kind)) + " pair");
  return report;
}

}  // namespace geoconcept
