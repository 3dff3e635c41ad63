// Command-line front end. Everything goes through the C interface.
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "geoconcept/geoconcept.h"

namespace {

struct Failure {
  gc_status status;
};

void check(gc_status st) {
  if (st != GC_OK) throw Failure{st};
}

const char* opt(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

void print_report(gc_report* r) {
  for (size_t i = 0; i < gc_report_warning_count(r); ++i) {
    std::cerr << "warning: " << gc_report_warning(r, i) << "\n";
  }
  for (size_t i = 0; i < gc_report_message_count(r); ++i) std::cout << gc_report_message(r, i) << "\n";
  for (size_t i = 0; i < gc_report_output_count(r); ++i) std::cout << "wrote " << gc_report_output(r, i) << "\n";
}

// "1,25,200" -> "[1,25,200]" for the config layer.
std::string json_list(const std::string& csv) {
  std::string out = "[";
  std::stringstream in(csv);
  std::string item;
  bool first = true;
  while (std::getline(in, item, ',')) {
    if (!first) out += ",";
    out += item;
    first = false;
  }
  return out + "]";
}

std::string number(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

// Top-level options plus every subcommand's flags, whatever was parsed.
// App::help() would delegate to the parsed subcommand, so call the formatter.
std::string full_usage(const CLI::App& app) {
  std::string text = app.get_formatter()->make_help(&app, "geoconcept", CLI::AppFormatMode::Normal);
  for (const CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    text += "\n" + sub->get_formatter()->make_help(sub, "geoconcept " + sub->get_name(), CLI::AppFormatMode::Normal);
  }
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoconcept: concept-aware image/GPS alignment toolkit"};
  app.set_version_flag("--version", gc_version());
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "JSON run configuration (overlaid on defaults)")->check(CLI::ExistingFile);
  app.add_option("--set", sets, "Override a config key, e.g. --set train.batch_size=32 (repeatable)");

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic world as GEMB + manifest files");
  std::string sim_out;
  std::optional<std::uint64_t> sim_seed;
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--seed", sim_seed, "World seed (world.seed)");

  auto* tr = app.add_subcommand("train", "Train the alignment model");
  std::string tr_concepts, tr_data, tr_out, tr_resume;
  std::optional<std::size_t> tr_epochs, tr_batch;
  std::optional<std::uint64_t> tr_seed;
  std::optional<double> tr_lambda;
  std::int64_t tr_stop = -1;
  tr->add_option("--concepts", tr_concepts, "Concept set prefix (<prefix>.gemb + <prefix>.json)");
  tr->add_option("--data", tr_data, "Training image embeddings prefix with lat/lon")->required();
  tr->add_option("--out", tr_out, "Output directory")->required();
  tr->add_option("--resume", tr_resume, "Continue from this checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--stop-at-step", tr_stop, "Stop once the global step reaches N");
  tr->add_option("--epochs", tr_epochs, "Epochs (train.epochs)");
  tr->add_option("--batch-size", tr_batch, "Batch size (train.batch_size)");
  tr->add_option("--seed", tr_seed, "Training seed (train.seed)");
  tr->add_option("--lambda", tr_lambda, "Divergence weight (loss.lambda); 0 disables the module");

  auto* ev = app.add_subcommand("eval", "Retrieval geo-localization at distance thresholds");
  std::string ev_ckpt, ev_test, ev_out, ev_gallery, ev_train, ev_thresholds;
  ev->add_option("--checkpoint", ev_ckpt, "Trained checkpoint")->required();
  ev->add_option("--test", ev_test, "Test embeddings prefix with lat/lon; rows sharing a view_of entry are views of one image")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--gallery", ev_gallery, "Manifest prefix whose lat/lon form the gallery");
  ev->add_option("--train", ev_train, "Training prefix whose coordinates join the gallery");
  ev->add_option("--thresholds", ev_thresholds, "Comma-separated km thresholds (default 1,25,200,750,2500)");

  auto* ex = app.add_subcommand("explain", "Concept explanations, influence tables, clusters, Sankey edges");
  std::string ex_ckpt, ex_emb, ex_out, ex_errors, ex_labels;
  std::optional<std::size_t> ex_top;
  ex->add_option("--checkpoint", ex_ckpt, "Trained checkpoint")->required();
  ex->add_option("--embeddings", ex_emb, "Image embeddings prefix")->required();
  ex->add_option("--out", ex_out, "Output directory")->required();
  ex->add_option("--errors", ex_errors, "eval_items.csv for the influence table")->check(CLI::ExistingFile);
  ex->add_option("--labels", ex_labels, "CSV with id,label for class differentials")->check(CLI::ExistingFile);
  ex->add_option("--top-k", ex_top, "Concepts kept per image (interpret.k_top)");

  auto* mp = app.add_subcommand("map", "Similarity map between location embeddings and a concept");
  std::string mp_ckpt, mp_concept, mp_out, mp_points;
  double mp_grid = 5.0;
  bool mp_basis = false;
  mp->add_option("--checkpoint", mp_ckpt, "Trained checkpoint")->required();
  mp->add_option("--concept", mp_concept, "Concept name")->required();
  mp->add_option("--out", mp_out, "Output directory")->required();
  mp->add_option("--points", mp_points, "CSV with lat,lon[,region]")->check(CLI::ExistingFile);
  mp->add_option("--grid", mp_grid, "Grid resolution in degrees when no points are given");
  mp->add_flag("--use-basis", mp_basis, "Compare against the learned basis column instead of the text embedding");

  auto* pr = app.add_subcommand("probe", "Downstream MLP probe on frozen model features");
  std::string pr_ckpt, pr_emb, pr_task, pr_out, pr_target = "target", pr_features = "image";
  bool pr_class = false;
  pr->add_option("--checkpoint", pr_ckpt, "Trained checkpoint")->required();
  pr->add_option("--embeddings", pr_emb, "Image embeddings prefix")->required();
  pr->add_option("--task", pr_task, "CSV with id and target columns")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Output directory")->required();
  pr->add_option("--target", pr_target, "Target column name");
  pr->add_flag("--classification", pr_class, "Treat targets as class labels (accuracy) instead of values (R^2)");
  pr->add_option("--features", pr_features, "image, location or fused")
      ->check(CLI::IsMember({"image", "location", "fused"}));

  auto* tp = app.add_subcommand("export-embeddings-template", "Write an empty GEMB + manifest pair");
  std::string tp_out, tp_kind = "image_embeddings";
  std::size_t tp_dim = 512;
  tp->add_option("--out", tp_out, "Output prefix")->required();
  tp->add_option("--kind", tp_kind, "Manifest kind")
      ->check(CLI::IsMember({"image_embeddings", "concept_set", "gallery", "checkpoint"}));
  tp->add_option("--dim", tp_dim, "Embedding width");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << full_usage(app);
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << full_usage(app);
    return 0;
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << full_usage(app);
    return 1;
  }

  gc_config* cfg = nullptr;
  gc_report* report = nullptr;
  int code = 0;
  try {
    check(config_path.empty() ? gc_config_create(&cfg) : gc_config_load(config_path.c_str(), &cfg));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        std::cerr << "error: --set expects key=value, got '" << kv << "'\n";
        gc_config_free(cfg);
        return 1;
      }
      check(gc_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
    auto set = [&](const char* key, const std::string& value) { check(gc_config_set(cfg, key, value.c_str())); };

    if (sim->parsed()) {
      if (sim_seed) set("world.seed", std::to_string(*sim_seed));
      check(gc_simulate(cfg, sim_out.c_str(), &report));
    } else if (tr->parsed()) {
      if (tr_epochs) set("train.epochs", std::to_string(*tr_epochs));
      if (tr_batch) set("train.batch_size", std::to_string(*tr_batch));
      if (tr_seed) set("train.seed", std::to_string(*tr_seed));
      if (tr_lambda) set("loss.lambda", number(*tr_lambda));
      const gc_train_args args{opt(tr_concepts), tr_data.c_str(), tr_out.c_str(), opt(tr_resume), tr_stop};
      check(gc_train(cfg, &args, &report));
    } else if (ev->parsed()) {
      if (!ev_thresholds.empty()) set("eval.thresholds_km", json_list(ev_thresholds));
      const gc_eval_args args{ev_ckpt.c_str(), ev_test.c_str(), ev_out.c_str(), opt(ev_gallery), opt(ev_train)};
      check(gc_eval(cfg, &args, &report));
    } else if (ex->parsed()) {
      if (ex_top) set("interpret.k_top", std::to_string(*ex_top));
      const gc_explain_args args{ex_ckpt.c_str(), ex_emb.c_str(), ex_out.c_str(), opt(ex_errors), opt(ex_labels)};
      check(gc_explain(cfg, &args, &report));
    } else if (mp->parsed()) {
      const gc_map_args args{mp_ckpt.c_str(), mp_concept.c_str(), mp_out.c_str(), opt(mp_points), mp_grid,
                             mp_basis ? 1 : 0};
      check(gc_map(cfg, &args, &report));
    } else if (pr->parsed()) {
      const gc_probe_args args{pr_ckpt.c_str(), pr_emb.c_str(), pr_task.c_str(), pr_out.c_str(),
                               pr_target.c_str(), pr_class ? 1 : 0, pr_features.c_str()};
      check(gc_probe(cfg, &args, &report));
    } else if (tp->parsed()) {
      check(gc_export_template(tp_out.c_str(), tp_kind.c_str(), tp_dim, &report));
    }
    print_report(report);
    if (ev->parsed()) {
      // One line, one fraction per threshold.
      for (size_t i = 0; i < gc_report_fraction_count(report); ++i) {
        std::printf(i == 0 ? "%.6f" : " %.6f", gc_report_fraction(report, i));
      }
      std::printf("\n");
    }
  } catch (const Failure& f) {
    std::cerr << "error (" << gc_status_name(f.status) << "): " << gc_last_error() << "\n";
    if (f.status == GC_ERR_USAGE) std::cerr << "\n" << full_usage(app);
    code = gc_status_exit_code(f.status);
  }
  gc_report_free(report);
  gc_config_free(cfg);
  return code;
}
