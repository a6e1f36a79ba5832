#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "smallarea/smallarea.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Failure {
  sa_status status;
};

void check(sa_status status) {
  if (status != SA_OK) throw Failure{status};
}

struct Dataset {
  sa_dataset* ptr = nullptr;
  ~Dataset() { sa_dataset_free(ptr); }
};

struct Predictions {
  sa_predictions* ptr = nullptr;
  ~Predictions() { sa_predictions_free(ptr); }
};

struct Options {
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::string in;
  std::string config;
  std::string tracts, shelters, shares, predictions;
  std::string ambiguity = "drop";
  std::string usol = "subgroup";
  std::size_t trees = 0, mtry = 0, min_node = 0, threads = 1;
  std::int64_t total_sample = 299;
  std::size_t draws = 500;
  std::vector<std::size_t> sizes;
  std::vector<std::string> exclude_strata;
  bool include_seed_tract = false;
};

std::string input_path(const Options& o, const std::string& override_path, const char* name) {
  if (!override_path.empty()) return override_path;
  return (fs::path(o.in.empty() ? o.out : o.in) / name).string();
}

std::string output_path(const Options& o, const char* name) { return (fs::path(o.out) / name).string(); }

std::uint64_t require_seed(const Options& o, const std::string& command) {
  if (!o.seed) throw std::invalid_argument(command + " requires --seed");
  return *o.seed;
}

sa_ambiguity_policy ambiguity(const Options& o) {
  return o.ambiguity == "zero" ? SA_AMBIGUITY_ZERO : SA_AMBIGUITY_DROP;
}

void make_out_dir(const Options& o) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw std::runtime_error("cannot create '" + o.out + "': " + ec.message());
}

void load_dataset(const Options& o, Dataset& ds, bool with_shelters, bool with_shares, json& record) {
  const auto tracts = input_path(o, o.tracts, "tracts.csv");
  const auto shelters = input_path(o, o.shelters, "shelters.csv");
  const auto shares = input_path(o, o.shares, "city_shares.csv");
  record["inputs"]["tracts"] = tracts;
  if (with_shelters) record["inputs"]["shelters"] = shelters;
  if (with_shares) record["inputs"]["city_shares"] = shares;
  record["ambiguity"] = o.ambiguity;
  check(sa_dataset_load(tracts.c_str(), with_shelters ? shelters.c_str() : nullptr,
                        with_shares ? shares.c_str() : nullptr, ambiguity(o), &ds.ptr));
}

void load_predictions(const Options& o, Predictions& preds, json& record) {
  const auto path = input_path(o, o.predictions, "predictions.csv");
  record["inputs"]["predictions"] = path;
  check(sa_predictions_load(path.c_str(), &preds.ptr));
}

json run_synth(const Options& o) {
  json r;
  sa_synth_options opts;
  sa_synth_options_init(&opts);
  opts.seed = require_seed(o, "synth");
  opts.total_sample = o.total_sample;
  if (!o.config.empty()) opts.config_path = o.config.c_str();
  r["seed"] = opts.seed;
  r["total_sample"] = o.total_sample;
  if (!o.config.empty()) r["config"] = o.config;
  check(sa_synth_write(&opts, o.out.c_str()));
  r["outputs"] = {"tracts.csv", "shelters.csv", "city_shares.csv", "truth.csv"};
  return r;
}

json run_design(const Options& o) {
  json r;
  const auto seed = require_seed(o, "design");
  Dataset ds;
  load_dataset(o, ds, false, false, r);
  r["seed"] = seed;
  r["total_sample"] = o.total_sample;
  check(sa_design_write(ds.ptr, o.total_sample, seed, output_path(o, "design.csv").c_str()));
  r["outputs"] = {"design.csv"};
  return r;
}

json run_estimate(const Options& o) {
  json r;
  Dataset ds;
  load_dataset(o, ds, true, false, r);
  double total = 0.0, se = 0.0;
  check(sa_estimate_write(ds.ptr, output_path(o, "table1.csv").c_str(), &total, &se));
  if (std::isnan(se)) {
    std::printf("county total: %lld (standard error unavailable)\n", std::llround(total));
  } else {
    std::printf("county total: %lld ± %lld\n", std::llround(total), std::llround(2.0 * se));
  }
  r["outputs"] = {"table1.csv"};
  return r;
}

json run_impute(const Options& o) {
  json r;
  sa_impute_options opts;
  sa_impute_options_init(&opts);
  opts.seed = require_seed(o, "impute");
  opts.n_trees = o.trees;
  opts.mtry = o.mtry;
  opts.min_node_size = o.min_node;
  opts.n_threads = o.threads;
  if (!o.config.empty()) opts.model_config_path = o.config.c_str();
  Dataset ds;
  load_dataset(o, ds, false, false, r);
  r["seed"] = opts.seed;
  if (!o.config.empty()) r["config"] = o.config;
  r["trees"] = o.trees;
  r["mtry"] = o.mtry;
  r["min_node"] = o.min_node;
  Predictions preds;
  check(sa_impute(ds.ptr, &opts, &preds.ptr));
  check(sa_predictions_write(preds.ptr, output_path(o, "predictions.csv").c_str()));
  json models = json::array();
  for (std::size_t i = 0; i < sa_predictions_model_count(preds.ptr); ++i) {
    models.push_back(sa_predictions_model_name(preds.ptr, i));
  }
  r["models"] = models;
  r["outputs"] = {"predictions.csv"};
  return r;
}

json run_aggregate(const Options& o) {
  json r;
  Dataset ds;
  load_dataset(o, ds, true, true, r);
  Predictions preds;
  load_predictions(o, preds, r);
  check(sa_aggregate_write(ds.ptr, preds.ptr, output_path(o, "regions.csv").c_str()));
  r["outputs"] = {"regions.csv"};
  return r;
}

json run_validate(const Options& o) {
  json r;
  sa_validate_options opts;
  sa_validate_options_init(&opts);
  opts.seed = require_seed(o, "validate");
  opts.draws = o.draws;
  if (!o.sizes.empty()) {
    opts.sizes = o.sizes.data();
    opts.n_sizes = o.sizes.size();
  }
  std::vector<const char*> excluded;
  for (const auto& s : o.exclude_strata) excluded.push_back(s.c_str());
  opts.excluded_strata = excluded.data();
  opts.n_excluded_strata = excluded.size();
  opts.denominator = o.usol == "all" ? SA_USOL_ALL : SA_USOL_SUBGROUP;
  opts.include_seed_tract = o.include_seed_tract ? 1 : 0;
  Dataset ds;
  load_dataset(o, ds, false, false, r);
  Predictions preds;
  load_predictions(o, preds, r);
  r["seed"] = opts.seed;
  r["draws"] = o.draws;
  r["sizes"] = o.sizes.empty() ? std::vector<std::size_t>{4, 8, 16, 32, 64} : o.sizes;
  r["exclude_strata"] = o.exclude_strata;
  r["usol_denominator"] = o.usol;
  r["include_seed_tract"] = o.include_seed_tract;
  check(sa_validate_write(ds.ptr, preds.ptr, &opts, output_path(o, "table5.csv").c_str()));
  r["outputs"] = {"table5.csv"};
  return r;
}

void write_manifest(const Options& o, const std::string& command, json record) {
  const auto path = fs::path(o.out) / "manifest.json";
  json manifest = json::object();
  if (fs::exists(path)) {
    std::ifstream in(path);
    manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded() || !manifest.is_object()) manifest = json::object();
  }
  manifest["version"] = sa_version();
  record["out"] = o.out;
  manifest["runs"][command] = std::move(record);
  std::ofstream out(path, std::ios::binary);
  out << manifest.dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Small-area count estimation pipeline", "smallarea"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_version_flag("--version", std::string(sa_version()));

  Options o;
  const auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", o.seed, "Random seed"); };
  const auto add_io = [&](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory")->capture_default_str();
    sub->add_option("--in", o.in, "Input directory (default: --out)");
  };
  const auto add_ambiguity = [&](CLI::App* sub) {
    sub->add_option("--ambiguity", o.ambiguity, "Blank counts on sampled tracts")
        ->check(CLI::IsMember({"drop", "zero"}))
        ->capture_default_str();
    sub->add_option("--tracts", o.tracts, "tracts.csv path");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic county");
  add_seed(synth);
  add_io(synth);
  synth->add_option("--config", o.config, "JSON generator settings");
  synth->add_option("--total-sample", o.total_sample, "Stratified sample size")->capture_default_str();

  auto* design = app.add_subcommand("design", "Allocate and draw a stratified sample");
  add_seed(design);
  add_io(design);
  add_ambiguity(design);
  design->add_option("--total-sample", o.total_sample, "Total sample size")->capture_default_str();

  auto* estimate = app.add_subcommand("estimate", "Design-based stratum and county totals");
  add_io(estimate);
  add_ambiguity(estimate);
  estimate->add_option("--shelters", o.shelters, "shelters.csv path");

  auto* impute = app.add_subcommand("impute", "Impute counts for unobserved tracts");
  add_seed(impute);
  add_io(impute);
  add_ambiguity(impute);
  impute->add_option("--config", o.config, "JSON model specification");
  impute->add_option("--trees", o.trees, "Trees per forest (0: configured)");
  impute->add_option("--mtry", o.mtry, "Predictors tried per split (0: configured)");
  impute->add_option("--min-node", o.min_node, "Minimum rows per leaf (0: configured)");
  impute->add_option("--threads", o.threads, "Worker threads")->capture_default_str();

  auto* aggregate = app.add_subcommand("aggregate", "Region totals per model");
  add_io(aggregate);
  add_ambiguity(aggregate);
  aggregate->add_option("--shelters", o.shelters, "shelters.csv path");
  aggregate->add_option("--shares", o.shares, "city_shares.csv path");
  aggregate->add_option("--predictions", o.predictions, "predictions.csv path");

  auto* validate = app.add_subcommand("validate", "Aggregation accuracy study");
  add_seed(validate);
  add_io(validate);
  add_ambiguity(validate);
  validate->add_option("--predictions", o.predictions, "predictions.csv path");
  validate->add_option("--draws", o.draws, "Draws per size")->capture_default_str();
  validate->add_option("--sizes", o.sizes, "Aggregate sizes (default 4 8 16 32 64)")->delimiter(',');
  validate->add_option("--exclude-strata", o.exclude_strata, "Strata left out of the study")->delimiter(',');
  validate->add_option("--usol-denominator", o.usol, "US/OL denominators")
      ->check(CLI::IsMember({"subgroup", "all"}))
      ->capture_default_str();
  validate->add_flag("--include-seed-tract", o.include_seed_tract, "Let the geographic seed tract be drawn");

  CLI11_PARSE(app, argc, argv);

  const auto* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    make_out_dir(o);
    json record;
    if (command == "synth") record = run_synth(o);
    else if (command == "design") record = run_design(o);
    else if (command == "estimate") record = run_estimate(o);
    else if (command == "impute") record = run_impute(o);
    else if (command == "aggregate") record = run_aggregate(o);
    else record = run_validate(o);
    write_manifest(o, command, std::move(record));
  } catch (const Failure& f) {
    std::cerr << "smallarea " << command << ": " << sa_status_name(f.status) << ": " << sa_last_error() << '\n';
    return 10 + static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::cerr << "smallarea " << command << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}
