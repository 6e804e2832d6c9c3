// Command-line front end: catalog synthesis, single-arm training, closed-form
// verification, preset sweeps, and report emission.
//
// Exit codes: 0 success, 1 validation failure, 2 runtime divergence,
// 3 verification failure.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "reclab/catalog.hpp"
#include "reclab/errors.hpp"
#include "reclab/experiment.hpp"
#include "reclab/report.hpp"
#include "reclab/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitVerifyFailed = 3;

// Flat key=value config file; '#' starts a comment. Flags win over file keys.
std::map<std::string, std::string> parse_kv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                  ": expected key=value");
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

template <class T>
T parse_value(const std::string& key, const std::string& text);

template <>
double parse_value<double>(const std::string& key, const std::string& text) {
  try {
    return std::stod(text);
  } catch (...) {
    throw std::invalid_argument("config: " + key + ": not a number");
  }
}

template <>
int parse_value<int>(const std::string& key, const std::string& text) {
  try {
    return std::stoi(text);
  } catch (...) {
    throw std::invalid_argument("config: " + key + ": not an integer");
  }
}

template <>
std::uint64_t parse_value<std::uint64_t>(const std::string& key, const std::string& text) {
  try {
    return std::stoull(text);
  } catch (...) {
    throw std::invalid_argument("config: " + key + ": not an integer");
  }
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw std::invalid_argument("config: " + key + ": expected true/false");
}

template <>
std::string parse_value<std::string>(const std::string&, const std::string& text) {
  return text;
}

class KvConfig {
 public:
  explicit KvConfig(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  template <class T>
  void apply(const std::string& key, T& field) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return;
    field = parse_value<T>(key, it->second);
    used_.insert(it->first);
  }

  void check_all_used() const {
    for (const auto& [key, value] : kv_)
      if (!used_.count(key))
        throw std::invalid_argument("config: unknown key '" + key + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

void apply_spec_keys(KvConfig& kv, reclab::ExperimentSpec& spec, reclab::TrainConfig& cfg) {
  kv.apply("n_items", spec.catalog.n_items);
  kv.apply("n_categories", spec.catalog.n_categories);
  kv.apply("n_contexts", spec.catalog.n_contexts);
  kv.apply("n_groups", spec.catalog.n_groups);
  kv.apply("zipf_exponent", spec.catalog.zipf_exponent);
  kv.apply("correlated_categories", spec.catalog.correlated_categories);
  kv.apply("train_samples", spec.train_samples);
  kv.apply("val_samples", spec.eval.val_samples);
  kv.apply("decode_temperature", spec.eval.decode_temperature);
  kv.apply("top_k", spec.eval.top_k);
  kv.apply("replications", spec.replications);
  kv.apply("master_seed", spec.master_seed);

  kv.apply("beta", cfg.beta);
  kv.apply("lr_sft", cfg.lr_sft);
  kv.apply("lr_dpo", cfg.lr_dpo);
  kv.apply("sft_epochs", cfg.sft_epochs);
  kv.apply("dpo_epochs", cfg.dpo_epochs);
  kv.apply("iterations", cfg.iterations);
  kv.apply("n_negatives", cfg.n_negatives);
  kv.apply("contamination", cfg.contamination);
  kv.apply("subsample_fraction", cfg.subsample_fraction);
  std::string strategy;
  kv.apply("neg_strategy", strategy);
  if (!strategy.empty()) cfg.neg_strategy = reclab::neg_source_from_string(strategy);
  std::string ref;
  kv.apply("ref_snapshot", ref);
  if (ref == "post_sft")
    cfg.ref_is_post_sft = true;
  else if (ref == "pre_sft")
    cfg.ref_is_post_sft = false;
  else if (!ref.empty())
    throw std::invalid_argument("config: ref_snapshot: expected post_sft or pre_sft");
}

int run(int argc, char** argv) {
  CLI::App app{"Tabular preference-alignment laboratory"};
  app.require_subcommand(1);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Build a synthetic item catalog");
  int s_items = 100, s_categories = 10, s_contexts = 1, s_groups = 5;
  double s_zipf = 1.2;
  std::uint64_t s_seed = 1;
  bool s_correlated = false;
  std::string s_out;
  synth->add_option("--items", s_items, "number of items");
  synth->add_option("--categories", s_categories, "number of categories");
  synth->add_option("--contexts", s_contexts, "number of contexts");
  synth->add_option("--groups", s_groups, "number of popularity groups");
  synth->add_option("--zipf", s_zipf, "Zipf exponent (0 = uniform)");
  synth->add_option("--seed", s_seed, "catalog seed");
  synth->add_flag("--correlated-categories", s_correlated,
                  "tie categories to popularity rank");
  synth->add_option("--out", s_out, "output catalog JSON path")->required();

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Run a single training arm");
  std::string t_out, t_config, t_name = "arm", t_kind = "self_play", t_strategy, t_ref;
  reclab::ExperimentSpec t_spec;
  reclab::TrainConfig t_cfg;
  train->add_option("--out", t_out, "output directory")->required();
  train->add_option("--config", t_config, "key=value config file");
  train->add_option("--arm-name", t_name, "arm name for CSV rows");
  train->add_option("--kind", t_kind, "sft_only | dpo_baseline | self_play");
  auto* o_items = train->add_option("--items", t_spec.catalog.n_items);
  auto* o_cats = train->add_option("--categories", t_spec.catalog.n_categories);
  auto* o_ctx = train->add_option("--contexts", t_spec.catalog.n_contexts);
  auto* o_groups = train->add_option("--groups", t_spec.catalog.n_groups);
  auto* o_zipf = train->add_option("--zipf", t_spec.catalog.zipf_exponent);
  auto* o_train_n = train->add_option("--train-samples", t_spec.train_samples);
  auto* o_val_n = train->add_option("--val-samples", t_spec.eval.val_samples);
  auto* o_temp = train->add_option("--decode-temp", t_spec.eval.decode_temperature);
  auto* o_topk = train->add_option("--top-k", t_spec.eval.top_k);
  auto* o_reps = train->add_option("--replications", t_spec.replications);
  auto* o_seed = train->add_option("--seed", t_spec.master_seed, "master seed");
  auto* o_beta = train->add_option("--beta", t_cfg.beta);
  auto* o_lrs = train->add_option("--lr-sft", t_cfg.lr_sft);
  auto* o_lrd = train->add_option("--lr-dpo", t_cfg.lr_dpo);
  auto* o_es = train->add_option("--sft-epochs", t_cfg.sft_epochs);
  auto* o_ed = train->add_option("--dpo-epochs", t_cfg.dpo_epochs);
  auto* o_iter = train->add_option("--iterations", t_cfg.iterations);
  auto* o_nneg = train->add_option("--negatives", t_cfg.n_negatives);
  auto* o_rho = train->add_option("--rho", t_cfg.contamination);
  auto* o_sub = train->add_option("--subsample", t_cfg.subsample_fraction);
  train->add_option("--strategy", t_strategy, "uniform | self_play | beam | mixed");
  train->add_option("--ref-snapshot", t_ref, "post_sft | pre_sft");

  // verify -----------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "Run closed-form verification oracles");
  std::string v_out;
  std::uint64_t v_seed = 1;
  verify->add_option("--out", v_out, "output directory")->required();
  verify->add_option("--seed", v_seed, "verification seed");

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Run a built-in experiment preset");
  std::string w_preset, w_out, w_from;
  std::uint64_t w_seed = 1;
  bool w_seed_set = false;
  int w_reps = 0;
  sweep->add_option("--preset", w_preset, "fig1 | verify-theorem | ablation-negatives | rho-sweep | nneg-sweep");
  sweep->add_option("--from-config", w_from, "rerun from a written config.json");
  sweep->add_option("--out", w_out, "output directory")->required();
  sweep->add_option("--seed", w_seed, "master seed")->each([&](const std::string&) {
    w_seed_set = true;
  });
  sweep->add_option("--replications", w_reps, "override replication count");

  // report -----------------------------------------------------------------
  auto* report = app.add_subcommand("report", "Emit consolidated report.csv");
  std::string r_dir;
  report->add_option("--dir", r_dir, "experiment directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (synth->parsed()) {
    auto cat = reclab::assign_popularity_groups(
        reclab::build_catalog(s_items, s_categories, s_contexts, s_zipf, s_seed,
                              s_correlated),
        s_groups);
    std::ofstream out(s_out, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + s_out);
    out << reclab::to_json(cat).dump(2) << "\n";
    std::cout << "wrote " << s_out << "\n";
    return kExitOk;
  }

  if (train->parsed()) {
    // File values first, explicit flags win.
    if (!t_config.empty()) {
      reclab::ExperimentSpec file_spec = t_spec;
      reclab::TrainConfig file_cfg = t_cfg;
      KvConfig kv(parse_kv_file(t_config));
      apply_spec_keys(kv, file_spec, file_cfg);
      kv.check_all_used();
      if (!o_items->count()) t_spec.catalog.n_items = file_spec.catalog.n_items;
      if (!o_cats->count()) t_spec.catalog.n_categories = file_spec.catalog.n_categories;
      if (!o_ctx->count()) t_spec.catalog.n_contexts = file_spec.catalog.n_contexts;
      if (!o_groups->count()) t_spec.catalog.n_groups = file_spec.catalog.n_groups;
      if (!o_zipf->count()) t_spec.catalog.zipf_exponent = file_spec.catalog.zipf_exponent;
      t_spec.catalog.correlated_categories = file_spec.catalog.correlated_categories;
      if (!o_train_n->count()) t_spec.train_samples = file_spec.train_samples;
      if (!o_val_n->count()) t_spec.eval.val_samples = file_spec.eval.val_samples;
      if (!o_temp->count()) t_spec.eval.decode_temperature = file_spec.eval.decode_temperature;
      if (!o_topk->count()) t_spec.eval.top_k = file_spec.eval.top_k;
      if (!o_reps->count()) t_spec.replications = file_spec.replications;
      if (!o_seed->count()) t_spec.master_seed = file_spec.master_seed;
      if (!o_beta->count()) t_cfg.beta = file_cfg.beta;
      if (!o_lrs->count()) t_cfg.lr_sft = file_cfg.lr_sft;
      if (!o_lrd->count()) t_cfg.lr_dpo = file_cfg.lr_dpo;
      if (!o_es->count()) t_cfg.sft_epochs = file_cfg.sft_epochs;
      if (!o_ed->count()) t_cfg.dpo_epochs = file_cfg.dpo_epochs;
      if (!o_iter->count()) t_cfg.iterations = file_cfg.iterations;
      if (!o_nneg->count()) t_cfg.n_negatives = file_cfg.n_negatives;
      if (!o_rho->count()) t_cfg.contamination = file_cfg.contamination;
      if (!o_sub->count()) t_cfg.subsample_fraction = file_cfg.subsample_fraction;
      if (t_strategy.empty()) t_cfg.neg_strategy = file_cfg.neg_strategy;
      if (t_ref.empty()) t_cfg.ref_is_post_sft = file_cfg.ref_is_post_sft;
    }
    if (!t_strategy.empty()) t_cfg.neg_strategy = reclab::neg_source_from_string(t_strategy);
    if (t_ref == "post_sft") t_cfg.ref_is_post_sft = true;
    else if (t_ref == "pre_sft") t_cfg.ref_is_post_sft = false;
    else if (!t_ref.empty())
      throw std::invalid_argument("--ref-snapshot: expected post_sft or pre_sft");

    t_spec.name = "train:" + t_name;
    reclab::ArmSpec arm;
    arm.name = t_name;
    arm.kind = reclab::arm_kind_from_string(t_kind);
    arm.config = t_cfg;
    t_spec.arms = {arm};
    reclab::run_experiment(t_spec, t_out);
    std::cout << "wrote " << t_out << "/metrics.csv\n";
    return kExitOk;
  }

  if (verify->parsed()) {
    bool all_pass = false;
    const auto rep = reclab::run_theory_verification(v_seed, &all_pass);
    std::filesystem::create_directories(v_out);
    std::ofstream out(std::filesystem::path(v_out) / "verification.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write verification.json");
    out << rep.dump(2) << "\n";
    std::cout << (all_pass ? "verification passed" : "verification FAILED") << "\n";
    return all_pass ? kExitOk : kExitVerifyFailed;
  }

  if (sweep->parsed()) {
    reclab::ExperimentSpec spec;
    if (!w_from.empty()) {
      std::ifstream in(w_from);
      if (!in) throw std::invalid_argument("cannot open " + w_from);
      nlohmann::json j;
      in >> j;
      spec = reclab::experiment_from_json(j);
    } else if (!w_preset.empty()) {
      spec = reclab::make_preset(w_preset, w_seed);
    } else {
      throw std::invalid_argument("sweep: provide --preset or --from-config");
    }
    if (w_seed_set) spec.master_seed = w_seed;
    if (w_reps > 0) spec.replications = w_reps;
    reclab::run_experiment(spec, w_out);
    if (!spec.theorem_verification) reclab::emit_report(w_out);
    std::cout << "experiment '" << spec.name << "' written to " << w_out << "\n";
    return kExitOk;
  }

  if (report->parsed()) {
    reclab::emit_report(r_dir);
    std::cout << "wrote " << r_dir << "/report.csv\n";
    return kExitOk;
  }

  return kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const reclab::divergence_error& e) {
    std::cerr << "divergence: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
