#include "reclab/experiment.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <set>
#include <stdexcept>
#include <thread>

#include "reclab/errors.hpp"
#include "reclab/numeric.hpp"
#include "reclab/theory.hpp"

namespace fs = std::filesystem;

namespace reclab {

namespace {

// Stream ids under the experiment master seed.
enum : std::uint64_t {
  kStreamCatalog = 1,
  kStreamTrain = 10,
  kStreamValidation = 11,
  kStreamArmTraining = 12,
  kStreamEvaluation = 13,
  kStreamVerification = 21,
};

int phase_id(Phase p) {
  switch (p) {
    case Phase::init: return 0;
    case Phase::post_sft: return 1;
    case Phase::post_dpo: return 2;
  }
  return 0;
}

std::vector<double> decode_distribution(const Policy& policy, int context,
                                        double temperature) {
  if (!(temperature > 0.0))
    throw std::invalid_argument("decode_temperature must be > 0");
  const auto row = policy.logits_row(context);
  std::vector<double> scaled(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) scaled[i] = row[i] / temperature;
  return softmax(scaled);
}

}  // namespace

std::string to_string(ArmKind k) {
  switch (k) {
    case ArmKind::sft_only: return "sft_only";
    case ArmKind::dpo_baseline: return "dpo_baseline";
    case ArmKind::self_play: return "self_play";
  }
  return "self_play";
}

ArmKind arm_kind_from_string(const std::string& s) {
  if (s == "sft_only") return ArmKind::sft_only;
  if (s == "dpo_baseline") return ArmKind::dpo_baseline;
  if (s == "self_play") return ArmKind::self_play;
  throw std::invalid_argument("unknown arm kind: " + s);
}

void validate(const ExperimentSpec& spec) {
  if (spec.name.empty()) throw std::invalid_argument("spec.name: empty");
  if (spec.replications < 1)
    throw std::invalid_argument("spec.replications: must be >= 1");
  if (spec.catalog.n_items < 2)
    throw std::invalid_argument("spec.catalog.n_items: must be >= 2");
  if (spec.catalog.n_groups < 2 || spec.catalog.n_groups > spec.catalog.n_items)
    throw std::invalid_argument("spec.catalog.n_groups: out of range");
  if (spec.catalog.zipf_exponent < 0.0)
    throw std::invalid_argument("spec.catalog.zipf_exponent: must be >= 0");
  if (spec.train_samples < 1)
    throw std::invalid_argument("spec.train_samples: must be >= 1");
  if (spec.eval.val_samples < 1)
    throw std::invalid_argument("spec.eval.val_samples: must be >= 1");
  if (!(spec.eval.decode_temperature > 0.0))
    throw std::invalid_argument("spec.eval.decode_temperature: must be > 0");
  if (spec.eval.top_k < 1 || spec.eval.top_k > spec.catalog.n_items)
    throw std::invalid_argument("spec.eval.top_k: out of range");
  if (spec.theorem_verification) return;
  if (spec.arms.empty()) throw std::invalid_argument("spec.arms: empty");
  std::set<std::string> names;
  for (std::size_t i = 0; i < spec.arms.size(); ++i) {
    const auto& arm = spec.arms[i];
    const std::string path = "spec.arms[" + std::to_string(i) + "]";
    if (arm.name.empty()) throw std::invalid_argument(path + ".name: empty");
    if (!names.insert(arm.name).second)
      throw std::invalid_argument(path + ".name: duplicate '" + arm.name + "'");
    try {
      validate(arm.config);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(path + "." + e.what());
    }
  }
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return nlohmann::json{
      {"beta", cfg.beta},
      {"lr_sft", cfg.lr_sft},
      {"lr_dpo", cfg.lr_dpo},
      {"sft_epochs", cfg.sft_epochs},
      {"dpo_epochs", cfg.dpo_epochs},
      {"iterations", cfg.iterations},
      {"neg_strategy", to_string(cfg.neg_strategy)},
      {"n_negatives", cfg.n_negatives},
      {"contamination", cfg.contamination},
      {"subsample_fraction", cfg.subsample_fraction},
      {"seed", cfg.seed},
      {"ref_is_post_sft", cfg.ref_is_post_sft},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  cfg.beta = j.at("beta").get<double>();
  cfg.lr_sft = j.at("lr_sft").get<double>();
  cfg.lr_dpo = j.at("lr_dpo").get<double>();
  cfg.sft_epochs = j.at("sft_epochs").get<int>();
  cfg.dpo_epochs = j.at("dpo_epochs").get<int>();
  cfg.iterations = j.at("iterations").get<int>();
  cfg.neg_strategy = neg_source_from_string(j.at("neg_strategy").get<std::string>());
  cfg.n_negatives = j.at("n_negatives").get<int>();
  cfg.contamination = j.at("contamination").get<double>();
  cfg.subsample_fraction = j.at("subsample_fraction").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.ref_is_post_sft = j.at("ref_is_post_sft").get<bool>();
  return cfg;
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& arm : spec.arms)
    arms.push_back({{"name", arm.name},
                    {"kind", to_string(arm.kind)},
                    {"config", to_json(arm.config)}});
  return nlohmann::json{
      {"name", spec.name},
      {"catalog",
       {{"n_items", spec.catalog.n_items},
        {"n_categories", spec.catalog.n_categories},
        {"n_contexts", spec.catalog.n_contexts},
        {"n_groups", spec.catalog.n_groups},
        {"zipf_exponent", spec.catalog.zipf_exponent},
        {"correlated_categories", spec.catalog.correlated_categories}}},
      {"eval",
       {{"val_samples", spec.eval.val_samples},
        {"decode_temperature", spec.eval.decode_temperature},
        {"top_k", spec.eval.top_k},
        {"or_top_m", spec.eval.or_top_m}}},
      {"train_samples", spec.train_samples},
      {"arms", arms},
      {"replications", spec.replications},
      {"master_seed", spec.master_seed},
      {"theorem_verification", spec.theorem_verification},
  };
}

ExperimentSpec experiment_from_json(const nlohmann::json& j) {
  ExperimentSpec spec;
  spec.name = j.at("name").get<std::string>();
  const auto& cat = j.at("catalog");
  spec.catalog.n_items = cat.at("n_items").get<int>();
  spec.catalog.n_categories = cat.at("n_categories").get<int>();
  spec.catalog.n_contexts = cat.at("n_contexts").get<int>();
  spec.catalog.n_groups = cat.at("n_groups").get<int>();
  spec.catalog.zipf_exponent = cat.at("zipf_exponent").get<double>();
  spec.catalog.correlated_categories = cat.at("correlated_categories").get<bool>();
  const auto& ev = j.at("eval");
  spec.eval.val_samples = ev.at("val_samples").get<int>();
  spec.eval.decode_temperature = ev.at("decode_temperature").get<double>();
  spec.eval.top_k = ev.at("top_k").get<int>();
  spec.eval.or_top_m = ev.at("or_top_m").get<int>();
  spec.train_samples = j.at("train_samples").get<int>();
  for (const auto& a : j.at("arms")) {
    ArmSpec arm;
    arm.name = a.at("name").get<std::string>();
    arm.kind = arm_kind_from_string(a.at("kind").get<std::string>());
    arm.config = train_config_from_json(a.at("config"));
    spec.arms.push_back(std::move(arm));
  }
  spec.replications = j.at("replications").get<int>();
  spec.master_seed = j.at("master_seed").get<std::uint64_t>();
  spec.theorem_verification = j.at("theorem_verification").get<bool>();
  return spec;
}

RecommendationLog make_recommendation_log(const Policy& policy, const ItemCatalog& catalog,
                                          const InteractionSet& validation,
                                          double decode_temperature, Rng& rng) {
  if (validation.records.empty())
    throw std::invalid_argument("make_recommendation_log: empty validation set");
  const int n = policy.n_items();
  std::vector<std::vector<double>> decode(static_cast<std::size_t>(policy.n_contexts()));
  std::vector<std::vector<int>> rank_of(static_cast<std::size_t>(policy.n_contexts()));
  auto ensure = [&](int c) {
    auto ci = static_cast<std::size_t>(c);
    if (decode[ci].empty()) {
      decode[ci] = decode_distribution(policy, c, decode_temperature);
      const auto ranking = policy.top_k_items(c, n);
      rank_of[ci].assign(static_cast<std::size_t>(n), 0);
      for (int pos = 0; pos < n; ++pos)
        rank_of[ci][static_cast<std::size_t>(ranking[static_cast<std::size_t>(pos)])] = pos + 1;
    }
  };

  RecommendationLog log;
  log.reserve(validation.records.size());
  for (auto [c, truth] : validation.records) {
    ensure(c);
    const auto ci = static_cast<std::size_t>(c);
    RecEntry e;
    e.context = c;
    e.recommended = rng.categorical(decode[ci]);
    e.ground_truth = truth;
    e.rank_of_truth = rank_of[ci][static_cast<std::size_t>(truth)];
    log.push_back(e);
  }
  return log;
}

MetricsReport evaluate_policy(const Policy& policy, const ItemCatalog& catalog,
                              const InteractionSet& validation,
                              std::span<const double> hist_category_dist,
                              const EvalConfig& eval, Rng& rng) {
  const auto log =
      make_recommendation_log(policy, catalog, validation, eval.decode_temperature, rng);
  MetricsReport r;
  const auto [hr, ndcg] = hr_ndcg_at_k(log, eval.top_k);
  r.hr_at_k = hr;
  r.ndcg_at_k = ndcg;
  r.div_ratio = div_ratio(log);
  r.or_ratio = or_ratio(log, eval.or_top_m);
  r.group_share = group_share(log, catalog);
  const auto rec_cat = recommendation_category_distribution(log, catalog);
  auto [gu, mgu] = group_unfairness(rec_cat, hist_category_dist);
  r.gu_per_category = std::move(gu);
  r.mgu = mgu;
  double tv = 0.0;
  for (int c = 0; c < catalog.n_contexts; ++c)
    tv += total_variation(decode_distribution(policy, c, eval.decode_temperature),
                          catalog.popularity_of(c));
  r.tv_to_popularity = tv / static_cast<double>(catalog.n_contexts);
  return r;
}

int worker_count(std::size_t jobs) {
  int workers = 0;
  if (const char* env = std::getenv("RECLAB_WORKERS")) workers = std::atoi(env);
  if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
  if (workers <= 0) workers = 1;
  return std::min<int>(workers, static_cast<int>(std::max<std::size_t>(jobs, 1)));
}

namespace {

struct CsvRow {
  std::string arm;
  int rep = 0;
  int order = 0;
  std::string text;
};

struct JobResult {
  std::vector<CsvRow> rows;
  std::vector<MetricsReport> reports;  // aligned with trajectory snapshots
  std::vector<std::pair<int, Phase>> keys;
};

// Removes files written by a failed run (newest first), then the directories
// it created, innermost first.
class OutputTracker {
 public:
  explicit OutputTracker(fs::path root) : root_(std::move(root)) {}

  void add(const fs::path& p) {
    std::lock_guard<std::mutex> lock(mu_);
    written_.push_back(p);
  }

  void make_dirs(const fs::path& p) {
    std::vector<fs::path> chain;
    for (fs::path cur = p; !cur.empty() && !fs::exists(cur); cur = cur.parent_path())
      chain.push_back(cur);
    fs::create_directories(p);
    std::lock_guard<std::mutex> lock(mu_);
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) dirs_.push_back(*it);
  }

  void write_text(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << content;
    add(p);
  }

  void cleanup() {
    std::error_code ec;
    for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
  }

 private:
  fs::path root_;
  std::mutex mu_;
  std::vector<fs::path> written_;
  std::vector<fs::path> dirs_;
};

Trajectory run_arm(const ArmSpec& arm, const Policy& init, const InteractionSet& train,
                   const ItemCatalog& catalog, const TrainConfig& cfg,
                   const Evaluator& evaluator) {
  switch (arm.kind) {
    case ArmKind::sft_only: return sft_only_run(init, train, catalog, cfg, evaluator);
    case ArmKind::dpo_baseline: return dpo_baseline_run(init, train, catalog, cfg, evaluator);
    case ArmKind::self_play: return self_play_run(init, train, catalog, cfg, evaluator);
  }
  throw std::invalid_argument("unknown arm kind");
}

}  // namespace

void run_experiment(const ExperimentSpec& spec, const std::string& output_dir) {
  validate(spec);
  const fs::path root(output_dir);
  fs::create_directories(root);
  OutputTracker tracker(root);

  try {
    tracker.write_text(root / "config.json", to_json(spec).dump(2) + "\n");

    if (spec.theorem_verification) {
      bool all_pass = false;
      const auto report = run_theory_verification(
          derive_seed(spec.master_seed, kStreamVerification), &all_pass);
      tracker.write_text(root / "verification.json", report.dump(2) + "\n");
      if (!all_pass)
        throw std::runtime_error("theorem verification failed; see verification.json");
      return;
    }

    ItemCatalog catalog = assign_popularity_groups(
        build_catalog(spec.catalog.n_items, spec.catalog.n_categories,
                      spec.catalog.n_contexts, spec.catalog.zipf_exponent,
                      derive_seed(spec.master_seed, kStreamCatalog),
                      spec.catalog.correlated_categories),
        spec.catalog.n_groups);
    tracker.write_text(root / "catalog.json", to_json(catalog).dump() + "\n");

    // Shared data per replication: all arms see the same train/validation
    // sets and the same training seed, so arms differ only by strategy.
    std::vector<InteractionSet> train_sets, val_sets;
    std::vector<std::vector<double>> hist_cats;
    for (int r = 0; r < spec.replications; ++r) {
      train_sets.push_back(sample_interactions(
          catalog, spec.train_samples,
          derive_seed(spec.master_seed, kStreamTrain, static_cast<std::uint64_t>(r))));
      val_sets.push_back(sample_interactions(
          catalog, spec.eval.val_samples,
          derive_seed(spec.master_seed, kStreamValidation, static_cast<std::uint64_t>(r))));
      hist_cats.push_back(category_distribution(train_sets.back(), catalog));
    }

    struct Job {
      std::size_t arm_idx;
      int rep;
    };
    std::vector<Job> jobs;
    for (std::size_t a = 0; a < spec.arms.size(); ++a)
      for (int r = 0; r < spec.replications; ++r) jobs.push_back({a, r});

    for (const auto& job : jobs)
      tracker.make_dirs(root / "arms" / spec.arms[job.arm_idx].name /
                        ("rep" + std::to_string(job.rep)));

    std::vector<JobResult> results(jobs.size());
    struct Failure {
      std::string what;
      bool divergence = false;
    };
    std::vector<Failure> failures(jobs.size());
    std::atomic<std::size_t> next{0};

    auto work = [&]() {
      for (;;) {
        const std::size_t j = next.fetch_add(1);
        if (j >= jobs.size()) return;
        const auto& job = jobs[j];
        const auto& arm = spec.arms[job.arm_idx];
        try {
          TrainConfig cfg = arm.config;
          cfg.seed = derive_seed(spec.master_seed, kStreamArmTraining,
                                 static_cast<std::uint64_t>(job.rep));
          const auto& train = train_sets[static_cast<std::size_t>(job.rep)];
          const auto& val = val_sets[static_cast<std::size_t>(job.rep)];
          const auto& hist = hist_cats[static_cast<std::size_t>(job.rep)];

          Evaluator evaluator = [&](const Policy& pol, int iteration, Phase phase) {
            Rng eval_rng(derive_seed(spec.master_seed, kStreamEvaluation,
                                     static_cast<std::uint64_t>(job.rep),
                                     static_cast<std::uint64_t>(iteration * 4 + phase_id(phase))));
            return evaluate_policy(pol, catalog, val, hist, spec.eval, eval_rng);
          };

          const Policy init(catalog.n_contexts, catalog.n_items);
          Trajectory traj = run_arm(arm, init, train, catalog, cfg, evaluator);

          const fs::path arm_dir = root / "arms" / arm.name / ("rep" + std::to_string(job.rep));
          nlohmann::json arm_config{{"arm", arm.name},
                                    {"kind", to_string(arm.kind)},
                                    {"replication", job.rep},
                                    {"train_config", to_json(cfg)}};
          tracker.write_text(arm_dir / "config.json", arm_config.dump(2) + "\n");
          std::string csv = metrics_csv_header(catalog.n_groups) + "\n";
          JobResult& res = results[j];
          for (std::size_t s = 0; s < traj.snapshots.size(); ++s) {
            const auto& snap = traj.snapshots[s];
            const std::string row = metrics_csv_row(arm.name, snap.iteration,
                                                    to_string(snap.phase), traj.metrics[s]);
            csv += row + "\n";
            res.rows.push_back({arm.name, job.rep, static_cast<int>(s), row});
            res.reports.push_back(traj.metrics[s]);
            res.keys.emplace_back(snap.iteration, snap.phase);

            const std::string ckpt = "policy_it" + std::to_string(snap.iteration) + "_" +
                                     to_string(snap.phase) + ".json";
            tracker.write_text(arm_dir / ckpt, snap.policy.to_json().dump() + "\n");
          }
          tracker.write_text(arm_dir / "metrics.csv", csv);
        } catch (const divergence_error& e) {
          failures[j] = {e.what(), true};
        } catch (const std::exception& e) {
          failures[j] = {e.what(), false};
        }
      }
    };

    const int workers = worker_count(jobs.size());
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (!failures[j].what.empty()) {
        const std::string msg = "arm '" + spec.arms[jobs[j].arm_idx].name + "' rep " +
                                std::to_string(jobs[j].rep) + ": " + failures[j].what;
        if (failures[j].divergence) throw divergence_error(msg);
        throw std::runtime_error(msg);
      }

    // Root metrics.csv, ordered (arm, rep, snapshot).
    std::string csv = metrics_csv_header(catalog.n_groups) + "\n";
    for (std::size_t j = 0; j < jobs.size(); ++j)
      for (const auto& row : results[j].rows) csv += row.text + "\n";
    tracker.write_text(root / "metrics.csv", csv);

    // summary.json: per-arm means over replications for each snapshot key.
    nlohmann::json summary;
    summary["replications"] = spec.replications;
    nlohmann::json arms_json = nlohmann::json::object();
    for (std::size_t a = 0; a < spec.arms.size(); ++a) {
      const auto& arm = spec.arms[a];
      // Snapshot keys from replication 0 (identical across reps).
      const JobResult& first = results[a * static_cast<std::size_t>(spec.replications)];
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t s = 0; s < first.keys.size(); ++s) {
        MetricsReport mean;
        mean.group_share.assign(static_cast<std::size_t>(catalog.n_groups), 0.0);
        mean.gu_per_category.assign(static_cast<std::size_t>(catalog.n_categories), 0.0);
        for (int r = 0; r < spec.replications; ++r) {
          const auto& rep = results[a * static_cast<std::size_t>(spec.replications) +
                                    static_cast<std::size_t>(r)].reports[s];
          mean.hr_at_k += rep.hr_at_k;
          mean.ndcg_at_k += rep.ndcg_at_k;
          mean.div_ratio += rep.div_ratio;
          mean.or_ratio += rep.or_ratio;
          mean.mgu += rep.mgu;
          mean.tv_to_popularity += rep.tv_to_popularity;
          for (std::size_t g = 0; g < mean.group_share.size(); ++g)
            mean.group_share[g] += rep.group_share[g];
          for (std::size_t c = 0; c < mean.gu_per_category.size(); ++c)
            mean.gu_per_category[c] += rep.gu_per_category[c];
        }
        const double R = static_cast<double>(spec.replications);
        nlohmann::json row;
        row["iteration"] = first.keys[s].first;
        row["phase"] = to_string(first.keys[s].second);
        row["hr"] = mean.hr_at_k / R;
        row["ndcg"] = mean.ndcg_at_k / R;
        row["div_ratio"] = mean.div_ratio / R;
        row["or_ratio"] = mean.or_ratio / R;
        row["mgu"] = mean.mgu / R;
        row["tv_to_popularity"] = mean.tv_to_popularity / R;
        nlohmann::json gs = nlohmann::json::array();
        for (double g : mean.group_share) gs.push_back(g / R);
        row["group_share"] = gs;
        rows.push_back(row);
      }
      arms_json[arm.name] = rows;
    }
    summary["arms"] = arms_json;
    tracker.write_text(root / "summary.json", summary.dump(2) + "\n");
  } catch (...) {
    tracker.cleanup();
    throw;
  }
}

std::vector<std::string> preset_names() {
  return {"fig1", "verify-theorem", "ablation-negatives", "rho-sweep", "nneg-sweep"};
}

ExperimentSpec make_preset(const std::string& name, std::uint64_t master_seed) {
  ExperimentSpec spec;
  spec.name = name;
  spec.master_seed = master_seed;

  TrainConfig base;
  base.beta = 0.5;
  base.lr_sft = 0.5;
  base.lr_dpo = 0.1;
  base.sft_epochs = 20000;  // enough full-batch epochs to fit the positives
  base.dpo_epochs = 300;
  base.iterations = 5;
  base.subsample_fraction = 0.5;

  if (name == "fig1") {
    spec.replications = 3;
    spec.eval.decode_temperature = 0.85;
    ArmSpec sft{"sft_only", ArmKind::sft_only, base};
    sft.config.subsample_fraction = 1.0;
    ArmSpec dpo{"dpo_uniform", ArmKind::dpo_baseline, base};
    dpo.config.subsample_fraction = 1.0;
    ArmSpec sp{"self_play", ArmKind::self_play, base};
    sp.config.neg_strategy = NegSource::self_play;
    spec.arms = {sft, dpo, sp};
    return spec;
  }
  if (name == "verify-theorem") {
    spec.theorem_verification = true;
    return spec;
  }
  if (name == "ablation-negatives") {
    spec.replications = 3;
    spec.eval.decode_temperature = 0.85;
    for (NegSource s : {NegSource::uniform, NegSource::self_play, NegSource::beam}) {
      ArmSpec arm{to_string(s) + "_negatives", ArmKind::self_play, base};
      arm.config.neg_strategy = s;
      spec.arms.push_back(arm);
    }
    return spec;
  }
  if (name == "rho-sweep") {
    spec.replications = 3;
    spec.train_samples = 1024;
    spec.eval.decode_temperature = 0.85;
    for (int pct : {0, 25, 50, 75, 100}) {
      ArmSpec arm{"rho_" + std::to_string(pct), ArmKind::self_play, base};
      arm.config.neg_strategy = NegSource::mixed;
      arm.config.contamination = static_cast<double>(pct) / 100.0;
      spec.arms.push_back(arm);
    }
    return spec;
  }
  if (name == "nneg-sweep") {
    spec.replications = 3;
    spec.train_samples = 1024;
    spec.eval.decode_temperature = 0.85;
    for (int nneg : {1, 2, 4, 8}) {
      ArmSpec arm{"n" + std::to_string(nneg), ArmKind::self_play, base};
      arm.config.neg_strategy = NegSource::beam;
      arm.config.n_negatives = nneg;
      spec.arms.push_back(arm);
    }
    return spec;
  }
  throw std::invalid_argument("unknown preset: " + name);
}

nlohmann::json run_theory_verification(std::uint64_t seed, bool* all_pass) {
  bool ok = true;
  nlohmann::json report;

  auto random_distribution = [](Rng& rng, int n) {
    std::vector<double> p(static_cast<std::size_t>(n));
    double total = 0.0;
    for (double& x : p) {
      x = 0.5 + rng.next_double();
      total += x;
    }
    for (double& x : p) x /= total;
    return p;
  };

  // Optimal-policy verification: 5 instances, q uniform, ref alternating
  // uniform/random, beta grid. Instances are independent, so they run on the
  // worker pool; rows are assembled in grid order.
  {
    const int n = 20;
    const std::vector<double> betas = {0.1, 0.5, 1.0, 2.0};
    const std::vector<double> uniform(static_cast<std::size_t>(n), 1.0 / n);

    struct Run {
      int instance;
      bool ref_uniform;
      double beta;
      std::vector<double> p, ref;
    };
    std::vector<Run> runs;
    for (int inst = 0; inst < 5; ++inst) {
      Rng rng(derive_seed(seed, 100, static_cast<std::uint64_t>(inst)));
      const auto p = random_distribution(rng, n);
      const bool ref_uniform = inst % 2 == 0;
      const auto ref = ref_uniform ? uniform : random_distribution(rng, n);
      for (double beta : betas) runs.push_back({inst, ref_uniform, beta, p, ref});
    }

    std::vector<nlohmann::json> row_json(runs.size());
    std::vector<char> row_pass(runs.size(), 0);
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= runs.size()) return;
        const auto& run = runs[i];
        const auto closed = closed_form_optimal_policy(run.ref, run.p, uniform, run.beta);
        const auto opt = exact_dpo_optimize(run.ref, run.p, uniform, run.beta);
        const double tv = total_variation(opt.policy.softmax_probs(0), closed);
        const bool pass = tv < 1e-3;
        row_pass[i] = pass ? 1 : 0;
        row_json[i] = {{"instance", run.instance},
                       {"ref", run.ref_uniform ? "uniform" : "random"},
                       {"beta", run.beta},
                       {"tv", tv},
                       {"iters", opt.iters},
                       {"grad_inf_norm", opt.grad_inf_norm},
                       {"converged", opt.converged},
                       {"pass", pass}};
      }
    };
    std::vector<std::thread> pool;
    const int workers = worker_count(runs.size());
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();

    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      ok = ok && row_pass[i];
      rows.push_back(row_json[i]);
    }
    report["optimal_policy"] = {{"n_items", 20}, {"tolerance_tv", 1e-3}, {"runs", rows}};
  }

  // Reward verification: 5 strictly positive instances.
  {
    const int n = 10;
    nlohmann::json rows = nlohmann::json::array();
    for (int inst = 0; inst < 5; ++inst) {
      Rng rng(derive_seed(seed, 200, static_cast<std::uint64_t>(inst)));
      const auto p = random_distribution(rng, n);
      const auto q = random_distribution(rng, n);
      const auto closed = closed_form_optimal_reward(p, q);
      const auto opt = exact_bt_reward_optimize(p, q);
      double max_abs = 0.0;
      for (std::size_t y = 0; y < closed.size(); ++y)
        max_abs = std::max(max_abs, std::abs(closed[y] - opt.reward[y]));
      const bool pass = max_abs < 1e-4;
      ok = ok && pass;
      rows.push_back({{"instance", inst},
                      {"max_abs_diff", max_abs},
                      {"iters", opt.iters},
                      {"grad_inf_norm", opt.grad_inf_norm},
                      {"converged", opt.converged},
                      {"pass", pass}});
    }
    report["optimal_reward"] = {{"n_items", 10}, {"tolerance_max_abs", 1e-4}, {"runs", rows}};
  }

  report["all_pass"] = ok;
  if (all_pass) *all_pass = ok;
  return report;
}

}  // namespace reclab
