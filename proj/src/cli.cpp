#include "gls/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include "gls/error.hpp"
#include "gls/estimator.hpp"
#include "gls/network.hpp"

namespace gls::cli {
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kGenerateKeys{"seed", "k", "d", "n_source", "n_target", "sigma", "source_dist",
                                             "target_dist", "subsample", "stratified", "data_seed", "out",
                                             "full_precision"};
const std::vector<std::string> kTrainKeys{"algorithms", "seeds", "epochs", "batches_per_epoch", "batch_size", "lr",
                                          "momentum", "lambda", "weight_update_period", "weight_da_loss",
                                          "weight_c_loss", "da_coefficient", "lr_decay_every", "lr_decay",
                                          "feature_hidden", "feature_dim", "discriminator_hidden", "activation",
                                          "run_bounds", "histogram_bins", "histogram_min_count", "permutations",
                                          "gls_threshold", "slack", "source", "target", "jobs", "save_model"};
const std::vector<std::string> kSweepKeys{"tasks", "base", "variant", "keep_min", "jsd_high", "bins", "task_seed"};
const std::vector<std::string> kEstimateKeys{"seed", "source_predictions", "source_labels", "target_predictions",
                                             "p_source", "out", "full_precision"};
const std::vector<std::string> kVerifyKeys{"seed", "source", "target", "model", "out", "full_precision",
                                           "histogram_bins", "histogram_min_count", "permutations", "gls_threshold",
                                           "slack"};

std::vector<std::string> concat(std::initializer_list<const std::vector<std::string>*> lists) {
  std::vector<std::string> out;
  for (const auto* l : lists) out.insert(out.end(), l->begin(), l->end());
  return out;
}

std::uint64_t seed_of(const KeyValueConfig& cfg) {
  const long long s = cfg.get_int("seed", static_cast<long long>(default_seed()));
  if (s < 0) throw Error(Errc::ConfigInvalid, "seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

int positive_int(const KeyValueConfig& cfg, const std::string& key, long long fallback) {
  const long long v = cfg.get_int(key, fallback);
  if (v < 1 || v > 1'000'000'000) throw Error(Errc::ConfigInvalid, key + " must be a positive integer");
  return static_cast<int>(v);
}

std::vector<int> int_list(const KeyValueConfig& cfg, const std::string& key, const std::vector<int>& fallback) {
  std::vector<long long> wide(fallback.begin(), fallback.end());
  std::vector<int> out;
  for (long long v : cfg.get_ints(key, wide)) {
    if (v < 1) throw Error(Errc::ConfigInvalid, key + " entries must be positive");
    out.push_back(static_cast<int>(v));
  }
  return out;
}

/// Writes name.csv and, with full precision requested, name.raw.csv next to it.
void write_csv(const fs::path& dir, const std::string& name, bool full_precision,
               const std::function<void(std::ostream&, Precision)>& body) {
  auto one = [&](const fs::path& path, Precision p) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
    body(out, p);
    if (!out) throw Error(Errc::IoError, "write failed for " + path.string());
  };
  one(dir / (name + ".csv"), Precision::Display);
  if (full_precision) one(dir / (name + ".raw.csv"), Precision::Full);
}

fs::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(Errc::IoError, "cannot create output directory " + dir);
  return dir;
}

Dataset load_dataset(const std::string& path, int k) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  return read_dataset_csv(in, path, k);
}

CsvTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path);
  return read_numeric_csv(in, path);
}

double rounded(double v) { return std::stod(format_number(v)); }

std::string run_name(Algorithm a, std::uint64_t seed) { return algorithm_name(a) + "_seed" + std::to_string(seed); }

DomainPair load_or_generate(const ExperimentConfig& ex) {
  if (ex.source_path.empty() != ex.target_path.empty()) {
    throw Error(Errc::ConfigInvalid, "set both source and target, or neither");
  }
  if (ex.source_path.empty()) return generate_pair(ex.generate);
  DomainPair p{load_dataset(ex.source_path, 0), load_dataset(ex.target_path, 0)};
  const int k = std::max(p.source.k, p.target.k);
  p.source.k = p.target.k = k;
  p.target.tag = DomainTag::Target;
  return p;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_generate(const KeyValueConfig& cfg) {
  cfg.require_known(kGenerateKeys);
  const GenerateSpec spec = generate_spec_from(cfg, 3);
  const DomainPair pair = generate_pair(spec);
  const auto dir = prepare_dir(cfg.get_string("out", "."));
  const bool full = cfg.get_bool("full_precision", false);
  write_csv(dir, "source", full, [&](std::ostream& o, Precision p) { write_dataset_csv(o, pair.source, p); });
  write_csv(dir, "target", full, [&](std::ostream& o, Precision p) { write_dataset_csv(o, pair.target, p); });

  const Categorical ps = pair.source.label_distribution();
  const Categorical pt = pair.target.label_distribution();
  nlohmann::ordered_json m;
  m["k"] = pair.source.k;
  m["d"] = pair.source.dim();
  m["n_source"] = pair.source.size();
  m["n_target"] = pair.target.size();
  m["seed"] = spec.source.seed;
  m["subsample"] = spec.subsample;
  std::vector<double> a, b;
  for (double v : ps.probs()) a.push_back(rounded(v));
  for (double v : pt.probs()) b.push_back(rounded(v));
  m["source_label_dist"] = a;
  m["target_label_dist"] = b;
  m["jsd"] = rounded(jsd(ps, pt));
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write manifest");
  out << m.dump(2) << '\n';
  std::cout << "wrote " << (dir / "source.csv").string() << ", " << (dir / "target.csv").string()
            << ", manifest.json (jsd " << format_number(jsd(ps, pt)) << ")\n";
  return 0;
}

int cmd_train(const KeyValueConfig& cfg) {
  cfg.require_known(concat({&kGenerateKeys, &kTrainKeys}));
  const ExperimentConfig ex = experiment_from(cfg, 3);
  const DomainPair data = load_or_generate(ex);
  const auto dir = prepare_dir(ex.output_dir);
  const bool save_model = cfg.get_bool("save_model", false);

  struct Run {
    Algorithm algorithm;
    std::uint64_t seed;
    TrainTrace trace;
  };
  std::vector<Run> runs;
  for (Algorithm a : ex.algorithms)
    for (std::uint64_t s : ex.seeds) runs.push_back({a, s, {}});

  parallel_for(static_cast<int>(runs.size()), ex.jobs, [&](int i) {
    Run& r = runs[static_cast<std::size_t>(i)];
    TrainConfig c = ex.train;
    c.algorithm = r.algorithm;
    c.seed = r.seed;
    TrainResult res = train(c, data.source, data.target);
    const std::string name = run_name(r.algorithm, r.seed);
    write_csv(dir, "trace_" + name, ex.full_precision,
              [&](std::ostream& o, Precision p) { write_trace_csv(o, res.trace, p); });
    write_csv(dir, "bounds_" + name, ex.full_precision,
              [&](std::ostream& o, Precision p) { write_bounds_csv(o, res.trace, p); });
    if (save_model) {
      std::ofstream m(dir / ("model_" + name + ".ckpt"), std::ios::binary);
      if (!m) throw Error(Errc::IoError, "cannot write model checkpoint");
      save_checkpoint(res.state, m);
    }
    r.trace = std::move(res.trace);
  });

  // best accuracy per (algorithm, seed) for the win fractions
  std::map<std::pair<Algorithm, std::uint64_t>, double> best;
  for (const auto& r : runs) best[{r.algorithm, r.seed}] = r.trace.best_acc_tgt();

  write_csv(dir, "summary", ex.full_precision, [&](std::ostream& o, Precision p) {
    o << "algorithm,seed,best_acc_tgt,final_acc_tgt,final_w_dist,beats_base\n";
    for (Algorithm a : ex.algorithms) {
      const Algorithm base = base_algorithm(a);
      const bool compare = base != a && std::find(ex.algorithms.begin(), ex.algorithms.end(), base) != ex.algorithms.end();
      double sum_best = 0.0, sum_final = 0.0, sum_dist = 0.0, wins = 0.0;
      for (const auto& r : runs) {
        if (r.algorithm != a) continue;
        const double b = r.trace.best_acc_tgt();
        const double w_dist = r.trace.epochs.back().w_dist;
        sum_best += b;
        sum_final += r.trace.final_acc_tgt();
        sum_dist += w_dist;
        o << algorithm_name(a) << ',' << r.seed << ',' << format_number(b, p) << ','
          << format_number(r.trace.final_acc_tgt(), p) << ',' << format_number(w_dist, p) << ',';
        if (compare) {
          const bool win = b > best.at({base, r.seed});
          wins += win;
          o << (win ? 1 : 0) << '\n';
        } else {
          o << "na\n";
        }
      }
      const double n = static_cast<double>(ex.seeds.size());
      o << algorithm_name(a) << ",mean," << format_number(sum_best / n, p) << ',' << format_number(sum_final / n, p)
        << ',' << format_number(sum_dist / n, p) << ',' << (compare ? format_number(wins / n, p) : "na") << '\n';
    }
  });
  for (Algorithm a : ex.algorithms) {
    double sum = 0.0;
    for (const auto& r : runs)
      if (r.algorithm == a) sum += r.trace.best_acc_tgt();
    std::cout << algorithm_name(a) << ": mean best target accuracy "
              << format_number(sum / static_cast<double>(ex.seeds.size())) << '\n';
  }
  return 0;
}

int cmd_sweep(const KeyValueConfig& cfg) {
  cfg.require_known(concat({&kGenerateKeys, &kTrainKeys, &kSweepKeys}));
  const ExperimentConfig ex = experiment_from(cfg, 10);
  const DomainPair base = load_or_generate(ex);
  TaskSuiteOptions opts;
  opts.keep_min = cfg.get_double("keep_min", opts.keep_min);
  opts.jsd_high = cfg.get_double("jsd_high", opts.jsd_high);
  opts.bins = positive_int(cfg, "bins", opts.bins);
  const int count = positive_int(cfg, "tasks", 20);
  const auto task_seed = static_cast<std::uint64_t>(cfg.get_int("task_seed", static_cast<long long>(ex.seeds.front())));
  const auto tasks = jsd_task_suite(base.source, base.target, count, task_seed, opts);
  const Algorithm base_alg = parse_algorithm(cfg.get_string("base", "dann"));
  const Algorithm variant = parse_algorithm(cfg.get_string("variant", "iwdan"));
  TrainConfig tc = ex.train;
  tc.seed = ex.seeds.front();
  const auto rows = run_jsd_sweep(tasks, tc, base_alg, variant, ex.jobs);
  const auto dir = prepare_dir(ex.output_dir);
  write_csv(dir, "sweep", ex.full_precision, [&](std::ostream& o, Precision p) { write_sweep_csv(o, rows, p); });
  double mean = 0.0;
  for (const auto& r : rows) mean += r.gain() / static_cast<double>(rows.size());
  std::cout << rows.size() << " tasks, mean gain " << format_number(mean) << '\n';
  return 0;
}

int cmd_estimate(const KeyValueConfig& cfg) {
  cfg.require_known(kEstimateKeys);
  auto need = [&](const std::string& key) {
    const auto v = cfg.raw(key);
    if (!v || v->empty()) throw Error(Errc::ConfigInvalid, "missing " + key);
    return *v;
  };
  const CsvTable src = load_table(need("source_predictions"));
  const CsvTable lab = load_table(need("source_labels"));
  const CsvTable tgt = load_table(need("target_predictions"));
  const Eigen::Index k = src.values.cols();
  if (k < 2 || tgt.values.cols() != k) {
    throw Error(Errc::ShapeMismatch, "prediction files need the same number (>= 2) of columns");
  }
  if (lab.values.cols() != 1 || lab.values.rows() != src.values.rows()) {
    throw Error(Errc::ShapeMismatch, "labels file must have one column and one row per source prediction");
  }
  std::vector<int> labels;
  for (Eigen::Index i = 0; i < lab.values.rows(); ++i) {
    const double v = lab.values(i, 0);
    if (v != std::floor(v) || v < 0 || v >= static_cast<double>(k)) {
      throw Error(Errc::ParseError, need("source_labels") + ":" + std::to_string(lab.lines[static_cast<std::size_t>(i)]) +
                                        ": label outside [0, k)");
    }
    labels.push_back(static_cast<int>(v));
  }
  ConfusionAccumulator acc(static_cast<std::size_t>(k));
  acc.accumulate(src.values, labels, tgt.values);
  const FinalizedConfusion fin = acc.finalize();
  const Categorical p_s = cfg.has("p_source") ? Categorical(cfg.get_doubles("p_source", {}))
                                              : empirical_label_dist(labels, static_cast<std::size_t>(k));
  if (static_cast<Eigen::Index>(p_s.size()) != k) throw Error(Errc::ShapeMismatch, "p_source has the wrong length");
  const WeightVector w = solve_qp(fin.joint, fin.target_marginal, p_s);
  std::optional<WeightVector> inverse;
  try {
    inverse = exact_inverse_weights(fin.joint, fin.target_marginal);
  } catch (const Error& e) {
    if (e.code() != Errc::SingularMatrix) throw;
  }
  const auto dir = prepare_dir(cfg.get_string("out", "."));
  write_csv(dir, "weights", cfg.get_bool("full_precision", false), [&](std::ostream& o, Precision p) {
    o << "class,w_qp,w_inverse\n";
    for (Eigen::Index y = 0; y < k; ++y) {
      const auto yy = static_cast<std::size_t>(y);
      o << y << ',' << format_number(w[yy], p) << ',' << (inverse ? format_number((*inverse)[yy], p) : "na") << '\n';
    }
  });
  // One row, row-major: c_i_j is D_S(Yhat = i, Y = j).
  write_csv(dir, "confusion", cfg.get_bool("full_precision", false), [&](std::ostream& o, Precision p) {
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) o << (i || j ? "," : "") << "c_" << i << '_' << j;
    o << '\n';
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) o << (i || j ? "," : "") << format_number(fin.joint(i, j), p);
    o << '\n';
  });
  std::cout << "condition number " << format_number(condition_number(fin.joint)) << '\n';
  return 0;
}

int cmd_verify(const KeyValueConfig& cfg) {
  cfg.require_known(kVerifyKeys);
  const std::string model_path = cfg.get_string("model", "");
  std::ifstream m(model_path);
  if (model_path.empty() || !m) throw Error(Errc::IoError, "cannot open model checkpoint '" + model_path + "'");
  const ModelState state = load_checkpoint(m);
  Dataset source = load_dataset(cfg.get_string("source", ""), state.classes());
  Dataset target = load_dataset(cfg.get_string("target", ""), state.classes());
  const Evaluation es = evaluate(state, source);
  const Evaluation et = evaluate(state, target);
  SuiteInput in{state.classes(), es.features, et.features, source.labels, target.labels, es.predictions,
                et.predictions};
  SuiteOptions opts;
  opts.histogram.bins = positive_int(cfg, "histogram_bins", opts.histogram.bins);
  opts.histogram.min_count = positive_int(cfg, "histogram_min_count", opts.histogram.min_count);
  opts.histogram.permutations = positive_int(cfg, "permutations", opts.histogram.permutations);
  opts.histogram.seed = seed_of(cfg);
  opts.gls_threshold = cfg.get_double("gls_threshold", opts.gls_threshold);
  opts.slack = cfg.get_double("slack", opts.slack);
  const auto reports = run_bound_suite(in, opts);
  const auto dir = prepare_dir(cfg.get_string("out", "."));
  write_csv(dir, "bounds", cfg.get_bool("full_precision", false), [&](std::ostream& o, Precision p) {
    write_bounds_header(o);
    for (const auto& r : reports) write_bound_row(o, r, 0, p);
  });
  int applicable = 0, holding = 0;
  for (const auto& r : reports) {
    applicable += r.applicable;
    holding += r.applicable && r.holds;
  }
  std::cout << holding << " of " << applicable << " applicable checks hold\n";
  return 0;
}

}  // namespace

std::uint64_t default_seed() {
  const char* env = std::getenv("GLS_ADAPT_SEED");
  if (!env || !*env) return 0;
  KeyValueConfig c;
  c.set("GLS_ADAPT_SEED", env);
  const long long v = c.get_int("GLS_ADAPT_SEED", 0);
  if (v < 0) throw Error(Errc::ConfigInvalid, "GLS_ADAPT_SEED must be non-negative");
  return static_cast<std::uint64_t>(v);
}

TrainConfig train_config_from(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.epochs = positive_int(cfg, "epochs", c.epochs);
  c.batches_per_epoch = positive_int(cfg, "batches_per_epoch", c.batches_per_epoch);
  c.batch_size = positive_int(cfg, "batch_size", c.batch_size);
  c.lr = cfg.get_double("lr", c.lr);
  c.momentum = cfg.get_double("momentum", c.momentum);
  c.lambda = cfg.get_double("lambda", c.lambda);
  c.weight_update_period = positive_int(cfg, "weight_update_period", c.weight_update_period);
  c.weight_da_loss = cfg.get_bool("weight_da_loss", c.weight_da_loss);
  c.weight_c_loss = cfg.get_bool("weight_c_loss", c.weight_c_loss);
  c.da_coefficient = cfg.get_double("da_coefficient", c.da_coefficient);
  c.lr_decay_every = static_cast<int>(cfg.get_int("lr_decay_every", c.lr_decay_every));
  c.lr_decay = cfg.get_double("lr_decay", c.lr_decay);
  c.architecture.feature_hidden = int_list(cfg, "feature_hidden", c.architecture.feature_hidden);
  c.architecture.feature_dim = positive_int(cfg, "feature_dim", c.architecture.feature_dim);
  c.architecture.discriminator_hidden = int_list(cfg, "discriminator_hidden", c.architecture.discriminator_hidden);
  const std::string act = cfg.get_string("activation", "tanh");
  if (act == "tanh") {
    c.architecture.activation = Activation::Tanh;
  } else if (act == "relu") {
    c.architecture.activation = Activation::Relu;
  } else {
    throw Error(Errc::ConfigInvalid, "activation must be tanh or relu");
  }
  c.run_bounds = cfg.get_bool("run_bounds", c.run_bounds);
  c.bounds.histogram.bins = positive_int(cfg, "histogram_bins", c.bounds.histogram.bins);
  c.bounds.histogram.min_count = positive_int(cfg, "histogram_min_count", c.bounds.histogram.min_count);
  c.bounds.histogram.permutations = positive_int(cfg, "permutations", c.bounds.histogram.permutations);
  c.bounds.gls_threshold = cfg.get_double("gls_threshold", c.bounds.gls_threshold);
  c.bounds.slack = cfg.get_double("slack", c.bounds.slack);
  c.seed = seed_of(cfg);
  c.validate();
  return c;
}

GenerateSpec generate_spec_from(const KeyValueConfig& cfg, int default_k) {
  GenerateSpec g;
  const int k = positive_int(cfg, "k", default_k);
  const std::vector<double> uniform(static_cast<std::size_t>(k), 1.0 / k);
  g.source.k = k;
  g.source.d = positive_int(cfg, "d", 2);
  g.source.n = positive_int(cfg, "n_source", 2000);
  g.source.sigma = cfg.get_double("sigma", -1.0);
  g.source.label_dist = cfg.get_doubles("source_dist", uniform);
  g.source.stratified = cfg.get_bool("stratified", true);
  g.source.seed = static_cast<std::uint64_t>(cfg.get_int("data_seed", static_cast<long long>(seed_of(cfg))));
  g.target = g.source;
  g.target.tag = DomainTag::Target;
  g.target.n = positive_int(cfg, "n_target", 2000);
  g.target.label_dist = cfg.get_doubles("target_dist", g.source.label_dist);
  g.target.seed = g.source.seed + 1;
  g.subsample = cfg.get_double("subsample", 1.0);
  // Normalize here so hand-written distributions like "6,2,2" work.
  for (auto* d : {&g.source.label_dist, &g.target.label_dist}) {
    if (static_cast<int>(d->size()) != k) {
      throw Error(Errc::ConfigInvalid, "label distribution needs " + std::to_string(k) + " entries");
    }
    *d = Categorical::normalize(*d).probs();
  }
  return g;
}

DomainPair generate_pair(const GenerateSpec& spec) {
  DomainPair p{make_gaussian_domain(spec.source), make_gaussian_domain(spec.target)};
  if (spec.subsample < 1.0) p.source = subsample_protocol(p.source, spec.subsample, spec.source.seed + 2);
  return p;
}

ExperimentConfig experiment_from(const KeyValueConfig& cfg, int default_k) {
  ExperimentConfig ex;
  ex.train = train_config_from(cfg);
  for (const auto& name : cfg.get_strings("algorithms", {"dann", "iwdan"})) ex.algorithms.push_back(parse_algorithm(name));
  if (ex.algorithms.empty()) throw Error(Errc::ConfigInvalid, "no algorithms given");
  for (long long s : cfg.get_ints("seeds", {static_cast<long long>(ex.train.seed)})) {
    if (s < 0) throw Error(Errc::ConfigInvalid, "seeds must be non-negative");
    ex.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (ex.seeds.empty()) throw Error(Errc::ConfigInvalid, "at least one seed is required");
  ex.source_path = cfg.get_string("source", "");
  ex.target_path = cfg.get_string("target", "");
  ex.generate = generate_spec_from(cfg, default_k);
  ex.output_dir = cfg.get_string("out", ".");
  ex.jobs = positive_int(cfg, "jobs", 1);
  ex.full_precision = cfg.get_bool("full_precision", false);
  return ex;
}

void parallel_for(int n, int jobs, const std::function<void(int)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(jobs, n); ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(mu);
          if (!first) first = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::vector<SweepRow> run_jsd_sweep(const std::vector<ShiftTask>& tasks, const TrainConfig& config, Algorithm base,
                                    Algorithm variant, int jobs) {
  std::vector<SweepRow> rows(tasks.size());
  parallel_for(static_cast<int>(tasks.size()), jobs, [&](int i) {
    const auto& task = tasks[static_cast<std::size_t>(i)];
    TrainConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    c.algorithm = base;
    const double acc_base = train(c, task.source, task.target).trace.best_acc_tgt();
    c.algorithm = variant;
    const double acc_variant = train(c, task.source, task.target).trace.best_acc_tgt();
    rows[static_cast<std::size_t>(i)] = {i, task.jsd_label, acc_base, acc_variant};
  });
  return rows;
}

int run(int argc, const char* const* argv) {
  CLI::App app{"Domain adaptation under generalized label shift on synthetic data"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::vector<std::string> assignments;
  std::map<std::string, std::string> flags;

  auto common = [&](CLI::App* sub, std::vector<std::pair<std::string, std::string>> extra) {
    sub->add_option("-c,--config", config_path, "key = value config file");
    sub->add_option("-s,--set", assignments, "Override one key (key=value); repeatable");
    for (const auto& [flag, key] : extra) {
      sub->add_option_function<std::string>(flag, [&flags, key = key](const std::string& v) { flags[key] = v; },
                                            "Sets '" + key + "'");
    }
    sub->add_flag_callback("--full-precision", [&flags] { flags["full_precision"] = "true"; },
                           "Also write .raw.csv files at full precision");
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic source/target pair and a manifest");
  common(gen, {{"--seed", "seed"}, {"-o,--out", "out"}, {"--k", "k"}, {"--subsample", "subsample"}});
  auto* tr = app.add_subcommand("train", "Train algorithms over seeds; write traces, bounds and a summary");
  common(tr, {{"--seed", "seed"}, {"-o,--out", "out"}, {"--jobs", "jobs"}, {"--algorithms", "algorithms"},
              {"--seeds", "seeds"}, {"--epochs", "epochs"}, {"--source", "source"}, {"--target", "target"}});
  tr->add_flag_callback("--save-model", [&flags] { flags["save_model"] = "true"; }, "Write model checkpoints");
  auto* sw = app.add_subcommand("sweep-jsd", "Base vs weighted variant over tasks of varying label shift");
  common(sw, {{"--seed", "seed"}, {"-o,--out", "out"}, {"--jobs", "jobs"}, {"--tasks", "tasks"},
              {"--base", "base"}, {"--variant", "variant"}, {"--epochs", "epochs"}});
  auto* est = app.add_subcommand("estimate-weights", "Importance weights from prediction files");
  common(est, {{"-o,--out", "out"},
               {"--source-predictions", "source_predictions"},
               {"--source-labels", "source_labels"},
               {"--target-predictions", "target_predictions"},
               {"--p-source", "p_source"}});
  auto* ver = app.add_subcommand("verify-bounds", "Evaluate the bound suite for a saved model");
  common(ver, {{"--seed", "seed"}, {"-o,--out", "out"}, {"--source", "source"}, {"--target", "target"},
               {"--model", "model"}});

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    KeyValueConfig cfg = config_path.empty() ? KeyValueConfig{} : KeyValueConfig::load(config_path);
    for (const auto& a : assignments) cfg.set_assignment(a);
    for (const auto& [k, v] : flags) cfg.set(k, v);
    if (gen->parsed()) return cmd_generate(cfg);
    if (tr->parsed()) return cmd_train(cfg);
    if (sw->parsed()) return cmd_sweep(cfg);
    if (est->parsed()) return cmd_estimate(cfg);
    if (ver->parsed()) return cmd_verify(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace gls::cli
