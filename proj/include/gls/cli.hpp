#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gls/config.hpp"
#include "gls/csv_io.hpp"
#include "gls/datagen.hpp"
#include "gls/trainer.hpp"

namespace gls::cli {

/// Entry point behind the gls_adapt binary. Returns the process exit code.
int run(int argc, const char* const* argv);

/// Seed used when neither the config nor a flag sets one: GLS_ADAPT_SEED, else 0.
std::uint64_t default_seed();

/// Training settings read from the flat config (keys as documented in the README).
TrainConfig train_config_from(const KeyValueConfig& cfg);

/// Source and target specs for generated data.
struct GenerateSpec {
  DomainSpec source;
  DomainSpec target;
  double subsample = 1.0;  // protocol fraction applied to the source
};
GenerateSpec generate_spec_from(const KeyValueConfig& cfg, int default_k);

struct DomainPair {
  Dataset source;
  Dataset target;
};
DomainPair generate_pair(const GenerateSpec& spec);

/// Everything a train or sweep run needs.
struct ExperimentConfig {
  TrainConfig train;
  std::vector<Algorithm> algorithms;
  std::vector<std::uint64_t> seeds;
  std::string source_path;  // empty: generate
  std::string target_path;
  GenerateSpec generate;
  std::string output_dir = ".";
  int jobs = 1;
  bool full_precision = false;
};
ExperimentConfig experiment_from(const KeyValueConfig& cfg, int default_k);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown after the join.
void parallel_for(int n, int jobs, const std::function<void(int)>& fn);

/// Trains `base` and `variant` on every task (seed = base seed + task index)
/// and scores each by its best target accuracy.
std::vector<SweepRow> run_jsd_sweep(const std::vector<ShiftTask>& tasks, const TrainConfig& config, Algorithm base,
                                    Algorithm variant, int jobs);

}  // namespace gls::cli
