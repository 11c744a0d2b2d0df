#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bridgesentry/checkpoint.hpp"
#include "bridgesentry/han.hpp"
#include "bridgesentry/metapath.hpp"
#include "bridgesentry/xbhg.hpp"

namespace bridgesentry::pipeline {

enum class Ablation { None, NoDme, NoHam };

std::string ablation_name(Ablation a);
Ablation ablation_from_name(const std::string& s);

enum class ClassWeightMode { Balanced, Uniform };

struct RunConfig {
  std::uint64_t seed = 42;
  double split_ratio = 0.8;
  int epochs = 200;
  double learning_rate = 0.01;
  double theta = 0.5;
  han::Pooling pooling = han::Pooling::Max;
  Ablation ablation = Ablation::None;
  ClassWeightMode class_weights = ClassWeightMode::Balanced;
  double weight_decay = 0.0;
  int lmin = 2;
  int lmax = 4;
  han::HyperParams model;

  void validate() const;
};

std::string serialize_run_config(const RunConfig& config);
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);

struct SplitResult {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

// Stratified split, deterministic given seed. Classes with a single sample
// are forced into the training set with a warning.
SplitResult split_dataset(const std::vector<Label>& labels, double ratio, std::uint64_t seed);

// Balanced weights w_j = n / (C * n_j); the sample-weighted mean is 1 by
// construction. Every class must be present.
Eigen::VectorXd compute_class_weights(const std::vector<Label>& labels);

// The path set a config actually trains on: the mined selection, or the full
// enumeration when the differential extractor is ablated.
std::vector<metapath::MetaPath> effective_paths(const RunConfig& config,
                                                const std::vector<metapath::MetaPath>& selected);

// Per-graph model inputs for a fixed path set; built once, shared by runs.
std::vector<han::GraphInputs> prepare_corpus(const std::vector<xbhg::XbhgGraph>& graphs,
                                             const std::vector<metapath::MetaPath>& paths);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
};

struct TrainResult {
  han::Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

// Full-batch Adam for config.epochs epochs; deterministic given config.seed.
// Divergence aborts with the epoch index.
TrainResult train(const RunConfig& config, const std::vector<const han::GraphInputs*>& train_set,
                  const std::vector<metapath::MetaPath>& paths);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool absent = false;  // class in neither truth nor prediction
};

struct RunReport {
  std::uint64_t seed = 0;
  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};  // [truth][pred]
  std::array<ClassMetrics, kNumClasses> per_class;
  ClassMetrics macro_attack;  // unweighted mean over the three attack classes
  std::vector<EpochLog> train_log;
};

RunReport evaluate(const han::Checkpoint& checkpoint,
                   const std::vector<const han::GraphInputs*>& test_set);

// Per-class P/R/F1 and attack-macro averages from a [truth][pred] confusion
// matrix, with the 0-convention when a denominator vanishes.
RunReport report_from_confusion(
    const std::array<std::array<int, kNumClasses>, kNumClasses>& confusion);

struct Aggregate {
  double mean = 0.0;
  double stddev = 0.0;  // sample std over runs; 0 when there is one run
};

struct MetricAggregate {
  Aggregate precision, recall, f1;
};

struct DetectionReport {
  RunConfig config;
  std::vector<RunReport> runs;
  std::array<MetricAggregate, kNumClasses> per_class;
  MetricAggregate macro_attack;
  std::vector<std::string> flags;
};

// k seeded runs (seed, seed+1, ...): stratified split, fresh training,
// evaluation; aggregates mean +- sample std. Aborted runs are skipped with a
// flag.
DetectionReport repeated_runs(const RunConfig& config, const std::vector<xbhg::XbhgGraph>& graphs,
                              const std::vector<metapath::MetaPath>& selected_paths, int k = 5);

// Same protocol on a prepared corpus (path set already resolved).
DetectionReport repeated_runs_prepared(const RunConfig& config,
                                       const std::vector<han::GraphInputs>& corpus,
                                       const std::vector<metapath::MetaPath>& paths, int k);

std::string serialize_report(const DetectionReport& report);
DetectionReport parse_report(const std::string& json_text);
DetectionReport load_report(const std::string& path);
void save_report(const DetectionReport& report, const std::string& path);

// Renders the per-class precision/recall/F1 table with mean +- std cells.
std::string render_report(const DetectionReport& report);

std::string serialize_run_log(const std::vector<EpochLog>& log);

// Loads every *.json graph in a directory, sorted by filename.
std::vector<xbhg::XbhgGraph> load_graph_dir(const std::string& dir);

}  // namespace bridgesentry::pipeline
