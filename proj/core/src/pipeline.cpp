#include "bridgesentry/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include <nlohmann/json.hpp>

#include "bridgesentry/rng.hpp"

namespace bridgesentry::pipeline {

using nlohmann::json;

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoDme: return "no_dme";
    case Ablation::NoHam: return "no_ham";
  }
  return "none";
}

Ablation ablation_from_name(const std::string& s) {
  if (s == "none") return Ablation::None;
  if (s == "no_dme") return Ablation::NoDme;
  if (s == "no_ham") return Ablation::NoHam;
  throw DataError("unknown ablation: " + s);
}

void RunConfig::validate() const {
  if (split_ratio <= 0.0 || split_ratio >= 1.0) {
    throw DataError("config: split_ratio must be in (0, 1)");
  }
  if (epochs < 1) throw DataError("config: epochs must be >= 1");
  if (learning_rate <= 0.0) throw DataError("config: learning_rate must be positive");
  if (theta < 0.0) throw DataError("config: theta must be >= 0");
  if (lmin < 2 || lmax < lmin) throw DataError("config: need 2 <= lmin <= lmax");
  model.validate();
}

std::string serialize_run_config(const RunConfig& config) {
  const json j = {{"seed", config.seed},
                  {"split_ratio", config.split_ratio},
                  {"epochs", config.epochs},
                  {"learning_rate", config.learning_rate},
                  {"theta", config.theta},
                  {"pooling", han::pooling_name(config.pooling)},
                  {"ablation", ablation_name(config.ablation)},
                  {"class_weights",
                   config.class_weights == ClassWeightMode::Balanced ? "balanced" : "uniform"},
                  {"weight_decay", config.weight_decay},
                  {"lmin", config.lmin},
                  {"lmax", config.lmax},
                  {"model",
                   {{"embed_dim", config.model.embed_dim},
                    {"heads", config.model.heads},
                    {"semantic_dim", config.model.semantic_dim},
                    {"leaky_slope", config.model.leaky_slope},
                    {"text_dim", config.model.text_dim}}}};
  return j.dump(2);
}

RunConfig parse_run_config(const std::string& json_text) {
  json j = json::parse(json_text);
  RunConfig config;
  config.seed = j.value("seed", config.seed);
  config.split_ratio = j.value("split_ratio", config.split_ratio);
  config.epochs = j.value("epochs", config.epochs);
  config.learning_rate = j.value("learning_rate", config.learning_rate);
  config.theta = j.value("theta", config.theta);
  if (j.contains("pooling")) config.pooling = han::pooling_from_name(j.at("pooling").get<std::string>());
  if (j.contains("ablation")) config.ablation = ablation_from_name(j.at("ablation").get<std::string>());
  if (j.contains("class_weights")) {
    const std::string mode = j.at("class_weights").get<std::string>();
    if (mode == "balanced") {
      config.class_weights = ClassWeightMode::Balanced;
    } else if (mode == "uniform") {
      config.class_weights = ClassWeightMode::Uniform;
    } else {
      throw DataError("config: unknown class_weights mode " + mode);
    }
  }
  config.weight_decay = j.value("weight_decay", config.weight_decay);
  config.lmin = j.value("lmin", config.lmin);
  config.lmax = j.value("lmax", config.lmax);
  if (j.contains("model")) {
    const json& mj = j.at("model");
    config.model.embed_dim = mj.value("embed_dim", config.model.embed_dim);
    config.model.heads = mj.value("heads", config.model.heads);
    config.model.semantic_dim = mj.value("semantic_dim", config.model.semantic_dim);
    config.model.leaky_slope = mj.value("leaky_slope", config.model.leaky_slope);
    config.model.text_dim = mj.value("text_dim", config.model.text_dim);
  }
  config.validate();
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open config: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

SplitResult split_dataset(const std::vector<Label>& labels, double ratio, std::uint64_t seed) {
  if (ratio <= 0.0 || ratio >= 1.0) throw DataError("split: ratio must be in (0, 1)");
  SplitResult result;
  Rng rng(seed);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (static_cast<int>(labels[i]) == c) members.push_back(i);
    }
    if (members.empty()) continue;
    if (members.size() < 2) {
      result.warnings.push_back("class " + label_name(static_cast<Label>(c)) +
                                " has a single sample, forced into the training set");
      result.train.push_back(members.front());
      continue;
    }
    rng.shuffle(members);
    const auto n = members.size();
    auto train_n = static_cast<std::size_t>(
        std::llround(ratio * static_cast<double>(n)));
    train_n = std::clamp<std::size_t>(train_n, 1, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
      (i < train_n ? result.train : result.test).push_back(members[i]);
    }
  }
  std::sort(result.train.begin(), result.train.end());
  std::sort(result.test.begin(), result.test.end());
  return result;
}

Eigen::VectorXd compute_class_weights(const std::vector<Label>& labels) {
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(kNumClasses);
  for (const Label l : labels) {
    const int c = static_cast<int>(l);
    if (c < 0 || c >= kNumClasses) throw DataError("class weights: unlabeled sample");
    counts(c) += 1.0;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts(c) == 0.0) {
      throw DataError("class weights: class " + label_name(static_cast<Label>(c)) + " is absent");
    }
  }
  const double n = static_cast<double>(labels.size());
  Eigen::VectorXd weights(kNumClasses);
  for (int c = 0; c < kNumClasses; ++c) {
    weights(c) = n / (kNumClasses * counts(c));
  }
  return weights;
}

std::vector<metapath::MetaPath> effective_paths(const RunConfig& config,
                                                const std::vector<metapath::MetaPath>& selected) {
  if (config.ablation != Ablation::NoDme) return selected;
  std::vector<metapath::MetaPath> all;
  for (int l = config.lmin; l <= config.lmax; ++l) {
    auto batch = metapath::enumerate_metapaths(l, metapath::default_node_types());
    all.insert(all.end(), std::make_move_iterator(batch.begin()),
               std::make_move_iterator(batch.end()));
  }
  return all;
}

std::vector<han::GraphInputs> prepare_corpus(const std::vector<xbhg::XbhgGraph>& graphs,
                                             const std::vector<metapath::MetaPath>& paths) {
  std::vector<han::GraphInputs> inputs(graphs.size());
  // Read-only construction, parallel over fixed chunks.
  constexpr std::size_t kChunks = 8;
  std::vector<std::future<void>> futures;
  for (std::size_t c = 0; c < kChunks; ++c) {
    futures.push_back(std::async(std::launch::async, [&, c] {
      const std::size_t begin = graphs.size() * c / kChunks;
      const std::size_t end = graphs.size() * (c + 1) / kChunks;
      for (std::size_t i = begin; i < end; ++i) {
        inputs[i] = han::GraphInputs::build(graphs[i], paths);
      }
    }));
  }
  for (auto& f : futures) f.get();
  return inputs;
}

TrainResult train(const RunConfig& config, const std::vector<const han::GraphInputs*>& train_set,
                  const std::vector<metapath::MetaPath>& paths) {
  config.validate();
  if (train_set.empty()) throw DataError("train: empty training set");
  const bool no_ham = config.ablation == Ablation::NoHam;
  if (!no_ham && paths.empty()) throw DataError("train: no meta-paths");

  std::vector<Label> labels;
  labels.reserve(train_set.size());
  for (const auto* g : train_set) labels.push_back(g->label);
  const Eigen::VectorXd weights = config.class_weights == ClassWeightMode::Balanced
                                      ? compute_class_weights(labels)
                                      : Eigen::VectorXd::Ones(kNumClasses);

  han::HyperParams hp = config.model;
  hp.pooling = config.pooling;
  hp.validate();

  Rng init_rng(splitmix64(config.seed ^ 0x1234abcdULL));
  han::ModelParams params = han::ModelParams::glorot(hp, static_cast<int>(paths.size()), init_rng);
  han::Adam optimizer(params, config.learning_rate, config.weight_decay);

  // Fixed chunk count keeps the floating-point merge order independent of
  // the machine's thread count.
  constexpr std::size_t kChunks = 8;
  struct Chunk {
    han::ModelParams grads;
    double loss_sum = 0.0;
  };
  std::vector<Chunk> chunks;
  chunks.reserve(kChunks);
  for (std::size_t c = 0; c < kChunks; ++c) {
    chunks.push_back({han::ModelParams::zeros(hp, static_cast<int>(paths.size())), 0.0});
  }

  const double inv_batch = 1.0 / static_cast<double>(train_set.size());
  TrainResult result;
  result.log.reserve(static_cast<std::size_t>(config.epochs));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::future<void>> futures;
    for (std::size_t c = 0; c < kChunks; ++c) {
      futures.push_back(std::async(std::launch::async, [&, c] {
        auto& chunk = chunks[c];
        chunk.loss_sum = 0.0;
        chunk.grads.visit([](const std::string&, auto& t) { t.setZero(); });
        const std::size_t begin = train_set.size() * c / kChunks;
        const std::size_t end = train_set.size() * (c + 1) / kChunks;
        for (std::size_t i = begin; i < end; ++i) {
          const han::GraphInputs& inputs = *train_set[i];
          const han::ForwardTrace trace = han::forward(params, inputs, no_ham);
          const int y = static_cast<int>(inputs.label);
          chunk.loss_sum +=
              weights(y) * -std::log(std::max(trace.probs(y), 1e-12));
          han::accumulate_gradients(params, inputs, trace, weights(y) * inv_batch, chunk.grads);
        }
      }));
    }
    for (auto& f : futures) f.get();

    han::ModelParams& grads = chunks.front().grads;
    double loss_sum = chunks.front().loss_sum;
    std::vector<std::pair<double*, Eigen::Index>> dst;
    grads.visit([&](const std::string&, auto& t) { dst.emplace_back(t.data(), t.size()); });
    for (std::size_t c = 1; c < kChunks; ++c) {  // merge in fixed chunk order
      loss_sum += chunks[c].loss_sum;
      std::size_t idx = 0;
      chunks[c].grads.visit([&](const std::string&, const auto& t) {
        Eigen::Map<Eigen::VectorXd>(dst[idx].first, dst[idx].second) +=
            Eigen::Map<const Eigen::VectorXd>(t.data(), t.size());
        ++idx;
      });
    }
    const double epoch_loss = loss_sum * inv_batch;
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch);
    han::check_finite(grads);
    optimizer.step(params, grads);
    result.log.push_back({epoch, epoch_loss});
  }

  result.checkpoint.hp = hp;
  result.checkpoint.selected_paths = paths;
  result.checkpoint.params = std::move(params);
  result.checkpoint.train.seed = config.seed;
  result.checkpoint.train.epochs = config.epochs;
  result.checkpoint.train.learning_rate = config.learning_rate;
  result.checkpoint.train.split_ratio = config.split_ratio;
  result.checkpoint.train.theta = config.theta;
  result.checkpoint.train.weight_decay = config.weight_decay;
  result.checkpoint.train.ablation = ablation_name(config.ablation);
  result.checkpoint.train.class_weights =
      config.class_weights == ClassWeightMode::Balanced ? "balanced" : "uniform";
  return result;
}

namespace {

ClassMetrics metrics_from_counts(int tp, int fp, int fn, bool absent) {
  ClassMetrics m;
  m.absent = absent;
  m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  m.f1 = (m.precision + m.recall) > 0.0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

Aggregate aggregate_of(const std::vector<double>& values) {
  Aggregate a;
  if (values.empty()) return a;
  double sum = 0.0;
  for (const double v : values) sum += v;
  a.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (const double v : values) sq += (v - a.mean) * (v - a.mean);
    a.stddev = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return a;
}

}  // namespace

RunReport report_from_confusion(
    const std::array<std::array<int, kNumClasses>, kNumClasses>& confusion) {
  RunReport report;
  report.confusion = confusion;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto cu = static_cast<std::size_t>(c);
    const int tp = confusion[cu][cu];
    int truth_total = 0, pred_total = 0;
    for (int o = 0; o < kNumClasses; ++o) {
      truth_total += confusion[cu][static_cast<std::size_t>(o)];
      pred_total += confusion[static_cast<std::size_t>(o)][cu];
    }
    report.per_class[cu] = metrics_from_counts(tp, pred_total - tp, truth_total - tp,
                                               truth_total == 0 && pred_total == 0);
  }
  double p = 0.0, r = 0.0, f = 0.0;
  for (int c = 1; c < kNumClasses; ++c) {
    p += report.per_class[static_cast<std::size_t>(c)].precision;
    r += report.per_class[static_cast<std::size_t>(c)].recall;
    f += report.per_class[static_cast<std::size_t>(c)].f1;
  }
  report.macro_attack.precision = p / 3.0;
  report.macro_attack.recall = r / 3.0;
  report.macro_attack.f1 = f / 3.0;
  return report;
}

RunReport evaluate(const han::Checkpoint& checkpoint,
                   const std::vector<const han::GraphInputs*>& test_set) {
  if (test_set.empty()) throw DataError("evaluate: empty test set");
  const bool no_ham = checkpoint.train.ablation == "no_ham";

  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};
  for (auto& row : confusion) row.fill(0);
  for (const auto* inputs : test_set) {
    const int truth = static_cast<int>(inputs->label);
    if (truth < 0 || truth >= kNumClasses) {
      throw DataError("evaluate: graph " + inputs->graph_id + " is unlabeled");
    }
    const han::ForwardTrace trace = han::forward(checkpoint.params, *inputs, no_ham);
    const int pred = static_cast<int>(han::predict(trace.probs));
    ++confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
  }
  RunReport report = report_from_confusion(confusion);
  report.seed = checkpoint.train.seed;
  return report;
}

DetectionReport repeated_runs_prepared(const RunConfig& config,
                                       const std::vector<han::GraphInputs>& corpus,
                                       const std::vector<metapath::MetaPath>& paths, int k) {
  if (k < 1) throw DataError("repeated_runs: k must be >= 1");
  config.validate();

  std::vector<Label> labels;
  labels.reserve(corpus.size());
  for (const auto& g : corpus) labels.push_back(g.label);

  DetectionReport report;
  report.config = config;
  for (int run = 0; run < k; ++run) {
    RunConfig run_config = config;
    run_config.seed = config.seed + static_cast<std::uint64_t>(run);
    const SplitResult split = split_dataset(labels, config.split_ratio, run_config.seed);
    for (const auto& w : split.warnings) report.flags.push_back(w);

    std::vector<const han::GraphInputs*> train_set, test_set;
    for (const std::size_t i : split.train) train_set.push_back(&corpus[i]);
    for (const std::size_t i : split.test) test_set.push_back(&corpus[i]);

    try {
      TrainResult trained = train(run_config, train_set, paths);
      RunReport run_report = evaluate(trained.checkpoint, test_set);
      run_report.seed = run_config.seed;
      run_report.train_log = std::move(trained.log);
      report.runs.push_back(std::move(run_report));
    } catch (const TrainingDiverged& e) {
      report.flags.push_back("run with seed " + std::to_string(run_config.seed) +
                             " aborted: " + e.what());
    }
  }
  if (report.runs.empty()) {
    throw DataError("repeated_runs: every run aborted");
  }

  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> ps, rs, fs;
    for (const auto& run : report.runs) {
      ps.push_back(run.per_class[static_cast<std::size_t>(c)].precision);
      rs.push_back(run.per_class[static_cast<std::size_t>(c)].recall);
      fs.push_back(run.per_class[static_cast<std::size_t>(c)].f1);
    }
    report.per_class[static_cast<std::size_t>(c)] = {aggregate_of(ps), aggregate_of(rs),
                                                     aggregate_of(fs)};
  }
  std::vector<double> ps, rs, fs;
  for (const auto& run : report.runs) {
    ps.push_back(run.macro_attack.precision);
    rs.push_back(run.macro_attack.recall);
    fs.push_back(run.macro_attack.f1);
  }
  report.macro_attack = {aggregate_of(ps), aggregate_of(rs), aggregate_of(fs)};
  return report;
}

DetectionReport repeated_runs(const RunConfig& config, const std::vector<xbhg::XbhgGraph>& graphs,
                              const std::vector<metapath::MetaPath>& selected_paths, int k) {
  const auto paths = effective_paths(config, selected_paths);
  const auto corpus = prepare_corpus(graphs, paths);
  return repeated_runs_prepared(config, corpus, paths, k);
}

namespace {

json metrics_json(const ClassMetrics& m) {
  return {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}, {"absent", m.absent}};
}

ClassMetrics metrics_from_json(const json& j) {
  ClassMetrics m;
  m.precision = j.at("precision").get<double>();
  m.recall = j.at("recall").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.absent = j.at("absent").get<bool>();
  return m;
}

json aggregate_json(const MetricAggregate& a) {
  return {{"precision", {{"mean", a.precision.mean}, {"std", a.precision.stddev}}},
          {"recall", {{"mean", a.recall.mean}, {"std", a.recall.stddev}}},
          {"f1", {{"mean", a.f1.mean}, {"std", a.f1.stddev}}}};
}

MetricAggregate aggregate_from_json(const json& j) {
  MetricAggregate a;
  a.precision = {j.at("precision").at("mean").get<double>(),
                 j.at("precision").at("std").get<double>()};
  a.recall = {j.at("recall").at("mean").get<double>(), j.at("recall").at("std").get<double>()};
  a.f1 = {j.at("f1").at("mean").get<double>(), j.at("f1").at("std").get<double>()};
  return a;
}

}  // namespace

std::string serialize_report(const DetectionReport& report) {
  json runs = json::array();
  for (const auto& run : report.runs) {
    json confusion = json::array();
    for (const auto& row : run.confusion) confusion.push_back(row);
    json per_class = json::object();
    for (int c = 0; c < kNumClasses; ++c) {
      per_class[label_name(static_cast<Label>(c))] =
          metrics_json(run.per_class[static_cast<std::size_t>(c)]);
    }
    runs.push_back({{"seed", run.seed},
                    {"confusion", confusion},
                    {"per_class", per_class},
                    {"macro_attack", metrics_json(run.macro_attack)}});
  }
  json per_class = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    per_class[label_name(static_cast<Label>(c))] =
        aggregate_json(report.per_class[static_cast<std::size_t>(c)]);
  }
  const json j = {{"version", 1},
                  {"config", json::parse(serialize_run_config(report.config))},
                  {"runs", runs},
                  {"aggregate",
                   {{"per_class", per_class}, {"macro_attack", aggregate_json(report.macro_attack)}}},
                  {"flags", report.flags}};
  return j.dump(2);
}

DetectionReport parse_report(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("version").get<int>() != 1) throw DataError("report: unsupported version");
  DetectionReport report;
  report.config = parse_run_config(j.at("config").dump());
  for (const auto& rj : j.at("runs")) {
    RunReport run;
    run.seed = rj.at("seed").get<std::uint64_t>();
    const auto& confusion = rj.at("confusion");
    for (int t = 0; t < kNumClasses; ++t) {
      for (int p = 0; p < kNumClasses; ++p) {
        run.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] =
            confusion.at(t).at(p).get<int>();
      }
    }
    for (int c = 0; c < kNumClasses; ++c) {
      run.per_class[static_cast<std::size_t>(c)] =
          metrics_from_json(rj.at("per_class").at(label_name(static_cast<Label>(c))));
    }
    run.macro_attack = metrics_from_json(rj.at("macro_attack"));
    report.runs.push_back(std::move(run));
  }
  for (int c = 0; c < kNumClasses; ++c) {
    report.per_class[static_cast<std::size_t>(c)] =
        aggregate_from_json(j.at("aggregate").at("per_class").at(label_name(static_cast<Label>(c))));
  }
  report.macro_attack = aggregate_from_json(j.at("aggregate").at("macro_attack"));
  report.flags = j.at("flags").get<std::vector<std::string>>();
  return report;
}

DetectionReport load_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open report: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_report(text.str());
}

void save_report(const DetectionReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write report: " + path);
  out << serialize_report(report) << '\n';
  if (!out) throw DataError("I/O failure writing: " + path);
}

std::string render_report(const DetectionReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line),
                "Detection report: %zu run(s), pooling=%s, theta=%.2f, ablation=%s\n",
                report.runs.size(), han::pooling_name(report.config.pooling).c_str(),
                report.config.theta, ablation_name(report.config.ablation).c_str());
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %-22s %-22s %-22s\n", "Category", "Precision",
                "Recall", "F1-score");
  out << line;
  const auto cell = [](const Aggregate& a) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%6.2f%% +- %6.2f%%", 100.0 * a.mean, 100.0 * a.stddev);
    return std::string(buf);
  };
  for (int c = 0; c < kNumClasses; ++c) {
    const auto& m = report.per_class[static_cast<std::size_t>(c)];
    std::snprintf(line, sizeof(line), "%-12s %-22s %-22s %-22s\n",
                  label_name(static_cast<Label>(c)).c_str(), cell(m.precision).c_str(),
                  cell(m.recall).c_str(), cell(m.f1).c_str());
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %-22s %-22s %-22s\n", "Attack avg",
                cell(report.macro_attack.precision).c_str(),
                cell(report.macro_attack.recall).c_str(), cell(report.macro_attack.f1).c_str());
  out << line;
  if (!report.flags.empty()) {
    out << "Flags:\n";
    for (const auto& f : report.flags) out << "  - " << f << '\n';
  }
  return out.str();
}

std::string serialize_run_log(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  for (const auto& entry : log) {
    const json j = {{"epoch", entry.epoch}, {"loss", entry.loss}};
    out << j.dump() << '\n';
  }
  return out.str();
}

std::vector<xbhg::XbhgGraph> load_graph_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<xbhg::XbhgGraph> graphs;
  graphs.reserve(files.size());
  for (const auto& file : files) graphs.push_back(xbhg::load_graph(file));
  return graphs;
}

}  // namespace bridgesentry::pipeline
