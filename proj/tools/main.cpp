// Command-line front end: composes corpus generation, graph construction,
// meta-path mining, training, evaluation and detection into one binary.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error or
// training divergence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bridgesentry/checkpoint.hpp"
#include "bridgesentry/han.hpp"
#include "bridgesentry/ingest.hpp"
#include "bridgesentry/metapath.hpp"
#include "bridgesentry/pipeline.hpp"
#include "bridgesentry/synthgen.hpp"
#include "bridgesentry/types.hpp"
#include "bridgesentry/xbhg.hpp"

namespace fs = std::filesystem;
using namespace bridgesentry;

namespace {

void print_warnings(const std::vector<std::string>& warnings, const char* stage) {
  constexpr std::size_t kMax = 10;
  for (std::size_t i = 0; i < warnings.size() && i < kMax; ++i) {
    std::cerr << stage << ": warning: " << warnings[i] << '\n';
  }
  if (warnings.size() > kMax) {
    std::cerr << stage << ": ... and " << warnings.size() - kMax << " more warnings\n";
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path);
  out << text;
  if (!out.flush()) throw DataError("I/O failure writing: " + path);
}

struct GenCorpusArgs {
  synth::CorpusSpec spec;
  std::string out_dir;
};

struct BuildGraphsArgs {
  std::string records_path;
  std::string pairs_path;
  std::string config_path;
  std::string out_dir;
  int text_dim = 64;
  bool singles = false;
  std::string external_path;
};

struct MineArgs {
  std::string graphs_dir;
  double theta = 0.5;
  int lmin = 2;
  int lmax = 4;
  std::string mode = "indicator";
  std::string out_path;
};

struct TrainArgs {
  std::string graphs_dir;
  std::string metapaths_path;
  std::string config_path;
  std::string out_path;
  std::string ablation = "none";
  std::uint64_t seed = 42;
  bool seed_set = false;
  int epochs = 0;  // 0: keep config value
  std::string pooling;
};

struct EvaluateArgs {
  std::string model_path;
  std::string graphs_dir;
  int runs = 1;
  std::string report_path;
  std::uint64_t seed = 0;
  bool seed_set = false;
};

int run_gen_corpus(const GenCorpusArgs& args) {
  const synth::GeneratedCorpus corpus = synth::gen_corpus(args.spec);
  synth::write_corpus(corpus, args.out_dir);
  std::cout << "wrote " << corpus.behaviors.size() << " behaviors ("
            << args.spec.n_normal << " normal, 3x" << args.spec.n_per_attack
            << " attack) to " << args.out_dir << '\n';
  return 0;
}

int run_build_graphs(const BuildGraphsArgs& args) {
  const ingest::ParseResult parsed = ingest::parse_records(args.records_path);
  for (const auto& err : parsed.errors) {
    std::cerr << "build-graphs: " << args.records_path << ":" << err.line_number << ": "
              << err.message << '\n';
  }
  if (!parsed.errors.empty()) {
    std::cerr << "build-graphs: " << parsed.errors.size() << " malformed line(s) skipped\n";
  }
  const auto pairs = ingest::parse_pairs(args.pairs_path);
  const auto bridge_config = ingest::parse_bridge_config(args.config_path);

  ingest::LinkOptions options;
  options.include_singles = args.singles;
  const ingest::LinkResult linked = ingest::link_cross_chain(parsed.records, pairs, options);
  print_warnings(linked.warnings, "build-graphs");
  if (!linked.errors.empty()) {
    for (const auto& err : linked.errors) std::cerr << "build-graphs: error: " << err << '\n';
    throw DataError("unresolvable pairs in " + args.pairs_path);
  }

  xbhg::FeatureConfig feature_config;
  feature_config.text_dim = args.text_dim;
  xbhg::ExternalEmbeddings external;
  if (!args.external_path.empty()) {
    external = xbhg::ExternalEmbeddings::load(args.external_path);
    feature_config.use_external_embeddings = true;
    feature_config.external_path = args.external_path;
  }

  std::error_code ec;
  fs::create_directories(args.out_dir, ec);
  if (ec) throw DataError("cannot create directory: " + args.out_dir);

  std::vector<std::string> build_warnings;
  for (const auto& behavior : linked.behaviors) {
    xbhg::BuildResult built = xbhg::build_graph(behavior, bridge_config);
    build_warnings.insert(build_warnings.end(), built.warnings.begin(), built.warnings.end());
    xbhg::init_features(built.graph, feature_config,
                        feature_config.use_external_embeddings ? &external : nullptr);
    xbhg::validate(built.graph);
    xbhg::save_graph(built.graph, (fs::path(args.out_dir) / (behavior.behavior_id + ".json")).string());
  }
  print_warnings(build_warnings, "build-graphs");
  std::cout << "wrote " << linked.behaviors.size() << " graphs to " << args.out_dir << '\n';
  return 0;
}

int run_mine(const MineArgs& args) {
  if (args.lmin < 2 || args.lmax < args.lmin) {
    throw DataError("mine: need 2 <= lmin <= lmax");
  }
  const auto graphs = pipeline::load_graph_dir(args.graphs_dir);
  std::vector<const xbhg::XbhgGraph*> labeled;
  std::size_t unlabeled = 0;
  for (const auto& g : graphs) {
    if (g.label == Label::Unlabeled) {
      ++unlabeled;
    } else {
      labeled.push_back(&g);
    }
  }
  if (unlabeled > 0) {
    std::cerr << "mine: warning: skipping " << unlabeled << " unlabeled graph(s)\n";
  }

  std::vector<metapath::MetaPath> paths;
  for (int l = args.lmin; l <= args.lmax; ++l) {
    auto batch = metapath::enumerate_metapaths(l, metapath::default_node_types());
    paths.insert(paths.end(), std::make_move_iterator(batch.begin()),
                 std::make_move_iterator(batch.end()));
  }
  const metapath::FreqMode mode = args.mode == "mean_count" ? metapath::FreqMode::MeanCount
                                                            : metapath::FreqMode::Indicator;
  const metapath::FreqTable table = metapath::label_frequencies(labeled, paths, mode);
  const metapath::SelectionResult selection = metapath::select_differential(table, args.theta);
  if (selection.fell_back) {
    std::cerr << "mine: warning: no path exceeded theta=" << args.theta
              << ", falling back to all " << selection.selected.size() << " enumerated paths\n";
  }

  metapath::MinedSelection mined;
  mined.theta = args.theta;
  mined.mode = mode;
  mined.lmin = args.lmin;
  mined.lmax = args.lmax;
  mined.n_attack = table.n_attack;
  mined.n_normal = table.n_normal;
  mined.fell_back = selection.fell_back;
  mined.selected = selection.selected;
  metapath::save_selection(mined, args.out_path);
  std::cout << "selected " << mined.selected.size() << " of " << paths.size()
            << " meta-paths (theta=" << args.theta << ") -> " << args.out_path << '\n';
  return 0;
}

int run_train(const TrainArgs& args) {
  const auto graphs = pipeline::load_graph_dir(args.graphs_dir);
  const metapath::MinedSelection mined = metapath::load_selection(args.metapaths_path);

  pipeline::RunConfig config;
  if (!args.config_path.empty()) config = pipeline::load_run_config(args.config_path);
  config.theta = mined.theta;
  config.lmin = mined.lmin;
  config.lmax = mined.lmax;
  config.ablation = pipeline::ablation_from_name(args.ablation);
  if (args.seed_set) config.seed = args.seed;
  if (args.epochs > 0) config.epochs = args.epochs;
  if (!args.pooling.empty()) config.pooling = han::pooling_from_name(args.pooling);
  config.validate();

  std::vector<metapath::MetaPath> selected;
  for (const auto& s : mined.selected) selected.push_back(s.path);
  const auto paths = pipeline::effective_paths(config, selected);

  const auto corpus = pipeline::prepare_corpus(graphs, paths);
  std::vector<const han::GraphInputs*> train_set;
  for (const auto& inputs : corpus) train_set.push_back(&inputs);

  const pipeline::TrainResult result = pipeline::train(config, train_set, paths);
  han::save_checkpoint(result.checkpoint, args.out_path);
  write_text(args.out_path + ".log.jsonl", pipeline::serialize_run_log(result.log));
  std::cout << "trained " << config.epochs << " epochs on " << train_set.size()
            << " graphs (" << paths.size() << " meta-paths), final loss "
            << result.log.back().loss << " -> " << args.out_path << '\n';
  return 0;
}

int run_evaluate(const EvaluateArgs& args) {
  if (args.runs < 1) throw DataError("evaluate: --runs must be >= 1");
  const han::Checkpoint checkpoint = han::load_checkpoint(args.model_path);
  const auto graphs = pipeline::load_graph_dir(args.graphs_dir);

  pipeline::RunConfig config;
  config.seed = args.seed_set ? args.seed : checkpoint.train.seed;
  config.split_ratio = checkpoint.train.split_ratio;
  config.epochs = checkpoint.train.epochs;
  config.learning_rate = checkpoint.train.learning_rate;
  config.theta = checkpoint.train.theta;
  config.weight_decay = checkpoint.train.weight_decay;
  config.pooling = checkpoint.hp.pooling;
  config.ablation = pipeline::ablation_from_name(checkpoint.train.ablation);
  config.class_weights = checkpoint.train.class_weights == "uniform"
                             ? pipeline::ClassWeightMode::Uniform
                             : pipeline::ClassWeightMode::Balanced;
  config.model = checkpoint.hp;

  pipeline::DetectionReport report;
  if (args.runs == 1) {
    // Single run: score the stored parameters on the whole directory.
    const auto corpus = pipeline::prepare_corpus(graphs, checkpoint.selected_paths);
    std::vector<const han::GraphInputs*> test_set;
    for (const auto& inputs : corpus) test_set.push_back(&inputs);
    pipeline::RunReport run = pipeline::evaluate(checkpoint, test_set);
    report.config = config;
    report.runs.push_back(std::move(run));
    for (int c = 0; c < kNumClasses; ++c) {
      const auto& m = report.runs.front().per_class[static_cast<std::size_t>(c)];
      report.per_class[static_cast<std::size_t>(c)] = {{m.precision, 0.0}, {m.recall, 0.0}, {m.f1, 0.0}};
    }
    const auto& m = report.runs.front().macro_attack;
    report.macro_attack = {{m.precision, 0.0}, {m.recall, 0.0}, {m.f1, 0.0}};
  } else {
    // Repeated protocol: per seed, re-split, retrain with the checkpoint's
    // recipe, evaluate on the held-out split.
    report = pipeline::repeated_runs(config, graphs, checkpoint.selected_paths, args.runs);
  }
  pipeline::save_report(report, args.report_path);
  for (std::size_t r = 0; r < report.runs.size(); ++r) {
    if (report.runs[r].train_log.empty()) continue;
    write_text(args.report_path + ".run" + std::to_string(r) + ".log.jsonl",
               pipeline::serialize_run_log(report.runs[r].train_log));
  }
  std::cout << pipeline::render_report(report);
  return 0;
}

int run_detect(const std::string& model_path, const std::string& graph_path) {
  const han::Checkpoint checkpoint = han::load_checkpoint(model_path);
  const xbhg::XbhgGraph graph = xbhg::load_graph(graph_path);
  const han::GraphInputs inputs = han::GraphInputs::build(graph, checkpoint.selected_paths);
  const bool no_ham = checkpoint.train.ablation == "no_ham";
  const han::ForwardTrace trace = han::forward(checkpoint.params, inputs, no_ham);
  const Label pred = han::predict(trace.probs);
  std::cout << label_name(pred) << '\n';
  std::cout << "probabilities:";
  for (int c = 0; c < kNumClasses; ++c) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), " %s=%.6f", label_name(static_cast<Label>(c)).c_str(),
                  trace.probs(c));
    std::cout << buf;
  }
  std::cout << '\n';
  return 0;
}

int run_report(const std::string& in_path) {
  const pipeline::DetectionReport report = pipeline::load_report(in_path);
  std::cout << pipeline::render_report(report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-chain bridge attack detection over heterogeneous behavior graphs"};
  app.require_subcommand(1);

  GenCorpusArgs gen_args;
  auto* gen = app.add_subcommand("gen-corpus", "Generate a labeled synthetic corpus");
  gen->add_option("--seed", gen_args.spec.seed, "Corpus seed");
  gen->add_option("--n-normal", gen_args.spec.n_normal, "Number of normal behaviors");
  gen->add_option("--n-attack", gen_args.spec.n_per_attack, "Behaviors per attack class");
  gen->add_option("--noise", gen_args.spec.noise, "Benign noise probability")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--out", gen_args.out_dir, "Output directory")->required();

  BuildGraphsArgs build_args;
  auto* build = app.add_subcommand("build-graphs", "Build behavior graphs from trace files");
  build->add_option("--records", build_args.records_path, "records.jsonl path")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--pairs", build_args.pairs_path, "pairs.jsonl path")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--bridge-config", build_args.config_path, "bridge_config.json path")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", build_args.out_dir, "Output directory")->required();
  build->add_option("--text-dim", build_args.text_dim, "Text embedding dimension")
      ->check(CLI::PositiveNumber);
  build->add_flag("--singles", build_args.singles, "Emit unpaired records as single-sided behaviors");
  build->add_option("--external-embeddings", build_args.external_path,
                    "JSON file of precomputed text vectors")
      ->check(CLI::ExistingFile);

  MineArgs mine_args;
  auto* mine = app.add_subcommand("mine", "Mine differential meta-paths");
  mine->add_option("--graphs", mine_args.graphs_dir, "Graph directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  mine->add_option("--theta", mine_args.theta, "Selection threshold")->required();
  mine->add_option("--lmin", mine_args.lmin, "Minimum path length");
  mine->add_option("--lmax", mine_args.lmax, "Maximum path length");
  mine->add_option("--mode", mine_args.mode, "Frequency mode")
      ->check(CLI::IsMember({"indicator", "mean_count"}));
  mine->add_option("--out", mine_args.out_path, "Output metapaths.json")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a detection model");
  train->add_option("--graphs", train_args.graphs_dir, "Graph directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  train->add_option("--metapaths", train_args.metapaths_path, "Mined metapaths.json")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--config", train_args.config_path, "Run config JSON")
      ->check(CLI::ExistingFile);
  auto* seed_opt = train->add_option("--seed", train_args.seed, "Training seed");
  train->add_option("--epochs", train_args.epochs, "Override epoch count");
  train->add_option("--pooling", train_args.pooling, "Override pooling method")
      ->check(CLI::IsMember({"mean", "max", "att"}));
  train->add_option("--ablation", train_args.ablation, "Ablation switch")
      ->check(CLI::IsMember({"none", "no_dme", "no_ham"}));
  train->add_option("--out", train_args.out_path, "Output checkpoint path")->required();

  EvaluateArgs eval_args;
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate with repeated seeded runs");
  evaluate->add_option("--model", eval_args.model_path, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--graphs", eval_args.graphs_dir, "Graph directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--runs", eval_args.runs, "Number of seeded runs");
  auto* eval_seed_opt = evaluate->add_option("--seed", eval_args.seed, "Base seed override");
  evaluate->add_option("--report", eval_args.report_path, "Output report JSON")->required();

  std::string detect_model, detect_graph;
  auto* detect = app.add_subcommand("detect", "Classify one behavior graph");
  detect->add_option("--model", detect_model, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  detect->add_option("--graph", detect_graph, "Graph JSON path")
      ->required()
      ->check(CLI::ExistingFile);

  std::string report_in;
  auto* report = app.add_subcommand("report", "Render a report file as a table");
  report->add_option("--in", report_in, "Report JSON path")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (dynamic_cast<const CLI::RequiredError*>(&e) != nullptr) {
      std::cerr << app.help();
      return 1;
    }
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    train_args.seed_set = seed_opt->count() > 0;
    eval_args.seed_set = eval_seed_opt->count() > 0;
    if (gen->parsed()) return run_gen_corpus(gen_args);
    if (build->parsed()) return run_build_graphs(build_args);
    if (mine->parsed()) return run_mine(mine_args);
    if (train->parsed()) return run_train(train_args);
    if (evaluate->parsed()) return run_evaluate(eval_args);
    if (detect->parsed()) return run_detect(detect_model, detect_graph);
    if (report->parsed()) return run_report(report_in);
  } catch (const TrainingDiverged& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 1;
}
