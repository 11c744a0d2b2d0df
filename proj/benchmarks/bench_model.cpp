#include <benchmark/benchmark.h>

#include "bridgesentry/han.hpp"
#include "bridgesentry/pipeline.hpp"
#include "bridgesentry/synthgen.hpp"

using namespace bridgesentry;

namespace {

struct ModelFixture {
  std::vector<han::GraphInputs> inputs;
  han::ModelParams params;
  Eigen::VectorXd weights;

  ModelFixture() : params(make_params()) {
    synth::CorpusSpec spec;
    spec.seed = 23;
    spec.n_normal = 16;
    spec.n_per_attack = 4;
    const synth::GeneratedCorpus corpus = synth::gen_corpus(spec);
    xbhg::FeatureConfig fc;
    fc.text_dim = 64;
    std::vector<xbhg::XbhgGraph> graphs;
    for (const auto& behavior : corpus.behaviors) {
      xbhg::BuildResult built = xbhg::build_graph(behavior, corpus.bridge_config);
      xbhg::init_features(built.graph, fc);
      graphs.push_back(std::move(built.graph));
    }
    inputs = pipeline::prepare_corpus(graphs, bench_paths());
    std::vector<Label> labels;
    for (const auto& g : graphs) labels.push_back(g.label);
    weights = pipeline::compute_class_weights(labels);
  }

  static std::vector<metapath::MetaPath> bench_paths() {
    using metapath::MetaPath;
    return {MetaPath::from_string("URT"), MetaPath::from_string("RTL"),
            MetaPath::from_string("OOOO"), MetaPath::from_string("UOR"),
            MetaPath::from_string("TO"),  MetaPath::from_string("TU")};
  }

  static han::ModelParams make_params() {
    han::HyperParams hp;  // defaults: d=64, 4 heads, d_s=64, text 64
    Rng rng(7);
    return han::ModelParams::glorot(hp, 6, rng);
  }
};

void BM_Forward(benchmark::State& state) {
  const ModelFixture fixture;
  std::size_t k = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(han::forward(fixture.params, fixture.inputs[k % fixture.inputs.size()]));
    ++k;
  }
}
BENCHMARK(BM_Forward);

void BM_BatchGradients(benchmark::State& state) {
  const ModelFixture fixture;
  std::vector<const han::GraphInputs*> batch;
  for (const auto& g : fixture.inputs) batch.push_back(&g);
  for (auto _ : state) {
    benchmark::DoNotOptimize(han::gradients(fixture.params, batch, fixture.weights));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_BatchGradients)->Unit(benchmark::kMillisecond);

void BM_TrainEpochs(benchmark::State& state) {
  synth::CorpusSpec spec;
  spec.seed = 29;
  spec.n_normal = 20;
  spec.n_per_attack = 5;
  const synth::GeneratedCorpus corpus = synth::gen_corpus(spec);
  xbhg::FeatureConfig fc;
  fc.text_dim = 64;
  std::vector<xbhg::XbhgGraph> graphs;
  for (const auto& behavior : corpus.behaviors) {
    xbhg::BuildResult built = xbhg::build_graph(behavior, corpus.bridge_config);
    xbhg::init_features(built.graph, fc);
    graphs.push_back(std::move(built.graph));
  }
  pipeline::RunConfig config;
  config.epochs = static_cast<int>(state.range(0));
  const auto paths = ModelFixture::bench_paths();
  const auto prepared = pipeline::prepare_corpus(graphs, paths);
  std::vector<const han::GraphInputs*> train_set;
  for (const auto& g : prepared) train_set.push_back(&g);
  for (auto _ : state) {
    benchmark::DoNotOptimize(pipeline::train(config, train_set, paths));
  }
}
BENCHMARK(BM_TrainEpochs)->Arg(10)->Unit(benchmark::kMillisecond);

}  // namespace
