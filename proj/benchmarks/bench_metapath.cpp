#include <benchmark/benchmark.h>

#include "bridgesentry/metapath.hpp"
#include "bridgesentry/synthgen.hpp"
#include "bridgesentry/xbhg.hpp"

using namespace bridgesentry;

namespace {

std::vector<xbhg::XbhgGraph> bench_graphs(int n_normal, int n_attack) {
  synth::CorpusSpec spec;
  spec.seed = 17;
  spec.n_normal = n_normal;
  spec.n_per_attack = n_attack;
  const synth::GeneratedCorpus corpus = synth::gen_corpus(spec);
  xbhg::FeatureConfig fc;
  fc.text_dim = 64;
  std::vector<xbhg::XbhgGraph> graphs;
  for (const auto& behavior : corpus.behaviors) {
    xbhg::BuildResult built = xbhg::build_graph(behavior, corpus.bridge_config);
    xbhg::init_features(built.graph, fc);
    graphs.push_back(std::move(built.graph));
  }
  return graphs;
}

void BM_EnumerateMetapaths(benchmark::State& state) {
  const int length = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        metapath::enumerate_metapaths(length, metapath::default_node_types()));
  }
}
BENCHMARK(BM_EnumerateMetapaths)->Arg(2)->Arg(3)->Arg(4)->Arg(5);

void BM_ContainsInstance(benchmark::State& state) {
  const auto graphs = bench_graphs(4, 2);
  const auto paths = metapath::enumerate_metapaths(4, metapath::default_node_types());
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& g = graphs[k % graphs.size()];
    const auto& p = paths[(k * 131) % paths.size()];
    benchmark::DoNotOptimize(metapath::contains_instance(g, p));
    ++k;
  }
}
BENCHMARK(BM_ContainsInstance);

void BM_NeighborRows(benchmark::State& state) {
  const auto graphs = bench_graphs(4, 2);
  const auto paths = metapath::enumerate_metapaths(3, metapath::default_node_types());
  std::size_t k = 0;
  for (auto _ : state) {
    const auto& g = graphs[k % graphs.size()];
    const auto& p = paths[(k * 37) % paths.size()];
    benchmark::DoNotOptimize(metapath::neighbor_rows(g, p));
    ++k;
  }
}
BENCHMARK(BM_NeighborRows);

void BM_MineCorpus(benchmark::State& state) {
  const auto graphs = bench_graphs(static_cast<int>(state.range(0)), state.range(0) / 4);
  std::vector<const xbhg::XbhgGraph*> ptrs;
  for (const auto& g : graphs) ptrs.push_back(&g);
  std::vector<metapath::MetaPath> paths;
  for (int l = 2; l <= 4; ++l) {
    auto batch = metapath::enumerate_metapaths(l, metapath::default_node_types());
    paths.insert(paths.end(), batch.begin(), batch.end());
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(metapath::label_frequencies(ptrs, paths));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(ptrs.size()) *
                          static_cast<std::int64_t>(paths.size()));
}
BENCHMARK(BM_MineCorpus)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace
