#include "bridgesentry/metapath.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bridgesentry::metapath {

using nlohmann::json;
using xbhg::XbhgGraph;

MetaPath MetaPath::from_string(const std::string& symbols) {
  std::vector<NodeType> seq;
  seq.reserve(symbols.size());
  for (const char c : symbols) seq.push_back(node_type_from_symbol(c));
  return MetaPath(std::move(seq));
}

std::string MetaPath::str() const {
  std::string out;
  out.reserve(seq.size());
  for (const NodeType t : seq) out.push_back(node_type_symbol(t));
  return out;
}

std::vector<MetaPath> enumerate_metapaths(int l, const std::vector<NodeType>& types) {
  if (l < 2) throw DataError("meta-path length must be at least 2");
  if (types.empty()) throw DataError("meta-path enumeration needs a nonempty type list");

  std::vector<MetaPath> out;
  std::vector<NodeType> current;
  current.reserve(static_cast<std::size_t>(l));
  // Depth-first expansion over the type list; order is lexicographic in the
  // given type ordering.
  auto expand = [&](auto&& self) -> void {
    if (static_cast<int>(current.size()) == l) {
      out.emplace_back(current);
      return;
    }
    for (const NodeType t : types) {
      current.push_back(t);
      self(self);
      current.pop_back();
    }
  };
  expand(expand);
  return out;
}

namespace {

// Layered reachability over the typed multigraph. layer[k][v] holds, as a
// bitset over start nodes, the starts that reach v with a walk matching
// seq[0..k].
class StartSetSweep {
 public:
  StartSetSweep(const XbhgGraph& graph, const MetaPath& path)
      : n_(graph.num_nodes()), words_((n_ + 63) / 64) {
    const std::size_t sz = static_cast<std::size_t>(n_) * static_cast<std::size_t>(words_);
    current_.assign(sz, 0);
    next_.assign(sz, 0);
    for (int v = 0; v < n_; ++v) {
      if (graph.nodes[static_cast<std::size_t>(v)].ntype == path.seq[0]) {
        word(current_, v, v / 64) |= 1ULL << (v % 64);
      }
    }
    for (std::size_t k = 1; k < path.seq.size(); ++k) {
      std::fill(next_.begin(), next_.end(), 0);
      for (const auto& e : graph.edges) {
        if (graph.nodes[static_cast<std::size_t>(e.dst)].ntype != path.seq[k]) continue;
        for (int w = 0; w < words_; ++w) {
          word(next_, e.dst, w) |= word(current_, e.src, w);
        }
      }
      current_.swap(next_);
    }
  }

  bool any() const {
    for (const std::uint64_t w : current_) {
      if (w) return true;
    }
    return false;
  }

  // Terminal nodes reached from `start`, ascending.
  std::vector<int> terminals_of(int start) const {
    std::vector<int> out;
    const int w = start / 64;
    const std::uint64_t bit = 1ULL << (start % 64);
    for (int v = 0; v < n_; ++v) {
      if (word(current_, v, w) & bit) out.push_back(v);
    }
    return out;
  }

  // Starts with at least one terminal.
  std::vector<int> live_starts() const {
    std::vector<std::uint64_t> acc(static_cast<std::size_t>(words_), 0);
    for (int v = 0; v < n_; ++v) {
      for (int w = 0; w < words_; ++w) acc[static_cast<std::size_t>(w)] |= word(current_, v, w);
    }
    std::vector<int> out;
    for (int s = 0; s < n_; ++s) {
      if (acc[static_cast<std::size_t>(s / 64)] & (1ULL << (s % 64))) out.push_back(s);
    }
    return out;
  }

 private:
  std::uint64_t& word(std::vector<std::uint64_t>& store, int v, int w) {
    return store[static_cast<std::size_t>(v) * static_cast<std::size_t>(words_) +
                 static_cast<std::size_t>(w)];
  }
  const std::uint64_t& word(const std::vector<std::uint64_t>& store, int v, int w) const {
    return store[static_cast<std::size_t>(v) * static_cast<std::size_t>(words_) +
                 static_cast<std::size_t>(w)];
  }

  int n_;
  int words_;
  std::vector<std::uint64_t> current_, next_;
};

void check_path(const MetaPath& path) {
  if (path.length() < 2) throw DataError("meta-path must have length >= 2");
}

}  // namespace

bool contains_instance(const XbhgGraph& graph, const MetaPath& path) {
  check_path(path);
  if (graph.num_nodes() == 0) return false;
  return StartSetSweep(graph, path).any();
}

double count_instances(const XbhgGraph& graph, const MetaPath& path) {
  check_path(path);
  const int n = graph.num_nodes();
  std::vector<double> current(static_cast<std::size_t>(n), 0.0);
  for (int v = 0; v < n; ++v) {
    if (graph.nodes[static_cast<std::size_t>(v)].ntype == path.seq[0]) current[static_cast<std::size_t>(v)] = 1.0;
  }
  std::vector<double> next(static_cast<std::size_t>(n), 0.0);
  for (std::size_t k = 1; k < path.seq.size(); ++k) {
    std::fill(next.begin(), next.end(), 0.0);
    for (const auto& e : graph.edges) {
      if (graph.nodes[static_cast<std::size_t>(e.dst)].ntype != path.seq[k]) continue;
      next[static_cast<std::size_t>(e.dst)] += current[static_cast<std::size_t>(e.src)];
    }
    current.swap(next);
  }
  double total = 0.0;
  for (const double c : current) total += c;
  return total;
}

std::vector<int> metapath_neighbors(const XbhgGraph& graph, const MetaPath& path, int node) {
  check_path(path);
  if (node < 0 || node >= graph.num_nodes()) throw DataError("metapath_neighbors: node out of range");
  if (graph.nodes[static_cast<std::size_t>(node)].ntype != path.seq[0]) return {node};

  const StartSetSweep sweep(graph, path);
  std::vector<int> out = sweep.terminals_of(node);
  const auto it = std::lower_bound(out.begin(), out.end(), node);
  if (it == out.end() || *it != node) out.insert(it, node);
  return out;
}

PathNeighborRows neighbor_rows(const XbhgGraph& graph, const MetaPath& path) {
  check_path(path);
  PathNeighborRows result;
  if (graph.num_nodes() == 0) return result;
  const StartSetSweep sweep(graph, path);
  for (const int start : sweep.live_starts()) {
    if (graph.nodes[static_cast<std::size_t>(start)].ntype != path.seq[0]) continue;
    std::vector<int> terminals = sweep.terminals_of(start);
    const auto it = std::lower_bound(terminals.begin(), terminals.end(), start);
    if (it == terminals.end() || *it != start) terminals.insert(it, start);
    if (terminals.size() > 1) result.rows.emplace_back(start, std::move(terminals));
  }
  return result;
}

FreqTable label_frequencies(const std::vector<const XbhgGraph*>& graphs,
                            const std::vector<MetaPath>& paths, FreqMode mode) {
  FreqTable table;
  table.mode = mode;
  for (const XbhgGraph* g : graphs) {
    if (g->label == Label::Unlabeled) {
      throw DataError("label_frequencies: graph " + g->graph_id + " is unlabeled");
    }
    if (is_attack(g->label)) {
      ++table.n_attack;
    } else {
      ++table.n_normal;
    }
  }
  if (table.n_attack == 0 || table.n_normal == 0) {
    throw DataError("label_frequencies: need at least one attack and one normal graph");
  }

  table.stats.reserve(paths.size());
  for (const MetaPath& path : paths) {
    PathStats s;
    s.path = path;
    table.stats.push_back(std::move(s));
  }
  for (const XbhgGraph* g : graphs) {
    const bool attack = is_attack(g->label);
    for (auto& s : table.stats) {
      const double c = mode == FreqMode::Indicator
                           ? (contains_instance(*g, s.path) ? 1.0 : 0.0)
                           : count_instances(*g, s.path);
      (attack ? s.count_attack : s.count_normal) += c;
    }
  }
  for (auto& s : table.stats) {
    s.fre_attack = s.count_attack / static_cast<double>(table.n_attack);
    s.fre_normal = s.count_normal / static_cast<double>(table.n_normal);
    s.fre_diff = std::abs(s.fre_attack - s.fre_normal);
  }
  return table;
}

std::vector<MetaPath> SelectionResult::paths() const {
  std::vector<MetaPath> out;
  out.reserve(selected.size());
  for (const auto& s : selected) out.push_back(s.path);
  return out;
}

SelectionResult select_differential(const FreqTable& table, double theta) {
  if (theta < 0.0) throw DataError("select_differential: theta must be >= 0");
  SelectionResult result;
  for (const auto& s : table.stats) {
    if (s.fre_diff > theta) result.selected.push_back(s);
  }
  if (result.selected.empty()) {
    result.selected = table.stats;  // enumeration order
    result.fell_back = true;
    return result;
  }
  std::sort(result.selected.begin(), result.selected.end(), [](const PathStats& a, const PathStats& b) {
    if (a.fre_diff != b.fre_diff) return a.fre_diff > b.fre_diff;
    return a.path < b.path;
  });
  return result;
}

std::string serialize_selection(const MinedSelection& sel) {
  json selected = json::array();
  for (const auto& s : sel.selected) {
    selected.push_back({{"seq", s.path.str()},
                        {"fre_A", s.fre_attack},
                        {"fre_N", s.fre_normal},
                        {"fre_diff", s.fre_diff}});
  }
  const json j = {{"version", 1},
                  {"theta", sel.theta},
                  {"mode", sel.mode == FreqMode::Indicator ? "indicator" : "mean_count"},
                  {"lmin", sel.lmin},
                  {"lmax", sel.lmax},
                  {"n_attack", sel.n_attack},
                  {"n_normal", sel.n_normal},
                  {"fell_back", sel.fell_back},
                  {"selected", selected}};
  return j.dump(2);
}

MinedSelection parse_selection(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("version").get<int>() != 1) {
    throw DataError("metapaths file: unsupported version");
  }
  MinedSelection sel;
  sel.theta = j.at("theta").get<double>();
  const std::string mode = j.at("mode").get<std::string>();
  if (mode == "indicator") {
    sel.mode = FreqMode::Indicator;
  } else if (mode == "mean_count") {
    sel.mode = FreqMode::MeanCount;
  } else {
    throw DataError("metapaths file: unknown mode " + mode);
  }
  sel.lmin = j.value("lmin", 2);
  sel.lmax = j.value("lmax", 4);
  sel.n_attack = j.value("n_attack", std::size_t{0});
  sel.n_normal = j.value("n_normal", std::size_t{0});
  sel.fell_back = j.value("fell_back", false);
  for (const auto& sj : j.at("selected")) {
    PathStats s;
    s.path = MetaPath::from_string(sj.at("seq").get<std::string>());
    s.fre_attack = sj.at("fre_A").get<double>();
    s.fre_normal = sj.at("fre_N").get<double>();
    s.fre_diff = sj.at("fre_diff").get<double>();
    sel.selected.push_back(std::move(s));
  }
  return sel;
}

MinedSelection load_selection(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open metapaths file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_selection(text.str());
}

void save_selection(const MinedSelection& sel, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write metapaths file: " + path);
  out << serialize_selection(sel) << '\n';
  if (!out) throw DataError("I/O failure writing: " + path);
}

}  // namespace bridgesentry::metapath
