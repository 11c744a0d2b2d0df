#include "bridgesentry/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace bridgesentry::han {

using nlohmann::json;

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json paths = json::array();
  for (const auto& p : ckpt.selected_paths) paths.push_back(p.str());

  json params = json::object();
  ckpt.params.visit([&](const std::string& name, const auto& tensor) {
    std::vector<double> data(tensor.data(), tensor.data() + tensor.size());
    params[name] = {{"shape", {tensor.rows(), tensor.cols()}}, {"data", std::move(data)}};
  });

  const json j = {
      {"version", 1},
      {"hyperparams",
       {{"embed_dim", ckpt.hp.embed_dim},
        {"heads", ckpt.hp.heads},
        {"semantic_dim", ckpt.hp.semantic_dim},
        {"num_classes", ckpt.hp.num_classes},
        {"pooling", pooling_name(ckpt.hp.pooling)},
        {"leaky_slope", ckpt.hp.leaky_slope},
        {"text_dim", ckpt.hp.text_dim}}},
      {"train_config",
       {{"seed", ckpt.train.seed},
        {"epochs", ckpt.train.epochs},
        {"learning_rate", ckpt.train.learning_rate},
        {"split_ratio", ckpt.train.split_ratio},
        {"theta", ckpt.train.theta},
        {"weight_decay", ckpt.train.weight_decay},
        {"ablation", ckpt.train.ablation},
        {"class_weights", ckpt.train.class_weights}}},
      {"selected_paths", paths},
      {"params", params}};
  return j.dump();
}

Checkpoint parse_checkpoint(const std::string& json_text) {
  json j = json::parse(json_text);
  if (j.at("version").get<int>() != 1) {
    throw DataError("checkpoint: unsupported version");
  }
  Checkpoint ckpt;
  const json& hj = j.at("hyperparams");
  ckpt.hp.embed_dim = hj.at("embed_dim").get<int>();
  ckpt.hp.heads = hj.at("heads").get<int>();
  ckpt.hp.semantic_dim = hj.at("semantic_dim").get<int>();
  ckpt.hp.num_classes = hj.at("num_classes").get<int>();
  ckpt.hp.pooling = pooling_from_name(hj.at("pooling").get<std::string>());
  ckpt.hp.leaky_slope = hj.at("leaky_slope").get<double>();
  ckpt.hp.text_dim = hj.at("text_dim").get<int>();
  ckpt.hp.validate();

  const json& tj = j.at("train_config");
  ckpt.train.seed = tj.at("seed").get<std::uint64_t>();
  ckpt.train.epochs = tj.at("epochs").get<int>();
  ckpt.train.learning_rate = tj.at("learning_rate").get<double>();
  ckpt.train.split_ratio = tj.at("split_ratio").get<double>();
  ckpt.train.theta = tj.at("theta").get<double>();
  ckpt.train.weight_decay = tj.at("weight_decay").get<double>();
  ckpt.train.ablation = tj.at("ablation").get<std::string>();
  ckpt.train.class_weights = tj.at("class_weights").get<std::string>();

  for (const auto& pj : j.at("selected_paths")) {
    ckpt.selected_paths.push_back(metapath::MetaPath::from_string(pj.get<std::string>()));
  }

  ckpt.params = ModelParams::zeros(ckpt.hp, static_cast<int>(ckpt.selected_paths.size()));
  const json& params = j.at("params");
  ckpt.params.visit([&](const std::string& name, auto& tensor) {
    if (!params.contains(name)) {
      throw DataError("checkpoint: missing parameter " + name);
    }
    const json& entry = params.at(name);
    const auto shape = entry.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != tensor.rows() || shape[1] != tensor.cols()) {
      throw DataError("checkpoint: shape mismatch for parameter " + name);
    }
    const auto data = entry.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != tensor.size()) {
      throw DataError("checkpoint: data length mismatch for parameter " + name);
    }
    std::copy(data.begin(), data.end(), tensor.data());
  });

  std::size_t expected = 0;
  ckpt.params.visit([&](const std::string&, const auto&) { ++expected; });
  if (params.size() != expected) {
    throw DataError("checkpoint: unexpected parameter count");
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_checkpoint(text.str());
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write checkpoint: " + path);
  out << serialize_checkpoint(ckpt) << '\n';
  if (!out) throw DataError("I/O failure writing: " + path);
}

}  // namespace bridgesentry::han
