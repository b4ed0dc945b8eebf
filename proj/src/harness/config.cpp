#include "irib/harness/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

#include "irib/degrade/serialize.hpp"

namespace irib::harness {
namespace {

using json = nlohmann::ordered_json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw std::invalid_argument("config: unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json arch_json(const ArchConfig& a) { return json{{"width", a.width}, {"blocks", a.blocks}}; }

void read_arch(const json& j, ArchConfig& a, const std::string& where) {
  reject_unknown(j, {"width", "blocks"}, where);
  read(j, "width", a.width);
  read(j, "blocks", a.blocks);
}

std::uint64_t parse_u64(const char* text, const char* var) {
  std::size_t pos = 0;
  const std::string s(text);
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos, 0);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(std::string(var) + " is not an unsigned integer: " + s);
  return v;
}

}  // namespace

void ExperimentConfig::validate() const {
  // The condition grid needs a 4x4 map after two stride-2 layers.
  if (image_size < 16) throw std::invalid_argument("config: image_size must be >= 16");
  if (train_size == 0 || test_size == 0) throw std::invalid_argument("config: corpus sizes must be >= 1");
  if (!(optimizer.learning_rate > 0.0) || optimizer.momentum < 0.0 || optimizer.momentum >= 1.0 ||
      !(optimizer.clip_norm > 0.0) || optimizer.batch == 0 || optimizer.beta2 < 0.0 || optimizer.beta2 >= 1.0 ||
      (optimizer.algorithm != "sgd_momentum" && optimizer.algorithm != "adam")) {
    throw std::invalid_argument("config: invalid optimizer settings");
  }
  if (!(prompt_dropout_p >= 0.0 && prompt_dropout_p <= 1.0)) throw std::invalid_argument("config: prompt_dropout_p outside [0,1]");
  for (int i : lfo_iters)
    if (i < 0) throw std::invalid_argument("config: lfo_iters must be >= 0");
  for (double l : lambda_blur_grid)
    if (!(l >= 0.0)) throw std::invalid_argument("config: lambda_blur_grid entries must be >= 0");
  if (network.width == 0 || alt_restorer.width == 0) throw std::invalid_argument("config: network width must be >= 1");
  weights.validate();
  lq.validate();
  elq.validate();
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["run_seed"] = c.run_seed;
  j["image_size"] = c.image_size;
  j["corpus"] = {{"train", c.train_size}, {"test", c.test_size}};
  j["optimizer"] = {{"algorithm", c.optimizer.algorithm},
                    {"learning_rate", c.optimizer.learning_rate},
                    {"momentum", c.optimizer.momentum},
                    {"beta2", c.optimizer.beta2},
                    {"clip_norm", c.optimizer.clip_norm},
                    {"batch", c.optimizer.batch}};
  j["steps"] = {{"restorer", c.steps.restorer}, {"prior", c.steps.prior}, {"projector", c.steps.projector}};
  j["loss_weights"] = losses::to_json(c.weights);
  j["presets"] = {{"lq", degrade::preset_to_json(c.lq)}, {"elq", degrade::preset_to_json(c.elq)}};
  j["prompt_dropout_p"] = c.prompt_dropout_p;
  j["lfo_iters"] = c.lfo_iters;
  j["lambda_blur_grid"] = c.lambda_blur_grid;
  j["network"] = arch_json(c.network);
  j["alt_restorer"] = arch_json(c.alt_restorer);
  j["feature_seed"] = c.feature_seed;
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"run_seed", "image_size", "corpus", "optimizer", "steps", "loss_weights", "presets",
                  "prompt_dropout_p", "lfo_iters", "lambda_blur_grid", "network", "alt_restorer", "feature_seed"},
                 "top level");
  ExperimentConfig c;
  read(j, "run_seed", c.run_seed);
  read(j, "image_size", c.image_size);
  if (j.contains("corpus")) {
    const json& k = j.at("corpus");
    reject_unknown(k, {"train", "test"}, "corpus");
    read(k, "train", c.train_size);
    read(k, "test", c.test_size);
  }
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    reject_unknown(o, {"algorithm", "learning_rate", "momentum", "beta2", "clip_norm", "batch"}, "optimizer");
    read(o, "algorithm", c.optimizer.algorithm);
    read(o, "beta2", c.optimizer.beta2);
    read(o, "learning_rate", c.optimizer.learning_rate);
    read(o, "momentum", c.optimizer.momentum);
    read(o, "clip_norm", c.optimizer.clip_norm);
    read(o, "batch", c.optimizer.batch);
  }
  if (j.contains("steps")) {
    const json& s = j.at("steps");
    reject_unknown(s, {"restorer", "prior", "projector"}, "steps");
    read(s, "restorer", c.steps.restorer);
    read(s, "prior", c.steps.prior);
    read(s, "projector", c.steps.projector);
  }
  if (j.contains("loss_weights")) {
    json merged = losses::to_json(c.weights);
    for (const auto& [k, v] : j.at("loss_weights").items()) {
      if (!merged.contains(k)) throw std::invalid_argument("config: unknown key '" + k + "' in loss_weights");
      merged[k] = v;
    }
    c.weights = losses::loss_weights_from_json(merged);
  }
  if (j.contains("presets")) {
    const json& p = j.at("presets");
    reject_unknown(p, {"lq", "elq"}, "presets");
    auto preset = [](const json& v) {
      return v.is_string() ? degrade::preset_by_name(v.get<std::string>()) : degrade::preset_from_json(v);
    };
    if (p.contains("lq")) c.lq = preset(p.at("lq"));
    if (p.contains("elq")) c.elq = preset(p.at("elq"));
  }
  read(j, "prompt_dropout_p", c.prompt_dropout_p);
  read(j, "lfo_iters", c.lfo_iters);
  read(j, "lambda_blur_grid", c.lambda_blur_grid);
  if (j.contains("network")) read_arch(j.at("network"), c.network, "network");
  if (j.contains("alt_restorer")) read_arch(j.at("alt_restorer"), c.alt_restorer, "alt_restorer");
  read(j, "feature_seed", c.feature_seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path.string());
  try {
    return config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw std::invalid_argument("config " + path.string() + ": " + e.what());
  }
}

void save_config(const ExperimentConfig& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config " + path.string());
  out << to_json(c).dump(2) << '\n';
}

void apply_environment(ExperimentConfig& c) {
  if (const char* s = std::getenv("IRIB_SEED"); s && *s) c.run_seed = parse_u64(s, "IRIB_SEED");
}

std::size_t thread_limit() {
  if (const char* s = std::getenv("IRIB_THREADS"); s && *s) {
    const auto v = parse_u64(s, "IRIB_THREADS");
    if (v == 0) throw std::invalid_argument("IRIB_THREADS must be >= 1");
    return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace irib::harness
