#include "irib/models/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace irib::models {
namespace {

using json = nlohmann::ordered_json;
constexpr char kMagic[8] = {'I', 'R', 'I', 'B', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  unsigned char b[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw std::runtime_error("truncated checkpoint " + path.string());
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

std::string get_string(std::istream& in, std::size_t n, const std::filesystem::path& path) {
  if (n > (std::size_t{1} << 30)) throw std::runtime_error("corrupt checkpoint " + path.string());
  std::string s(n, '\0');
  if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw std::runtime_error("truncated checkpoint " + path.string());
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const json& arch, const std::vector<Parameter>& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  const std::string a = arch.dump();
  put<std::uint64_t>(out, a.size());
  out.write(a.data(), static_cast<std::streamsize>(a.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto& p : params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) put<std::uint64_t>(out, d);
    for (double v : p.value.data()) put<double>(out, v);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  Checkpoint ck;
  ck.arch = json::parse(get_string(in, get<std::uint64_t>(in, path), path));
  const auto count = get<std::uint64_t>(in, path);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_string(in, get<std::uint32_t>(in, path), path);
    const auto rank = get<std::uint32_t>(in, path);
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::uint64_t>(in, path));
    Tensor t(shape);
    for (auto& v : t.data()) v = get<double>(in, path);
    ck.params.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

json net_config_to_json(const NetConfig& c) {
  return json{{"channels", c.channels}, {"width", c.width},
              {"blocks", c.blocks},     {"cond_dim", c.cond_dim},
              {"residual_output", c.residual_output}, {"init_seed", c.init_seed}};
}

NetConfig net_config_from_json(const json& j) {
  NetConfig c;
  c.channels = j.at("channels").get<std::size_t>();
  c.width = j.at("width").get<std::size_t>();
  c.blocks = j.at("blocks").get<std::size_t>();
  c.cond_dim = j.at("cond_dim").get<std::size_t>();
  c.residual_output = j.at("residual_output").get<bool>();
  c.init_seed = j.at("init_seed").get<std::uint64_t>();
  return c;
}

void assign_parameters(std::vector<Parameter>& dst, const std::vector<Parameter>& src) {
  if (dst.size() != src.size()) throw std::runtime_error("checkpoint parameter count mismatch");
  for (auto& p : dst) {
    const Parameter* match = nullptr;
    for (const auto& q : src)
      if (q.name == p.name) match = &q;
    if (!match) throw std::runtime_error("checkpoint lacks parameter " + p.name);
    if (match->value.shape() != p.value.shape()) {
      throw std::runtime_error("checkpoint parameter " + p.name + " has shape " + shape_to_string(match->value.shape()) +
                               ", expected " + shape_to_string(p.value.shape()));
    }
    p.value = match->value;
    p.zero_grad();
  }
}

void save_network(const std::filesystem::path& path, const std::string& kind, const ResidualNet& net) {
  save_checkpoint(path, json{{"kind", kind}, {"net", net_config_to_json(net.config())}}, net.parameters());
}

ResidualNet load_network(const std::filesystem::path& path, const std::string& expected_kind) {
  Checkpoint ck = load_checkpoint(path);
  const std::string kind = ck.arch.at("kind").get<std::string>();
  if (!expected_kind.empty() && kind != expected_kind) {
    throw std::runtime_error("checkpoint " + path.string() + " holds a " + kind + ", expected " + expected_kind);
  }
  ResidualNet net(net_config_from_json(ck.arch.at("net")));
  assign_parameters(net.parameters(), ck.params);
  return net;
}

void save_prior(const std::filesystem::path& path, const PriorScore& prior) {
  json arch{{"kind", "prior"}, {"net", net_config_to_json(prior.net().config())},
            {"alphas_bar", prior.schedule().alphas_bar}};
  save_checkpoint(path, arch, prior.net().parameters());
}

PriorScore load_prior(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.arch.at("kind").get<std::string>() != "prior") {
    throw std::runtime_error("checkpoint " + path.string() + " is not a prior");
  }
  NoiseSchedule s{ck.arch.at("alphas_bar").get<std::vector<double>>()};
  PriorScore prior(net_config_from_json(ck.arch.at("net")), s);
  assign_parameters(prior.net().parameters(), ck.params);
  return prior;
}

}  // namespace irib::models
