#include "irib/degrade/serialize.hpp"

#include <fstream>
#include <stdexcept>

namespace irib::degrade {
namespace {

using json = nlohmann::ordered_json;

json stage_to_json(const Stage& s) {
  json j;
  if (const auto* b = std::get_if<BlurStage>(&s)) {
    j["kind"] = "blur";
    j["params"] = {{"tau_x", b->tau_x},
                   {"tau_y", b->tau_y},
                   {"angle", b->angle},
                   {"beta_shape", b->beta_shape},
                   {"radius", b->radius}};
  } else if (const auto* r = std::get_if<ResizeStage>(&s)) {
    j["kind"] = "resize";
    j["params"] = {{"scale", r->scale}, {"mode", r->mode == ResizeMode::kNearest ? "nearest" : "bilinear"}};
  } else if (const auto* n = std::get_if<NoiseStage>(&s)) {
    j["kind"] = "noise";
    j["params"] = {{"sigma", n->sigma}, {"gray", n->gray}, {"seed", n->seed}};
  } else {
    j["kind"] = "jpeg_proxy";
    j["params"] = {{"quality", std::get<JpegStage>(s).quality}};
  }
  return j;
}

Stage stage_from_json(const json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  const json& p = j.at("params");
  if (kind == "blur") {
    return BlurStage{p.at("tau_x").get<double>(), p.at("tau_y").get<double>(), p.at("angle").get<double>(),
                     p.at("beta_shape").get<double>(), p.at("radius").get<std::size_t>()};
  }
  if (kind == "resize") {
    const std::string mode = p.at("mode").get<std::string>();
    if (mode != "bilinear" && mode != "nearest") throw std::invalid_argument("unknown resize mode: " + mode);
    return ResizeStage{p.at("scale").get<double>(), mode == "nearest" ? ResizeMode::kNearest : ResizeMode::kBilinear};
  }
  if (kind == "noise") {
    return NoiseStage{p.at("sigma").get<double>(), p.at("gray").get<bool>(), p.at("seed").get<std::uint64_t>()};
  }
  if (kind == "jpeg_proxy") {
    const int q = p.at("quality").get<int>();
    if (q < 1 || q > 100) throw std::invalid_argument("jpeg quality out of range: " + std::to_string(q));
    return JpegStage{q};
  }
  throw std::invalid_argument("unknown degradation stage kind: " + kind);
}

json range_to_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from_json(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("range must be a [lo, hi] pair");
  return Range{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

json manifest_to_json(const DegradationManifest& m) {
  json j;
  j["seed"] = m.seed;
  j["preset_id"] = m.preset_id;
  json orders = json::array();
  for (const auto& order : m.orders) {
    json list = json::array();
    for (const auto& s : order) list.push_back(stage_to_json(s));
    orders.push_back(std::move(list));
  }
  j["orders"] = std::move(orders);
  j["final_scale"] = m.final_scale;
  return j;
}

DegradationManifest manifest_from_json(const json& j) {
  DegradationManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.preset_id = j.at("preset_id").get<std::string>();
  const json& orders = j.at("orders");
  if (!orders.is_array() || orders.size() != 2) throw std::invalid_argument("manifest needs exactly two orders");
  for (std::size_t k = 0; k < 2; ++k)
    for (const auto& s : orders[k]) m.orders[k].push_back(stage_from_json(s));
  m.final_scale = j.at("final_scale").get<double>();
  return m;
}

json preset_to_json(const DegradationPreset& p) {
  json j;
  j["id"] = p.id;
  j["second_order_prob"] = p.second_order_prob;
  json orders = json::array();
  for (const auto& o : p.orders) {
    orders.push_back({{"p_blur", o.p_blur},
                      {"p_resize", o.p_resize},
                      {"p_noise", o.p_noise},
                      {"p_jpeg", o.p_jpeg},
                      {"tau", range_to_json(o.tau)},
                      {"beta_shape", range_to_json(o.beta_shape)},
                      {"angle", range_to_json(o.angle)},
                      {"scale", range_to_json(o.scale)},
                      {"sigma", range_to_json(o.sigma)},
                      {"quality", range_to_json(o.quality)},
                      {"p_gray_noise", o.p_gray_noise},
                      {"p_nearest", o.p_nearest}});
  }
  j["orders"] = std::move(orders);
  return j;
}

DegradationPreset preset_from_json(const json& j) {
  DegradationPreset p;
  p.id = j.at("id").get<std::string>();
  p.second_order_prob = j.at("second_order_prob").get<double>();
  const json& orders = j.at("orders");
  if (!orders.is_array() || orders.size() != 2) throw std::invalid_argument("preset needs exactly two orders");
  for (std::size_t k = 0; k < 2; ++k) {
    const json& o = orders[k];
    OrderSpec& s = p.orders[k];
    s.p_blur = o.at("p_blur").get<double>();
    s.p_resize = o.at("p_resize").get<double>();
    s.p_noise = o.at("p_noise").get<double>();
    s.p_jpeg = o.at("p_jpeg").get<double>();
    s.tau = range_from_json(o.at("tau"));
    s.beta_shape = range_from_json(o.at("beta_shape"));
    s.angle = range_from_json(o.at("angle"));
    s.scale = range_from_json(o.at("scale"));
    s.sigma = range_from_json(o.at("sigma"));
    s.quality = range_from_json(o.at("quality"));
    s.p_gray_noise = o.at("p_gray_noise").get<double>();
    s.p_nearest = o.at("p_nearest").get<double>();
  }
  p.validate();
  return p;
}

DegradationPreset preset_by_name(const std::string& name) {
  if (name == "lq" || name == "LQ") return DegradationPreset::lq();
  if (name == "elq" || name == "ELQ") return DegradationPreset::elq();
  if (name == "identity") return DegradationPreset::identity();
  throw std::invalid_argument("unknown degradation preset: " + name);
}

void save_manifest(const DegradationManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

DegradationManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  return manifest_from_json(json::parse(in));
}

}  // namespace irib::degrade
