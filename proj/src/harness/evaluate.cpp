#include "irib/harness/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "irib/harness/metrics.hpp"
#include "irib/harness/parallel.hpp"
#include "irib/lfo/lfo.hpp"

namespace irib::harness {
namespace {

std::string real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

// Splits RFC 4180 text into records of fields.
std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !field.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
      }
      field.clear();
      record.clear();
      any = false;
    } else {
      field += c;
      any = true;
    }
  }
  if (quoted) throw std::runtime_error("csv: unterminated quoted field");
  if (any || !field.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

const std::vector<std::string> kHeader = {"method", "lfo", "psnr", "ssim", "blur_mse", "perc_proxy", "fid_proxy"};

}  // namespace

MetricsRow score(const std::string& method, int lfo, const std::vector<Tensor>& restored,
                 const std::vector<Tensor>& reference, const models::FeatureExtractor& y, double blur_tau) {
  if (restored.size() != reference.size() || restored.empty()) {
    throw std::invalid_argument("score: restored and reference sets must be non-empty and of equal size");
  }
  struct Item {
    double psnr, ssim, blur, perc;
  };
  const auto items = parallel_map<Item>(restored.size(), thread_limit(), [&](std::size_t i) {
    return Item{harness::psnr(restored[i], reference[i]), harness::ssim(restored[i], reference[i]),
                blur_mse(restored[i], reference[i], blur_tau), perceptual_proxy(restored[i], reference[i], y)};
  });
  MetricsRow r{method, lfo};
  for (const auto& it : items) {
    r.psnr += it.psnr;
    r.ssim += it.ssim;
    r.blur_mse += it.blur;
    r.perc_proxy += it.perc;
  }
  const double n = static_cast<double>(items.size());
  r.psnr /= n;
  r.ssim /= n;
  r.blur_mse /= n;
  r.perc_proxy /= n;
  r.fid_proxy = fid_proxy(restored, reference, y);
  return r;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out;
  for (std::size_t i = 0; i < kHeader.size(); ++i) out += (i ? "," : "") + kHeader[i];
  out += "\r\n";
  for (const auto& r : rows) {
    out += csv_field(r.method) + "," + std::to_string(r.lfo) + "," + real(r.psnr) + "," + real(r.ssim) + "," +
           real(r.blur_mse) + "," + real(r.perc_proxy) + "," + real(r.fid_proxy) + "\r\n";
  }
  return out;
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << metrics_csv(rows);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const auto records = parse_csv(ss.str());
  if (records.empty() || records.front() != kHeader) throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<MetricsRow> rows;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const auto& f = records[i];
    if (f.size() != kHeader.size()) throw std::runtime_error(path.string() + ": wrong field count");
    rows.push_back({f[0], std::stoi(f[1]), std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5]),
                    std::stod(f[6])});
  }
  return rows;
}

std::vector<Tensor> restore_direct(const models::ResidualNet& net, const std::vector<Pair>& test,
                                   const models::FeatureExtractor& y) {
  return parallel_map<Tensor>(test.size(), thread_limit(), [&](std::size_t i) {
    const Tensor& x = test[i].x_elq;
    return net.forward(Var::constant(x), models::extract_condition(y, x).as_var()).value();
  });
}

std::vector<Tensor> restore_decomposed(const models::ResidualNet& f, const models::ResidualNet& g,
                                       const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                       int lfo_iters) {
  return parallel_map<Tensor>(test.size(), thread_limit(), [&](std::size_t i) {
    return lfo::lfo_restore(test[i].x_elq, f, g, y, lfo_iters).final_hq;
  });
}

std::vector<Tensor> hq_of(const std::vector<Pair>& pairs) {
  std::vector<Tensor> out;
  for (const auto& p : pairs) out.push_back(p.z_hq);
  return out;
}

std::vector<MetricsRow> run_comparison(const models::ResidualNet& direct, const models::ResidualNet& f,
                                       const models::ResidualNet& g, const std::vector<Pair>& test,
                                       const models::FeatureExtractor& y, const std::vector<int>& lfo_iters,
                                       double blur_tau) {
  const std::vector<Tensor> hq = hq_of(test);
  std::vector<MetricsRow> rows{score("direct", 0, restore_direct(direct, test, y), hq, y, blur_tau)};
  for (int k : lfo_iters) rows.push_back(score("decomposed", k, restore_decomposed(f, g, test, y, k), hq, y, blur_tau));
  return rows;
}

std::vector<double> lfo_condition_alignment(const models::ResidualNet& f, const models::ResidualNet& g,
                                            const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                            int iterations) {
  const auto per_item = parallel_map<std::vector<double>>(test.size(), thread_limit(), [&](std::size_t i) {
    const lfo::LfoTrace t = lfo::lfo_restore(test[i].x_elq, f, g, y, iterations);
    const Tensor target = models::extract_condition(y, test[i].z_hq).vector;
    std::vector<double> c;
    for (const auto& cond : t.conditions) c.push_back(models::cosine(cond.vector, target));
    return c;
  });
  std::vector<double> mean(static_cast<std::size_t>(iterations) + 1, 0.0);
  for (const auto& c : per_item)
    for (std::size_t k = 0; k < mean.size(); ++k) mean[k] += c[k] / static_cast<double>(per_item.size());
  return mean;
}

PlugAndPlayReport plug_and_play_eval(const models::ResidualNet& f, const models::ResidualNet& g_alt,
                                     const std::vector<Pair>& test, const models::FeatureExtractor& y,
                                     const degrade::DegradationPreset& projector_lq,
                                     const degrade::DegradationPreset& alt_lq, double blur_tau) {
  PlugAndPlayReport r;
  if (!(projector_lq == alt_lq)) {
    r.warnings.push_back("LQ preset mismatch: projector trained against '" + projector_lq.id +
                         "', alternative restorer trained on '" + alt_lq.id + "'");
  }
  const std::vector<Tensor> hq = hq_of(test);
  r.rows.push_back(score("alt_direct", 0, restore_direct(g_alt, test, y), hq, y, blur_tau));
  r.rows.push_back(score("alt_projected", 0, restore_decomposed(f, g_alt, test, y, 0), hq, y, blur_tau));
  return r;
}

std::vector<AblationRow> ablate_lambda_blur(const ExperimentConfig& cfg, const std::vector<Pair>& train,
                                            const std::vector<Pair>& test, const models::ResidualNet& g,
                                            const models::PriorScore& prior, const models::FeatureExtractor& y,
                                            std::uint64_t seed, const models::ResidualNet* reuse,
                                            double reuse_lambda) {
  const std::vector<Tensor> hq = hq_of(test);
  std::vector<AblationRow> rows;
  for (double lambda : cfg.lambda_blur_grid) {
    ProjectorOptions opts;
    opts.lambda_blur = lambda;
    opts.dropout_p = cfg.prompt_dropout_p;
    const std::vector<Tensor> out =
        reuse && lambda == reuse_lambda
            ? restore_decomposed(*reuse, g, test, y, 0)
            : restore_decomposed(train_projector(cfg, train, g, prior, y, seed, opts).net, g, test, y, 0);
    rows.push_back({lambda, score("lambda_blur", 0, out, hq, y, cfg.weights.tau)});
  }
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "lambda_blur,psnr,ssim,blur_mse,perc_proxy,fid_proxy\r\n";
  for (const auto& r : rows) {
    const MetricsRow& m = r.metrics;
    out += real(r.lambda_blur) + "," + real(m.psnr) + "," + real(m.ssim) + "," + real(m.blur_mse) + "," +
           real(m.perc_proxy) + "," + real(m.fid_proxy) + "\r\n";
  }
  return out;
}

std::string ablation_svg(const std::vector<AblationRow>& rows) {
  constexpr double kW = 480, kH = 360, kPad = 60;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& r : rows) {
    x0 = std::min(x0, r.metrics.perc_proxy);
    x1 = std::max(x1, r.metrics.perc_proxy);
    y0 = std::min(y0, r.metrics.psnr);
    y1 = std::max(y1, r.metrics.psnr);
  }
  if (rows.empty()) x0 = y0 = 0.0, x1 = y1 = 1.0;
  const double xs = x1 > x0 ? x1 - x0 : 1.0, ys = y1 > y0 ? y1 - y0 : 1.0;
  auto px = [&](double v) { return kPad + (v - x0) / xs * (kW - 2 * kPad); };
  auto py = [&](double v) { return kH - kPad - (v - y0) / ys * (kH - 2 * kPad); };
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kPad << "\" y1=\"" << kPad << "\" x2=\"" << kPad << "\" y2=\"" << kH - kPad
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 15 << "\" text-anchor=\"middle\">perceptual proxy (lower is better)</text>\n"
     << "<text x=\"15\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 15 " << kH / 2
     << ")\" text-anchor=\"middle\">PSNR (dB)</text>\n";
  for (const auto& r : rows) {
    const double cx = px(r.metrics.perc_proxy), cy = py(r.metrics.psnr);
    os << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"5\" fill=\"steelblue\"/>\n"
       << "<text x=\"" << cx + 8 << "\" y=\"" << cy - 8 << "\">&#955;=" << real(r.lambda_blur) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace irib::harness
