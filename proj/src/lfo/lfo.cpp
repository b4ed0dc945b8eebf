#include "irib/lfo/lfo.hpp"

#include <stdexcept>

namespace irib::lfo {

LfoTrace lfo_restore(const Tensor& x_elq, const models::ResidualNet& f, const models::ResidualNet& g,
                     const models::FeatureExtractor& y, int iterations) {
  if (iterations < 0) throw std::invalid_argument("lfo_restore: iterations must be >= 0");
  if (x_elq.rank() != 4 || x_elq.shape()[0] != 1) {
    throw ShapeError("lfo_restore: expects one image [1,C,H,W], got " + shape_to_string(x_elq.shape()));
  }
  const Var x = Var::constant(x_elq);
  LfoTrace trace;
  trace.conditions.push_back(models::extract_condition(y, x_elq));
  for (int i = 0; i <= iterations; ++i) {
    trace.lq_proxies.push_back(f.forward(x, trace.conditions.back().as_var()).value());
    if (i < iterations) trace.conditions.push_back(models::extract_condition(y, trace.lq_proxies.back()));
  }
  trace.restorer_condition = models::extract_condition(y, trace.lq_proxies.back());
  trace.final_hq = g.forward(Var::constant(trace.lq_proxies.back()), trace.restorer_condition.as_var()).value();
  return trace;
}

}  // namespace irib::lfo
