#pragma once

#include <vector>

#include "irib/models/features.hpp"
#include "irib/models/network.hpp"

namespace irib::lfo {

struct LfoTrace {
  /// c^(1) = Y(x_elq), then c^(i+1) = Y(lq_proxies[i-1]).
  std::vector<models::Condition> conditions;
  /// lq_proxies[i] = f(x_elq; conditions[i]).
  std::vector<Tensor> lq_proxies;
  /// Condition handed to the restorer: Y(lq_proxies.back()).
  models::Condition restorer_condition;
  Tensor final_hq;
};

/// Look-forward refinement of the projector's condition. Every pass
/// re-projects the original ELQ input; only the condition changes.
/// iterations = 0 is the plain decomposed pipeline g(f(x; Y(x)); Y(f(x; Y(x)))).
LfoTrace lfo_restore(const Tensor& x_elq, const models::ResidualNet& f, const models::ResidualNet& g,
                     const models::FeatureExtractor& y, int iterations);

}  // namespace irib::lfo
