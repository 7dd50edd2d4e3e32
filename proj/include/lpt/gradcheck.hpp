#pragma once

#include <string>
#include <vector>

#include "lpt/model.hpp"
#include "lpt/nn.hpp"

namespace lpt {

// Central-difference check of parameter gradients for a scalar objective
// built from model graph components. The model is taken by value so its
// parameters can be wiggled freely. BuildFn: (const Model&, ad::Tape&,
// Binder&) -> scalar Var. Returns max over the named parameters' coordinates
// of |analytic - numeric| / max(1, |numeric|).
template <typename BuildFn>
double param_fd_check(Model model, const std::vector<std::string>& names,
                      BuildFn build, double eps = 1e-5) {
  ParamStore grads;
  {
    ad::Tape tape;
    Binder p(tape, model.params, true);
    ad::Var root = build(model, tape, p);
    tape.backward(root);
    grads = p.collect_grads();
  }
  auto eval = [&]() {
    ad::Tape tape;
    Binder p(tape, model.params, false);
    return build(model, tape, p).value().item();
  };
  double worst = 0.0;
  for (const auto& name : names) {
    Tensor& param = model.params.at(name);
    const Tensor& g = grads.at(name);
    for (std::size_t j = 0; j < param.size(); ++j) {
      const double keep = param[j];
      param[j] = keep + eps;
      const double fp = eval();
      param[j] = keep - eps;
      const double fm = eval();
      param[j] = keep;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err =
          std::abs(g[j] - numeric) / std::max(1.0, std::abs(numeric));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

inline std::vector<std::string> param_names_with_prefix(const ParamStore& ps,
                                                        const std::string& prefix) {
  std::vector<std::string> out;
  for (const auto& [k, v] : ps.items())
    if (k.rfind(prefix, 0) == 0) out.push_back(k);
  return out;
}

}  // namespace lpt
