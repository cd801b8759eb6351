#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "errors.hpp"
#include "tensor.hpp"

namespace metamt {

template <class S>
void check_grads_finite(const ParamStore<S>& store, const std::vector<std::string>& paths) {
  for (const auto& p : paths) {
    const auto& var = store.at(p);
    for (S g : var->g)
      if (!std::isfinite(static_cast<double>(g)))
        throw NumericError("optimizer: non-finite gradient in " + p);
  }
}

template <class S>
void sgd_step(ParamStore<S>& store, const std::vector<std::string>& paths, S lr) {
  check_grads_finite(store, paths);
  for (const auto& p : paths) {
    const auto& var = store.at(p);
    for (std::size_t i = 0; i < var->v.size(); ++i) var->v[i] -= lr * var->g[i];
  }
}

// Adam with bias correction. Keeps first/second moment slots per parameter
// path; paths not listed in a step() call keep their slots untouched.
template <class S>
class Adam {
 public:
  struct Hyper {
    S lr{S(3e-4)};
    S beta1{S(0.9)};
    S beta2{S(0.999)};
    S eps{S(1e-8)};
  };

  struct Slot {
    std::vector<S> m, v;
  };

  Adam() = default;
  explicit Adam(Hyper h) : hyper_(h) {}

  void step(ParamStore<S>& store, const std::vector<std::string>& paths) {
    check_grads_finite(store, paths);
    ++t_;
    const S bc1 = S(1) - std::pow(hyper_.beta1, S(t_));
    const S bc2 = S(1) - std::pow(hyper_.beta2, S(t_));
    for (const auto& p : paths) {
      const auto& var = store.at(p);
      auto& slot = slots_[p];
      if (slot.m.size() != var->v.size()) {
        slot.m.assign(var->v.size(), S(0));
        slot.v.assign(var->v.size(), S(0));
      }
      for (std::size_t i = 0; i < var->v.size(); ++i) {
        const S g = var->g[i];
        slot.m[i] = hyper_.beta1 * slot.m[i] + (S(1) - hyper_.beta1) * g;
        slot.v[i] = hyper_.beta2 * slot.v[i] + (S(1) - hyper_.beta2) * g * g;
        const S mhat = slot.m[i] / bc1;
        const S vhat = slot.v[i] / bc2;
        var->v[i] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
      }
    }
  }

  std::int64_t steps() const { return t_; }
  const Hyper& hyper() const { return hyper_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

  // Checkpoint restore.
  void restore(std::int64_t t, std::map<std::string, Slot> slots) {
    t_ = t;
    slots_ = std::move(slots);
  }

 private:
  Hyper hyper_{};
  std::map<std::string, Slot> slots_;
  std::int64_t t_{0};
};

}  // namespace metamt
