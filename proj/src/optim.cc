// optim.cc
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dstruct/optim.hpp"

#include <cmath>

#include "dstruct/error.hpp"

namespace dstruct {

void adam_step(Tensor& param, AdamMoments& moments, std::size_t step, const AdamConfig& config) {
  if (step == 0) throw ParameterError("adam_step: step counter is 1-based");
  if (!(config.lr > 0.0) || !(config.eps > 0.0) || config.beta1 < 0.0 || config.beta1 >= 1.0 ||
      config.beta2 < 0.0 || config.beta2 >= 1.0)
    throw ParameterError("adam_step: invalid hyperparameters");
  if (!param.has_grad()) return;
  auto value = param.mutable_data();
  auto grad = param.grad();
  if (moments.m.size() != value.size()) {
    moments.m.assign(value.size(), 0.0);
    moments.v.assign(value.size(), 0.0);
  }
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < value.size(); ++i) {
    moments.m[i] = config.beta1 * moments.m[i] + (1.0 - config.beta1) * grad[i];
    moments.v[i] = config.beta2 * moments.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = moments.m[i] / c1;
    const double vhat = moments.v[i] / c2;
    value[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
  }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), moments_(params_.size()), config_(config) {}

void Adam::step() {
  ++steps_;
  for (std::size_t i = 0; i < params_.size(); ++i)
    adam_step(params_[i], moments_[i], steps_, config_);
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

}  // namespace dstruct
