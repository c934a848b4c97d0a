#include "salm/optimizer.hpp"

#include <cmath>

#include "salm/error.hpp"

namespace salm {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ConfigError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0, 1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (grad_clip_norm && !(*grad_clip_norm > 0.0))
    throw ConfigError("grad_clip_norm must be positive or none");
}

OptimizerState OptimizerState::zeros(const ModelConfig& config) {
  return {Parameters::zeros(config), Parameters::zeros(config), 0};
}

double global_norm(const Parameters& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads.tensors()) sq += g->squaredNorm();
  return std::sqrt(sq);
}

void adam_update(Matrix& param, const Matrix& grad, Matrix& first, Matrix& second,
                 std::uint64_t step, const AdamConfig& c, double grad_scale) {
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (Eigen::Index i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i] * grad_scale;
    double& m = first.data()[i];
    double& v = second.data()[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    param.data()[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

StepReport adam_step(Parameters& params, const Parameters& grads, OptimizerState& state,
                     const AdamConfig& config) {
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
    throw ShapeError("parameters, gradients and optimizer state disagree on tensor count");
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto rows = p[i].second->rows();
    const auto cols = p[i].second->cols();
    if (g[i].second->rows() != rows || g[i].second->cols() != cols ||
        m[i].second->rows() != rows || m[i].second->cols() != cols ||
        v[i].second->rows() != rows || v[i].second->cols() != cols)
      throw ShapeError("tensor " + p[i].first + " shape mismatch in optimizer step");
    if (!g[i].second->allFinite())
      throw TrainingError("non-finite gradient in tensor " + g[i].first);
  }

  StepReport report;
  report.grad_norm = global_norm(grads);
  double scale = 1.0;
  if (config.grad_clip_norm && report.grad_norm > *config.grad_clip_norm) {
    scale = *config.grad_clip_norm / report.grad_norm;
    report.clipped = true;
  }
  ++state.step;
  for (std::size_t i = 0; i < p.size(); ++i)
    adam_update(*p[i].second, *g[i].second, *m[i].second, *v[i].second, state.step, config, scale);
  return report;
}

}  // namespace salm
