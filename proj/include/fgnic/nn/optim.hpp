#pragma once

#include "fgnic/nn/layers.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fgnic::nn {

enum class OptimizerKind { sgd_momentum, adaptive };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_kind_from_string(const std::string& s);

/// Mean softmax cross-entropy over the batch; `grad` receives dL/dlogits.
template <typename Scalar>
double cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& labels, Matrix<Scalar>* grad = nullptr) {
  if (logits.cols() != Index(labels.size())) throw ShapeError("cross_entropy: label count mismatch");
  const Index batch = logits.cols();
  Matrix<Scalar> probs(logits.rows(), batch);
  double loss = 0.0;
  for (Index n = 0; n < batch; ++n) {
    const int y = labels[n];
    if (y < 0 || y >= logits.rows()) throw InputError("cross_entropy: label out of range");
    const Scalar mx = logits.col(n).maxCoeff();
    probs.col(n) = (logits.col(n).array() - mx).exp().matrix();
    const Scalar z = probs.col(n).sum();
    probs.col(n) /= z;
    loss -= double(logits(y, n) - mx) - std::log(double(z));
  }
  if (grad) {
    *grad = probs;
    for (Index n = 0; n < batch; ++n) (*grad)(labels[n], n) -= Scalar(1);
    *grad /= static_cast<Scalar>(batch);
  }
  return loss / double(batch);
}

/// Mean squared error over all elements.
template <typename Scalar>
double mse(const Matrix<Scalar>& pred, const Matrix<Scalar>& target, Matrix<Scalar>* grad = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) throw ShapeError("mse: shape mismatch");
  const Matrix<Scalar> diff = pred - target;
  const double numel = double(pred.size());
  if (grad) *grad = diff * static_cast<Scalar>(2.0 / numel);
  return diff.template cast<double>().squaredNorm() / numel;
}

/// First-order optimizer over a fixed parameter list. Frozen parameters and
/// buffers are never touched.
template <typename Scalar>
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, ParamList<Scalar> params, double momentum = 0.9, double beta1 = 0.9,
            double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(lr), momentum_(momentum), beta1_(beta1), beta2_(beta2), eps_(eps), params_(std::move(params)) {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
    for (auto* p : params_) {
      first_.push_back(Matrix<Scalar>::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(kind_ == OptimizerKind::adaptive ? Matrix<Scalar>::Zero(p->value.rows(), p->value.cols())
                                                         : Matrix<Scalar>());
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, double(t_));
    const double bc2 = 1.0 - std::pow(beta2_, double(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      if (p->frozen || p->buffer) continue;
      if (kind_ == OptimizerKind::sgd_momentum) {
        first_[i] = first_[i] * static_cast<Scalar>(momentum_) + p->grad;
        p->value -= first_[i] * static_cast<Scalar>(lr_);
      } else {
        first_[i] = first_[i] * static_cast<Scalar>(beta1_) + p->grad * static_cast<Scalar>(1.0 - beta1_);
        second_[i] = second_[i] * static_cast<Scalar>(beta2_) + p->grad.cwiseAbs2() * static_cast<Scalar>(1.0 - beta2_);
        const auto mhat = first_[i].array() / static_cast<Scalar>(bc1);
        const auto vhat = second_[i].array() / static_cast<Scalar>(bc2);
        p->value.array() -= static_cast<Scalar>(lr_) * mhat / (vhat.sqrt() + static_cast<Scalar>(eps_));
      }
    }
  }

  const ParamList<Scalar>& params() const { return params_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  ParamList<Scalar> params_;
  std::vector<Matrix<Scalar>> first_;
  std::vector<Matrix<Scalar>> second_;
};

}  // namespace fgnic::nn
