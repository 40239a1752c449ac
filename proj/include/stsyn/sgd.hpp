#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stsyn/rng.hpp"

namespace stsyn {

using ParamVector = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double squared_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

// Raised when a gradient or model goes non-finite; carries context for the
// run log.
class NumericFailure : public std::runtime_error {
 public:
  explicit NumericFailure(const std::string& what) : std::runtime_error(what) {}
};

struct Dataset {
  int dim = 0;
  std::vector<double> features;  // row-major, size() * dim
  std::vector<double> targets;   // regression target, or +/-1 label

  long size() const { return static_cast<long>(targets.size()); }
  std::span<const double> row(long i) const {
    return {features.data() + static_cast<size_t>(i) * dim, static_cast<size_t>(dim)};
  }
};

enum class ObjectiveKind { quadratic, logistic };

// Empirical risk over a dataset. quadratic: f(w; a,b) = 0.5*(a.w - b)^2.
// logistic: f(w; a,y) = log(1 + exp(-y * a.w)) with y in {-1,+1}.
class Objective {
 public:
  Objective(ObjectiveKind kind, std::shared_ptr<const Dataset> data);

  ObjectiveKind kind() const { return kind_; }
  int dim() const { return data_->dim; }
  const Dataset& data() const { return *data_; }

  double sample_loss(const ParamVector& w, long i) const;
  // out += weight * grad f(w; sample i)
  void accumulate_sample_grad(const ParamVector& w, long i, double weight,
                              ParamVector& out) const;

  double full_loss(const ParamVector& w) const;
  std::pair<double, ParamVector> full_loss_and_grad(const ParamVector& w) const;

  // Smoothness constant: exact top Hessian eigenvalue for the quadratic,
  // the sigmoid'<=1/4 bound for logistic.
  double smoothness() const { return smoothness_; }

  // Exact minimum and minimizer; present only for the quadratic.
  std::optional<double> optimal_value() const { return optimal_value_; }
  const std::optional<ParamVector>& minimizer() const { return minimizer_; }

  // Exact E_i ||grad f(w; i) - grad F(w)||^2 by enumerating the dataset.
  double gradient_variance_at(const ParamVector& w) const;

  // Fraction of samples whose sign prediction matches; logistic only.
  std::optional<double> accuracy(const ParamVector& w) const;

 private:
  ObjectiveKind kind_;
  std::shared_ptr<const Dataset> data_;
  double smoothness_ = 0.0;
  std::optional<double> optimal_value_;
  std::optional<ParamVector> minimizer_;
};

struct MiniBatch {
  std::vector<long> indices;  // global sample ids, drawn with replacement
  int worker = 0;
  long round = 0;
  int step = 0;
};

MiniBatch draw_minibatch(const std::vector<long>& shard, int batch_size, int worker,
                         long round, int step, RngStream& stream);

// (1/B) sum over the batch of grad f(w; sample). Deterministic in its inputs.
ParamVector minibatch_gradient(const Objective& obj, const ParamVector& w,
                               const MiniBatch& batch);

// w - alpha * minibatch_gradient(obj, w, batch)
ParamVector local_update(const Objective& obj, const ParamVector& w,
                         const MiniBatch& batch, double alpha);

// Unweighted coordinate-wise mean, pairwise tree summation over the given
// order. Callers pass models in worker-id order; identical inputs return the
// first model bit-exactly. Throws on empty input or dimension mismatch.
ParamVector aggregate(const std::vector<ParamVector>& models);

// Empirical upper estimate of the gradient-variance bound: max over probe
// points of E||grad f - grad F||^2, inflated by a safety factor.
// sample_draws == 0 enumerates the dataset exactly; otherwise that many
// samples are drawn per probe.
double estimate_variance_bound(const Objective& obj,
                               std::span<const ParamVector> probes,
                               long sample_draws = 0, double inflation = 1.5,
                               uint64_t seed = 0);

}  // namespace stsyn
