#include "stsyn/sgd.hpp"

#include <algorithm>
#include <cmath>

namespace stsyn {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> v) { return dot(v, v); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

namespace {

// log(1 + e^t) without overflow at large |t|.
double softplus(double t) {
  if (t > 0.0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Largest eigenvalue of the d x d Gram matrix (1/N) A^T A by power iteration.
double top_gram_eigenvalue(const Dataset& data) {
  const int d = data.dim;
  const long n = data.size();
  std::vector<double> gram(static_cast<size_t>(d) * d, 0.0);
  for (long i = 0; i < n; ++i) {
    const auto a = data.row(i);
    for (int r = 0; r < d; ++r) {
      const double ar = a[r];
      double* grow = gram.data() + static_cast<size_t>(r) * d;
      for (int c = 0; c < d; ++c) grow[c] += ar * a[c];
    }
  }
  for (double& g : gram) g /= static_cast<double>(n);

  std::vector<double> v(d), next(d);
  for (int i = 0; i < d; ++i) v[i] = 1.0 / std::sqrt(static_cast<double>(d));
  double eig = 0.0;
  for (int it = 0; it < 2000; ++it) {
    for (int r = 0; r < d; ++r) {
      next[r] = dot({gram.data() + static_cast<size_t>(r) * d, static_cast<size_t>(d)}, v);
    }
    const double norm = std::sqrt(squared_norm(next));
    if (norm == 0.0) return 0.0;
    for (int r = 0; r < d; ++r) next[r] /= norm;
    const double new_eig = norm;
    v.swap(next);
    if (it > 4 && std::fabs(new_eig - eig) <= 1e-14 * std::max(1.0, new_eig)) {
      eig = new_eig;
      break;
    }
    eig = new_eig;
  }
  return eig;
}

// Solve H x = rhs for symmetric positive-definite H (in place Cholesky).
std::vector<double> solve_spd(std::vector<double> h, std::vector<double> rhs, int d) {
  for (int c = 0; c < d; ++c) {
    double diag = h[static_cast<size_t>(c) * d + c];
    for (int k = 0; k < c; ++k) {
      const double l = h[static_cast<size_t>(c) * d + k];
      diag -= l * l;
    }
    if (diag <= 0.0) throw std::runtime_error("solve_spd: matrix not positive definite");
    diag = std::sqrt(diag);
    h[static_cast<size_t>(c) * d + c] = diag;
    for (int r = c + 1; r < d; ++r) {
      double v = h[static_cast<size_t>(r) * d + c];
      for (int k = 0; k < c; ++k) {
        v -= h[static_cast<size_t>(r) * d + k] * h[static_cast<size_t>(c) * d + k];
      }
      h[static_cast<size_t>(r) * d + c] = v / diag;
    }
  }
  // forward then backward substitution
  for (int r = 0; r < d; ++r) {
    double v = rhs[r];
    for (int k = 0; k < r; ++k) v -= h[static_cast<size_t>(r) * d + k] * rhs[k];
    rhs[r] = v / h[static_cast<size_t>(r) * d + r];
  }
  for (int r = d - 1; r >= 0; --r) {
    double v = rhs[r];
    for (int k = r + 1; k < d; ++k) v -= h[static_cast<size_t>(k) * d + r] * rhs[k];
    rhs[r] = v / h[static_cast<size_t>(r) * d + r];
  }
  return rhs;
}

}  // namespace

Objective::Objective(ObjectiveKind kind, std::shared_ptr<const Dataset> data)
    : kind_(kind), data_(std::move(data)) {
  if (!data_ || data_->size() == 0 || data_->dim < 1) {
    throw std::invalid_argument("Objective: dataset must be non-empty");
  }
  const double gram_eig = top_gram_eigenvalue(*data_);
  if (kind_ == ObjectiveKind::quadratic) {
    smoothness_ = gram_eig;
    // Normal equations: H w* = (1/N) A^T b.
    const int d = data_->dim;
    const long n = data_->size();
    std::vector<double> gram(static_cast<size_t>(d) * d, 0.0);
    std::vector<double> rhs(d, 0.0);
    for (long i = 0; i < n; ++i) {
      const auto a = data_->row(i);
      const double b = data_->targets[i];
      for (int r = 0; r < d; ++r) {
        const double ar = a[r];
        double* grow = gram.data() + static_cast<size_t>(r) * d;
        for (int c = 0; c < d; ++c) grow[c] += ar * a[c];
        rhs[r] += ar * b;
      }
    }
    for (double& g : gram) g /= static_cast<double>(n);
    for (double& r : rhs) r /= static_cast<double>(n);
    ParamVector mini = solve_spd(std::move(gram), std::move(rhs), d);
    optimal_value_ = full_loss(mini);
    minimizer_ = std::move(mini);
  } else {
    smoothness_ = 0.25 * gram_eig;
    for (double t : data_->targets) {
      if (t != 1.0 && t != -1.0) {
        throw std::invalid_argument("Objective: logistic targets must be +/-1");
      }
    }
  }
}

double Objective::sample_loss(const ParamVector& w, long i) const {
  const double z = dot(data_->row(i), w);
  if (kind_ == ObjectiveKind::quadratic) {
    const double r = z - data_->targets[i];
    return 0.5 * r * r;
  }
  return softplus(-data_->targets[i] * z);
}

void Objective::accumulate_sample_grad(const ParamVector& w, long i, double weight,
                                       ParamVector& out) const {
  const auto a = data_->row(i);
  const double z = dot(a, w);
  double coeff;
  if (kind_ == ObjectiveKind::quadratic) {
    coeff = weight * (z - data_->targets[i]);
  } else {
    const double y = data_->targets[i];
    coeff = weight * (-y * sigmoid(-y * z));
  }
  for (int c = 0; c < data_->dim; ++c) out[c] += coeff * a[c];
}

double Objective::full_loss(const ParamVector& w) const {
  const long n = data_->size();
  double loss = 0.0;
  for (long i = 0; i < n; ++i) loss += sample_loss(w, i);
  return loss / static_cast<double>(n);
}

std::pair<double, ParamVector> Objective::full_loss_and_grad(const ParamVector& w) const {
  const long n = data_->size();
  double loss = 0.0;
  ParamVector grad(data_->dim, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (long i = 0; i < n; ++i) {
    loss += sample_loss(w, i);
    accumulate_sample_grad(w, i, inv_n, grad);
  }
  loss *= inv_n;
  if (!std::isfinite(loss) || !all_finite(grad)) {
    throw NumericFailure("full_loss_and_grad: non-finite result");
  }
  return {loss, std::move(grad)};
}

double Objective::gradient_variance_at(const ParamVector& w) const {
  const long n = data_->size();
  const auto [loss, mean_grad] = full_loss_and_grad(w);
  (void)loss;
  ParamVector g(data_->dim);
  double acc = 0.0;
  for (long i = 0; i < n; ++i) {
    std::fill(g.begin(), g.end(), 0.0);
    accumulate_sample_grad(w, i, 1.0, g);
    double dist = 0.0;
    for (int c = 0; c < data_->dim; ++c) {
      const double d = g[c] - mean_grad[c];
      dist += d * d;
    }
    acc += dist;
  }
  return acc / static_cast<double>(n);
}

std::optional<double> Objective::accuracy(const ParamVector& w) const {
  if (kind_ != ObjectiveKind::logistic) return std::nullopt;
  const long n = data_->size();
  long hits = 0;
  for (long i = 0; i < n; ++i) {
    const double z = dot(data_->row(i), w);
    if ((z >= 0.0 ? 1.0 : -1.0) == data_->targets[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

MiniBatch draw_minibatch(const std::vector<long>& shard, int batch_size, int worker,
                         long round, int step, RngStream& stream) {
  if (shard.empty()) throw std::invalid_argument("draw_minibatch: empty shard");
  if (batch_size < 1) throw std::invalid_argument("draw_minibatch: batch_size must be >= 1");
  MiniBatch b;
  b.worker = worker;
  b.round = round;
  b.step = step;
  b.indices.resize(batch_size);
  for (int i = 0; i < batch_size; ++i) {
    b.indices[i] = shard[stream.next_below(shard.size())];
  }
  return b;
}

ParamVector minibatch_gradient(const Objective& obj, const ParamVector& w,
                               const MiniBatch& batch) {
  if (batch.indices.empty()) throw std::invalid_argument("minibatch_gradient: empty batch");
  ParamVector g(obj.dim(), 0.0);
  const double inv_b = 1.0 / static_cast<double>(batch.indices.size());
  for (long idx : batch.indices) obj.accumulate_sample_grad(w, idx, inv_b, g);
  if (!all_finite(g)) {
    throw NumericFailure("minibatch_gradient: non-finite gradient (worker " +
                         std::to_string(batch.worker) + ", round " +
                         std::to_string(batch.round) + ", step " +
                         std::to_string(batch.step) + ")");
  }
  return g;
}

ParamVector local_update(const Objective& obj, const ParamVector& w,
                         const MiniBatch& batch, double alpha) {
  if (!(alpha > 0.0)) throw std::invalid_argument("local_update: alpha must be > 0");
  const ParamVector g = minibatch_gradient(obj, w, batch);
  ParamVector next(w);
  for (size_t c = 0; c < next.size(); ++c) next[c] -= alpha * g[c];
  return next;
}

namespace {

ParamVector pairwise_sum(const std::vector<ParamVector>& models, size_t lo, size_t hi) {
  if (hi - lo == 1) return models[lo];
  const size_t mid = lo + (hi - lo) / 2;
  ParamVector left = pairwise_sum(models, lo, mid);
  const ParamVector right = pairwise_sum(models, mid, hi);
  for (size_t c = 0; c < left.size(); ++c) left[c] += right[c];
  return left;
}

}  // namespace

ParamVector aggregate(const std::vector<ParamVector>& models) {
  if (models.empty()) {
    throw std::invalid_argument("aggregate: no uploaded models this round");
  }
  const size_t d = models[0].size();
  bool identical = true;
  for (const auto& m : models) {
    if (m.size() != d) throw std::invalid_argument("aggregate: dimension mismatch");
    if (identical && m != models[0]) identical = false;
  }
  if (identical) return models[0];
  ParamVector sum = pairwise_sum(models, 0, models.size());
  const double inv = 1.0 / static_cast<double>(models.size());
  for (double& x : sum) x *= inv;
  return sum;
}

double estimate_variance_bound(const Objective& obj, std::span<const ParamVector> probes,
                               long sample_draws, double inflation, uint64_t seed) {
  double worst = 0.0;
  const long n = obj.data().size();
  ParamVector g(obj.dim());
  for (size_t p = 0; p < probes.size(); ++p) {
    const ParamVector& w = probes[p];
    if (!all_finite(w)) throw std::invalid_argument("estimate_variance_bound: non-finite probe");
    double value;
    if (sample_draws <= 0 || sample_draws >= n) {
      value = obj.gradient_variance_at(w);
    } else {
      RngStream rs(derive_seed(seed, Stream::probe, p));
      const auto [loss, mean_grad] = obj.full_loss_and_grad(w);
      (void)loss;
      double acc = 0.0;
      for (long t = 0; t < sample_draws; ++t) {
        const long idx = static_cast<long>(rs.next_below(n));
        std::fill(g.begin(), g.end(), 0.0);
        obj.accumulate_sample_grad(w, idx, 1.0, g);
        double dist = 0.0;
        for (int c = 0; c < obj.dim(); ++c) {
          const double dd = g[c] - mean_grad[c];
          dist += dd * dd;
        }
        acc += dist;
      }
      value = acc / static_cast<double>(sample_draws);
    }
    worst = std::max(worst, value);
  }
  return inflation * worst;
}

}  // namespace stsyn
