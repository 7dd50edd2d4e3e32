#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lpt/model.hpp"
#include "lpt/rng.hpp"
#include "lpt/tensor.hpp"

namespace lpt {

struct LangevinConfig {
  double step_size = 0.3;
  std::size_t num_steps = 15;
  double guidance_weight = 1.0;  // inference only
  double noise_scale = 1.0;      // 0 only in deterministic test mode

  void validate() const {
    if (step_size <= 0.0) throw std::invalid_argument("langevin: step_size must be > 0");
    if (num_steps < 1) throw std::invalid_argument("langevin: num_steps must be >= 1");
    if (guidance_weight < 0.0)
      throw std::invalid_argument("langevin: guidance_weight must be >= 0");
    if (noise_scale != 0.0 && noise_scale != 1.0)
      throw std::invalid_argument("langevin: noise_scale must be 0 or 1");
  }
};

// One unadjusted Langevin update: z + s*score + noise_scale*sqrt(2s)*eps.
inline Tensor langevin_step(const Tensor& z, const Tensor& score,
                            const LangevinConfig& cfg, RngStream& rng) {
  if (!z.same_shape(score)) throw std::invalid_argument("langevin_step: shape mismatch");
  Tensor out = z;
  const double s = cfg.step_size;
  const double ns = cfg.noise_scale * std::sqrt(2.0 * s);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += s * score[i] + ns * rng.normal();
  return out;
}

// N steps targeting p(z0 | tau, y) through the model's posterior score.
inline Tensor sample_posterior(const Trajectory& tau, double y, const Model& model,
                               const LangevinConfig& cfg, Tensor z0, RngStream& rng) {
  cfg.validate();
  if (z0.rows() != 1 || z0.cols() != model.cfg.d)
    throw std::invalid_argument("sample_posterior: init dimension mismatch");
  for (std::size_t k = 0; k < cfg.num_steps; ++k) {
    Tensor score = model.posterior_score(z0, tau, y);
    z0 = langevin_step(z0, score, cfg, rng);
  }
  return z0;
}

// N steps from a fresh N(0, I) init targeting the plan posterior given only
// the desired return, with guidance weight w on the return term.
inline Tensor sample_plan(double y, const Model& model, const LangevinConfig& cfg,
                          RngStream& rng) {
  cfg.validate();
  Tensor z0 = Tensor::randn(1, model.cfg.d, rng);
  for (std::size_t k = 0; k < cfg.num_steps; ++k) {
    Tensor score = model.plan_score(z0, y, cfg.guidance_weight);
    z0 = langevin_step(z0, score, cfg, rng);
  }
  return z0;
}

// Persistent per-example chain states. First touch of an index draws its
// N(0, I) init from a stream derived from (master_seed, index), so touch
// order and thread scheduling cannot change the draw.
class ChainStore {
 public:
  ChainStore() : master_seed_(0) {}
  ChainStore(std::uint64_t master_seed, std::size_t n, std::size_t d)
      : master_seed_(master_seed), d_(d), states_(n), touched_(n, false) {}

  std::size_t size() const { return states_.size(); }
  std::size_t dim() const { return d_; }
  std::uint64_t master_seed() const { return master_seed_; }

  const Tensor& get_init(std::size_t idx) {
    check(idx);
    if (!touched_[idx]) {
      auto rng = RngStream::named(master_seed_, "pmc-init", idx);
      states_[idx] = Tensor::randn(1, d_, rng);
      touched_[idx] = true;
    }
    return states_[idx];
  }

  void update(std::size_t idx, Tensor z0) {
    check(idx);
    if (z0.rows() != 1 || z0.cols() != d_)
      throw std::invalid_argument("ChainStore::update: dimension mismatch");
    states_[idx] = std::move(z0);
    touched_[idx] = true;
  }

  bool touched(std::size_t idx) const {
    if (idx >= touched_.size()) throw std::out_of_range("ChainStore: index");
    return touched_[idx];
  }

  // Serialization views (checkpoint embedding).
  const std::vector<Tensor>& states() const { return states_; }
  const std::vector<bool>& touched_flags() const { return touched_; }
  void restore(std::size_t idx, Tensor z0) {
    check(idx);
    states_[idx] = std::move(z0);
    touched_[idx] = true;
  }

 private:
  void check(std::size_t idx) const {
    if (idx >= states_.size()) throw std::out_of_range("ChainStore: index");
  }

  std::uint64_t master_seed_ = 0;
  std::size_t d_ = 0;
  std::vector<Tensor> states_;
  std::vector<bool> touched_;
};

// ---- conjugate linear-Gaussian oracle ----

struct GaussianOracle {
  Tensor precision;  // (d x d), symmetric positive definite
  Tensor mean;       // (1 x d)
};

namespace detail {

inline void require_linear_gaussian(const Model& m) {
  if (m.cfg.prior != PriorKind::identity)
    throw std::invalid_argument("oracle: prior must be Identity");
  if (m.cfg.gen != GeneratorKind::linear)
    throw std::invalid_argument("oracle: generator must be linear");
  if (m.cfg.ret_hidden != 0)
    throw std::invalid_argument("oracle: return head must be linear");
}

}  // namespace detail

// Closed-form posterior over z for the linear-Gaussian configuration:
// actions a_t | z ~ N(zW + c, I), return y | z ~ N(za + b, sigma2), prior
// z ~ N(0, I). Precision = I + T WW^T + aa^T/sigma2; mean solves the
// normal equations by a direct LDLT factorization.
inline GaussianOracle gaussian_oracle_solve(const Model& m, const Trajectory& tau,
                                            double y) {
  detail::require_linear_gaussian(m);
  const std::size_t d = m.cfg.d;
  const std::size_t T = tau.length();
  auto W = m.params.at("gen.lin.w").map();   // (d x d_a)
  auto c = m.params.at("gen.lin.b").map();   // (1 x d_a)
  auto a = m.params.at("ret.l1.w").map();    // (d x 1)
  const double b = m.params.at("ret.l1.b").item();
  const double s2 = m.cfg.sigma2;

  Eigen::MatrixXd lam = Eigen::MatrixXd::Identity(Eigen::Index(d), Eigen::Index(d));
  lam += double(T) * (W * W.transpose());
  lam += (a * a.transpose()) / s2;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(Eigen::Index(d));
  auto A = tau.cactions.map();  // (T x d_a)
  for (std::size_t t = 0; t < T; ++t)
    h += W * (A.row(Eigen::Index(t)) - c.row(0)).transpose();
  h += a.col(0) * ((y - b) / s2);

  Eigen::LDLT<Eigen::MatrixXd> ldlt(lam);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw std::logic_error("oracle: precision not positive definite");
  Eigen::VectorXd mu = ldlt.solve(h);

  GaussianOracle out;
  out.precision = Tensor(d, d);
  out.precision.map() = lam;
  out.mean = Tensor(1, d);
  for (std::size_t i = 0; i < d; ++i) out.mean[i] = mu(Eigen::Index(i));
  return out;
}

// Exact draw from the oracle posterior: mu + C^{-T} xi with Lambda = C C^T.
// Returns the pair (mu + delta, mu - delta) so callers can average
// antithetically.
inline std::pair<Tensor, Tensor> oracle_sample_pair(const GaussianOracle& g,
                                                    RngStream& rng) {
  const std::size_t d = g.mean.cols();
  Eigen::MatrixXd lam = g.precision.map();
  Eigen::LLT<Eigen::MatrixXd> llt(lam);
  if (llt.info() != Eigen::Success)
    throw std::logic_error("oracle_sample: precision not positive definite");
  Eigen::VectorXd xi(Eigen::Index(d));
  for (std::size_t i = 0; i < d; ++i) xi(Eigen::Index(i)) = rng.normal();
  // Solve C^T delta = xi.
  Eigen::VectorXd delta = llt.matrixU().solve(xi);
  Tensor plus(1, d), minus(1, d);
  for (std::size_t i = 0; i < d; ++i) {
    plus[i] = g.mean[i] + delta(Eigen::Index(i));
    minus[i] = g.mean[i] - delta(Eigen::Index(i));
  }
  return {plus, minus};
}

// Closed-form log marginal likelihood log p(tau, y) for the linear-Gaussian
// configuration: the stacked observation vector is affine in z with Gaussian
// noise, hence jointly Gaussian.
inline double lingauss_marginal_loglik(const Model& m, const Trajectory& tau,
                                       double y) {
  detail::require_linear_gaussian(m);
  const std::size_t d = m.cfg.d;
  const std::size_t da = m.cfg.d_a;
  const std::size_t T = tau.length();
  const std::size_t n = T * da + 1;
  auto W = m.params.at("gen.lin.w").map();  // (d x d_a)
  auto c = m.params.at("gen.lin.b").map();  // (1 x d_a)
  auto a = m.params.at("ret.l1.w").map();   // (d x 1)
  const double b = m.params.at("ret.l1.b").item();

  Eigen::MatrixXd M(Eigen::Index(d), Eigen::Index(n));
  for (std::size_t t = 0; t < T; ++t) M.middleCols(Eigen::Index(t * da), Eigen::Index(da)) = W;
  M.col(Eigen::Index(n - 1)) = a.col(0);

  Eigen::VectorXd mean(Eigen::Index(n)), x(Eigen::Index(n));
  auto A = tau.cactions.map();
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < da; ++j) {
      mean(Eigen::Index(t * da + j)) = c(0, Eigen::Index(j));
      x(Eigen::Index(t * da + j)) = A(Eigen::Index(t), Eigen::Index(j));
    }
  mean(Eigen::Index(n - 1)) = b;
  x(Eigen::Index(n - 1)) = y;

  Eigen::MatrixXd cov = M.transpose() * M;
  for (std::size_t i = 0; i + 1 < n; ++i) cov(Eigen::Index(i), Eigen::Index(i)) += 1.0;
  cov(Eigen::Index(n - 1), Eigen::Index(n - 1)) += m.cfg.sigma2;

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw std::logic_error("marginal: covariance not positive definite");
  Eigen::VectorXd r = x - mean;
  Eigen::VectorXd sol = llt.solve(r);
  double logdet = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    logdet += 2.0 * std::log(llt.matrixL()(Eigen::Index(i), Eigen::Index(i)));
  const double log2pi = std::log(2.0 * 3.141592653589793238462643383279);
  return -0.5 * (double(n) * log2pi + logdet + r.dot(sol));
}

}  // namespace lpt
