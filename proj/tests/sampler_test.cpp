#include <gtest/gtest.h>

#include <Eigen/Cholesky>
#include <cstring>

#include "lpt/model.hpp"
#include "lpt/sampler.hpp"

namespace {

using lpt::ActionMode;
using lpt::ChainStore;
using lpt::GeneratorKind;
using lpt::LangevinConfig;
using lpt::Model;
using lpt::ModelConfig;
using lpt::PriorKind;
using lpt::Tensor;
using lpt::Trajectory;

ModelConfig lin_gauss_cfg(std::size_t d = 4, std::size_t d_a = 2, double s2 = 0.5) {
  ModelConfig cfg;
  cfg.d = d;
  cfg.d_s = 1;
  cfg.action_mode = ActionMode::continuous;
  cfg.d_a = d_a;
  cfg.gen = GeneratorKind::linear;
  cfg.prior = PriorKind::identity;
  cfg.ret_hidden = 0;
  cfg.sigma2 = s2;
  return cfg;
}

// A linear-Gaussian model with controlled coefficient scale, plus one
// trajectory drawn from it.
struct Fixture {
  Model model;
  Trajectory tau;
  double y;
};

Fixture make_fixture(std::uint64_t seed, double w_scale = 0.25,
                     double a_scale = 0.3, std::size_t T = 3) {
  ModelConfig cfg = lin_gauss_cfg();
  lpt::RngStream rng(seed, 17);
  Fixture fx{Model::make(cfg, rng), {}, 0.0};
  for (auto& x : fx.model.params.at("gen.lin.w").vec()) x = w_scale * rng.normal();
  for (auto& x : fx.model.params.at("gen.lin.b").vec()) x = 0.5 * rng.normal();
  for (auto& x : fx.model.params.at("ret.l1.w").vec()) x = a_scale * rng.normal();
  fx.model.params.at("ret.l1.b")[0] = 0.4 * rng.normal();

  Tensor z = Tensor::randn(1, cfg.d, rng);
  fx.tau.states = Tensor(T, cfg.d_s);
  fx.tau.cactions = Tensor(T, cfg.d_a);
  const Tensor& W = fx.model.params.at("gen.lin.w");
  const Tensor& c = fx.model.params.at("gen.lin.b");
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < cfg.d_a; ++j) {
      double mu = c[j];
      for (std::size_t i = 0; i < cfg.d; ++i) mu += z[i] * W.at(i, j);
      fx.tau.cactions.at(t, j) = mu + rng.normal();
    }
  const Tensor& a = fx.model.params.at("ret.l1.w");
  double ry = fx.model.params.at("ret.l1.b")[0];
  for (std::size_t i = 0; i < cfg.d; ++i) ry += z[i] * a[i];
  fx.y = ry + std::sqrt(cfg.sigma2) * rng.normal();
  return fx;
}

TEST(LangevinStep, FixedPointWithoutNoiseOrScore) {
  LangevinConfig cfg;
  cfg.step_size = 0.2;
  cfg.noise_scale = 0.0;
  lpt::RngStream rng(1, 1);
  Tensor z = Tensor::row({0.5, -1.0});
  Tensor s(1, 2);
  Tensor out = lpt::langevin_step(z, s, cfg, rng);
  EXPECT_DOUBLE_EQ(out[0], 0.5);
  EXPECT_DOUBLE_EQ(out[1], -1.0);
}

TEST(LangevinStep, StandardNormalContraction) {
  LangevinConfig cfg;
  cfg.step_size = 0.1;
  cfg.noise_scale = 0.0;
  lpt::RngStream rng(2, 1);
  Tensor z(1, 1, 1.0);
  Tensor score(1, 1, -1.0);  // score of N(0,1) at z=1
  Tensor out = lpt::langevin_step(z, score, cfg, rng);
  EXPECT_DOUBLE_EQ(out.item(), 0.9);
}

TEST(LangevinStep, UlaStationaryVarianceMatchesFormula) {
  // ULA on N(0,1): Var_infinity = 1/(1 - s/2).
  const double s = 0.1;
  const std::size_t chains = 20000, steps = 200;
  LangevinConfig cfg;
  cfg.step_size = s;
  lpt::RngStream rng(3, 1);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t c = 0; c < chains; ++c) {
    Tensor z(1, 1, rng.normal());
    for (std::size_t k = 0; k < steps; ++k) {
      Tensor score(1, 1, -z.item());
      z = lpt::langevin_step(z, score, cfg, rng);
    }
    sum += z.item();
    sumsq += z.item() * z.item();
  }
  const double mean = sum / double(chains);
  const double var = sumsq / double(chains) - mean * mean;
  const double want = 1.0 / (1.0 - s / 2.0);
  EXPECT_NEAR(want, 1.05263, 1e-5);
  EXPECT_LT(std::abs(var - want) / want, 0.05);
}

TEST(LangevinConfig, Validation) {
  LangevinConfig cfg;
  cfg.num_steps = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.step_size = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.guidance_weight = -1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.noise_scale = 0.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(SamplePosterior, DeterministicGivenSeedAndInit) {
  Fixture fx = make_fixture(11);
  LangevinConfig cfg;
  cfg.step_size = 0.05;
  cfg.num_steps = 40;
  Tensor init = Tensor::row({0.1, -0.2, 0.3, 0.0});
  lpt::RngStream r1(77, 5), r2(77, 5), r3(77, 6);
  Tensor a = lpt::sample_posterior(fx.tau, fx.y, fx.model, cfg, init, r1);
  Tensor b = lpt::sample_posterior(fx.tau, fx.y, fx.model, cfg, init, r2);
  Tensor c = lpt::sample_posterior(fx.tau, fx.y, fx.model, cfg, init, r3);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), a.size() * 8), 0);
  EXPECT_NE(std::memcmp(a.data(), c.data(), a.size() * 8), 0);
}

TEST(SamplePosterior, MomentsApproachOracle) {
  Fixture fx = make_fixture(12);
  auto oracle = lpt::gaussian_oracle_solve(fx.model, fx.tau, fx.y);
  const std::size_t d = fx.model.cfg.d;

  LangevinConfig cfg;
  cfg.step_size = 0.05;
  cfg.num_steps = 400;
  const std::size_t chains = 800;
  std::vector<Tensor> finals;
  finals.reserve(chains);
  for (std::size_t c = 0; c < chains; ++c) {
    auto rng = lpt::RngStream::named(900, "chain", c);
    Tensor init = Tensor::randn(1, d, rng);
    finals.push_back(lpt::sample_posterior(fx.tau, fx.y, fx.model, cfg, init, rng));
  }
  Tensor mean(1, d);
  for (const auto& z : finals)
    for (std::size_t i = 0; i < d; ++i) mean[i] += z[i] / double(chains);
  for (std::size_t i = 0; i < d; ++i)
    EXPECT_NEAR(mean[i], oracle.mean[i], 0.1) << "coordinate " << i;

  // Covariance against the oracle's inverse precision, relative Frobenius.
  Eigen::MatrixXd lam = oracle.precision.map();
  Eigen::MatrixXd cov_true = lam.inverse();
  Eigen::MatrixXd cov_hat = Eigen::MatrixXd::Zero(int(d), int(d));
  for (const auto& z : finals) {
    Eigen::VectorXd v(int(d));
    for (std::size_t i = 0; i < d; ++i) v(int(i)) = z[i] - mean[i];
    cov_hat += v * v.transpose();
  }
  cov_hat /= double(chains - 1);
  const double rel = (cov_hat - cov_true).norm() / cov_true.norm();
  EXPECT_LT(rel, 0.15);
}

TEST(SamplePlan, PriorStationaryAtW0) {
  ModelConfig mc = lin_gauss_cfg(2, 1);
  lpt::RngStream mrng(13, 0);
  Model m = Model::make(mc, mrng);
  LangevinConfig cfg;
  cfg.step_size = 0.1;
  cfg.num_steps = 200;
  cfg.guidance_weight = 0.0;
  const std::size_t runs = 10000;
  Tensor sum(1, 2), sumsq(1, 2);
  for (std::size_t r = 0; r < runs; ++r) {
    auto rng = lpt::RngStream::named(321, "plan", r);
    Tensor z = lpt::sample_plan(0.0, m, cfg, rng);
    for (std::size_t i = 0; i < 2; ++i) {
      sum[i] += z[i];
      sumsq[i] += z[i] * z[i];
    }
  }
  const double want = 1.0 / (1.0 - cfg.step_size / 2.0);
  for (std::size_t i = 0; i < 2; ++i) {
    const double mean = sum[i] / double(runs);
    const double var = sumsq[i] / double(runs) - mean * mean;
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_LT(std::abs(var - want) / want, 0.05);
  }
}

TEST(SamplePlan, ConjugateW1MatchesClosedForm) {
  Fixture fx = make_fixture(14);
  const std::size_t d = fx.model.cfg.d;
  const Tensor& a = fx.model.params.at("ret.l1.w");
  const double b = fx.model.params.at("ret.l1.b")[0];
  const double s2 = fx.model.cfg.sigma2;
  const double y = 1.3;

  Eigen::MatrixXd lam = Eigen::MatrixXd::Identity(int(d), int(d));
  Eigen::VectorXd av(int(d));
  for (std::size_t i = 0; i < d; ++i) av(int(i)) = a[i];
  lam += av * av.transpose() / s2;
  Eigen::VectorXd mu = lam.ldlt().solve(av * (y - b) / s2);

  LangevinConfig cfg;
  cfg.step_size = 0.05;
  cfg.num_steps = 250;
  cfg.guidance_weight = 1.0;
  const std::size_t chains = 2000;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(int(d));
  std::vector<Eigen::VectorXd> draws;
  draws.reserve(chains);
  for (std::size_t c = 0; c < chains; ++c) {
    auto rng = lpt::RngStream::named(500, "plan-w1", c);
    Tensor z = lpt::sample_plan(y, fx.model, cfg, rng);
    Eigen::VectorXd v(int(d));
    for (std::size_t i = 0; i < d; ++i) v(int(i)) = z[i];
    draws.push_back(v);
    mean += v;
  }
  mean /= double(chains);
  for (std::size_t i = 0; i < d; ++i)
    EXPECT_NEAR(mean(int(i)), mu(int(i)), 0.08);

  Eigen::MatrixXd cov_hat = Eigen::MatrixXd::Zero(int(d), int(d));
  for (const auto& v : draws) cov_hat += (v - mean) * (v - mean).transpose();
  cov_hat /= double(chains - 1);
  Eigen::MatrixXd cov_true = lam.inverse();
  EXPECT_LT((cov_hat - cov_true).norm() / cov_true.norm(), 0.12);
}

TEST(SamplePlan, VarianceAlongAShrinksWithW) {
  Fixture fx = make_fixture(15, 0.25, 0.8);
  const std::size_t d = fx.model.cfg.d;
  const Tensor& a = fx.model.params.at("ret.l1.w");
  double a2 = 0.0;
  for (std::size_t i = 0; i < d; ++i) a2 += a[i] * a[i];

  LangevinConfig cfg;
  cfg.step_size = 0.03;
  cfg.num_steps = 250;
  const std::size_t chains = 1500;
  std::vector<double> vars;
  for (double w : {1.0, 2.0, 4.0}) {
    cfg.guidance_weight = w;
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t c = 0; c < chains; ++c) {
      auto rng = lpt::RngStream::named(600 + std::uint64_t(10 * w), "plan-w", c);
      Tensor z = lpt::sample_plan(0.9, fx.model, cfg, rng);
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += z[i] * a[i];
      proj /= std::sqrt(a2);
      s1 += proj;
      s2 += proj * proj;
    }
    const double mean = s1 / double(chains);
    vars.push_back(s2 / double(chains) - mean * mean);
  }
  EXPECT_GT(vars[0], vars[1]);
  EXPECT_GT(vars[1], vars[2]);
}

TEST(ChainStoreOps, InitUpdateAndDeterminism) {
  ChainStore store(42, 8, 4);
  const Tensor first = store.get_init(5);
  const Tensor again = store.get_init(5);
  EXPECT_EQ(std::memcmp(first.data(), again.data(), first.size() * 8), 0);

  ChainStore other(42, 8, 4);
  const Tensor other5 = other.get_init(5);
  EXPECT_EQ(std::memcmp(first.data(), other5.data(), first.size() * 8), 0);

  const Tensor idx3 = store.get_init(3);
  EXPECT_NE(std::memcmp(first.data(), idx3.data(), first.size() * 8), 0);

  Tensor z = Tensor::row({1.0, 2.0, 3.0, 4.0});
  store.update(5, z);
  EXPECT_EQ(std::memcmp(store.get_init(5).data(), z.data(), 32), 0);

  EXPECT_THROW(store.get_init(8), std::out_of_range);
  EXPECT_THROW(store.update(9, z), std::out_of_range);
  EXPECT_THROW(store.update(1, Tensor(1, 3)), std::invalid_argument);
}

TEST(Oracle, TrivialAndScalarCases) {
  // W = 0, a = 0: posterior is the prior.
  Fixture fx = make_fixture(16);
  for (auto& x : fx.model.params.at("gen.lin.w").vec()) x = 0.0;
  for (auto& x : fx.model.params.at("ret.l1.w").vec()) x = 0.0;
  auto g = lpt::gaussian_oracle_solve(fx.model, fx.tau, fx.y);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      EXPECT_DOUBLE_EQ(g.precision.at(i, j), i == j ? 1.0 : 0.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(g.mean[i], 0.0);

  // d = 1 conjugacy: W=0, a=1, b=0, sigma2=1, y=2 -> Lambda=2, mu=1.
  ModelConfig cfg = lin_gauss_cfg(1, 1, 1.0);
  lpt::RngStream rng(17, 0);
  Model m = Model::make(cfg, rng);
  for (auto& x : m.params.at("gen.lin.w").vec()) x = 0.0;
  for (auto& x : m.params.at("gen.lin.b").vec()) x = 0.0;
  m.params.at("ret.l1.w")[0] = 1.0;
  m.params.at("ret.l1.b")[0] = 0.0;
  Trajectory tau;
  tau.states = Tensor(2, 1);
  tau.cactions = Tensor(2, 1);
  auto g1 = lpt::gaussian_oracle_solve(m, tau, 2.0);
  EXPECT_DOUBLE_EQ(g1.precision.item(), 2.0);
  EXPECT_DOUBLE_EQ(g1.mean[0], 1.0);
}

TEST(Oracle, NormalEquationResidualIsTiny) {
  Fixture fx = make_fixture(18);
  auto g = lpt::gaussian_oracle_solve(fx.model, fx.tau, fx.y);
  const std::size_t d = 4;
  // Recompute the right-hand side independently.
  const Tensor& W = fx.model.params.at("gen.lin.w");
  const Tensor& c = fx.model.params.at("gen.lin.b");
  const Tensor& a = fx.model.params.at("ret.l1.w");
  const double b = fx.model.params.at("ret.l1.b")[0];
  Eigen::VectorXd h = Eigen::VectorXd::Zero(int(d));
  for (std::size_t t = 0; t < fx.tau.length(); ++t)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < fx.model.cfg.d_a; ++j)
        h(int(i)) += W.at(i, j) * (fx.tau.cactions.at(t, j) - c[j]);
  for (std::size_t i = 0; i < d; ++i)
    h(int(i)) += a[i] * (fx.y - b) / fx.model.cfg.sigma2;

  Eigen::MatrixXd lam = g.precision.map();
  Eigen::VectorXd mu(int(d));
  for (std::size_t i = 0; i < d; ++i) mu(int(i)) = g.mean[i];
  EXPECT_LT((lam * mu - h).norm(), 1e-10);
}

TEST(Oracle, RejectsNonLinearConfigurations) {
  ModelConfig cfg = lin_gauss_cfg();
  cfg.ret_hidden = 4;
  lpt::RngStream rng(19, 0);
  Model m = Model::make(cfg, rng);
  Trajectory tau;
  tau.states = Tensor(1, 1);
  tau.cactions = Tensor(1, 2);
  EXPECT_THROW(lpt::gaussian_oracle_solve(m, tau, 0.0), std::invalid_argument);
}

TEST(Oracle, MarginalLoglikMatchesBayesIdentity) {
  // log p(tau, y) = log p(tau, y | z*) + log p(z*) - log p(z* | tau, y),
  // evaluated at z* = 0 with the closed-form posterior.
  Fixture fx = make_fixture(20);
  const std::size_t d = 4;
  auto g = lpt::gaussian_oracle_solve(fx.model, fx.tau, fx.y);

  const Tensor& c = fx.model.params.at("gen.lin.b");
  const double b = fx.model.params.at("ret.l1.b")[0];
  double lp = 0.0;
  for (std::size_t t = 0; t < fx.tau.length(); ++t) {
    Tensor row(1, fx.model.cfg.d_a);
    for (std::size_t j = 0; j < fx.model.cfg.d_a; ++j) row[j] = fx.tau.cactions.at(t, j);
    lp += lpt::ad::logpdf_normal(row, c, 1.0);
  }
  lp += lpt::ad::logpdf_normal(Tensor(1, 1, fx.y), Tensor(1, 1, b),
                               fx.model.cfg.sigma2);

  Eigen::MatrixXd lam = g.precision.map();
  Eigen::VectorXd mu(int(d));
  for (std::size_t i = 0; i < d; ++i) mu(int(i)) = g.mean[i];
  Eigen::LLT<Eigen::MatrixXd> llt(lam);
  double logdet = 0.0;
  for (int i = 0; i < int(d); ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
  // + log N(0; 0, I) - log N(0; mu, Lambda^{-1}); the 2*pi factors cancel.
  const double identity_value = lp - 0.5 * logdet + 0.5 * mu.dot(lam * mu);

  EXPECT_NEAR(lpt::lingauss_marginal_loglik(fx.model, fx.tau, fx.y),
              identity_value, 1e-9);
}

TEST(Oracle, AntitheticSamplePairsAverageToMean) {
  Fixture fx = make_fixture(21);
  auto g = lpt::gaussian_oracle_solve(fx.model, fx.tau, fx.y);
  lpt::RngStream rng(22, 0);
  auto [plus, minus] = lpt::oracle_sample_pair(g, rng);
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(0.5 * (plus[i] + minus[i]), g.mean[i], 1e-12);
}

}  // namespace
