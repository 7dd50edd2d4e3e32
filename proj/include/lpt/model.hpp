#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "lpt/autodiff.hpp"
#include "lpt/nn.hpp"
#include "lpt/rng.hpp"
#include "lpt/tensor.hpp"

namespace lpt {

enum class ActionMode { discrete, continuous };
enum class PriorKind { identity, unet, resmlp };
enum class GeneratorKind { transformer, linear };

struct ModelConfig {
  std::size_t d = 16;     // latent dimension
  std::size_t d_s = 2;    // state dimension
  ActionMode action_mode = ActionMode::discrete;
  std::size_t action_arity = 5;  // discrete head
  std::size_t d_a = 1;           // continuous head
  std::size_t K = 16;            // context window, in steps
  std::size_t L = 2;             // transformer blocks
  std::size_t width = 16;        // hidden width
  std::size_t z_tokens = 1;      // cross-attention keys carved from z
  PriorKind prior = PriorKind::unet;
  GeneratorKind gen = GeneratorKind::transformer;
  std::size_t unet_channels = 1;  // z reshaped to (channels x d/channels)
  std::size_t unet_base = 8;
  std::vector<std::size_t> unet_mults = {1, 2};
  std::size_t unet_resblocks = 1;
  std::size_t resmlp_width = 32;
  std::size_t ret_hidden = 32;  // 0 selects the linear return head
  double sigma2 = 0.25;         // return observation variance, fixed

  std::size_t head_dim() const {
    return action_mode == ActionMode::discrete ? action_arity : d_a;
  }

  void validate() const {
    if (d == 0 || K == 0 || width == 0) throw std::invalid_argument("config: zero dim");
    if (sigma2 <= 0.0) throw std::invalid_argument("config: sigma2 must be > 0");
    if (z_tokens == 0 || d % z_tokens != 0)
      throw std::invalid_argument("config: z_tokens must divide d");
    if (prior == PriorKind::unet) {
      if (unet_channels == 0 || d % unet_channels != 0)
        throw std::invalid_argument("config: unet_channels must divide d");
      std::size_t len = d / unet_channels;
      for (std::size_t i = 1; i < unet_mults.size(); ++i) {
        if (len % 2 != 0)
          throw std::invalid_argument("config: latent length not divisible for UNet depth");
        len /= 2;
      }
      if (unet_mults.empty() || unet_resblocks == 0)
        throw std::invalid_argument("config: empty UNet plan");
    }
  }
};

struct Trajectory {
  Tensor states;              // (T x d_s)
  std::vector<int> dactions;  // length T in discrete mode
  Tensor cactions;            // (T x d_a) in continuous mode

  std::size_t length() const { return states.rows(); }
  bool discrete() const { return !dactions.empty(); }

  void validate(const ModelConfig& cfg) const {
    const std::size_t T = length();
    if (T < 1) throw std::invalid_argument("trajectory: empty");
    if (states.cols() != cfg.d_s)
      throw std::invalid_argument("trajectory: state dim mismatch");
    if (cfg.action_mode == ActionMode::discrete) {
      if (dactions.size() != T)
        throw std::invalid_argument("trajectory: action count mismatch");
      for (int a : dactions)
        if (a < 0 || std::size_t(a) >= cfg.action_arity)
          throw std::invalid_argument("trajectory: action index out of range");
    } else {
      if (cactions.rows() != T || cactions.cols() != cfg.d_a)
        throw std::invalid_argument("trajectory: continuous action shape mismatch");
    }
  }
};

// Normalized single-step action law: probabilities for a categorical head,
// mean of a unit-covariance Gaussian for a continuous head.
struct ActionDistribution {
  ActionMode mode;
  Tensor probs;  // (1 x arity)
  Tensor mean;   // (1 x d_a)

  int argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < probs.size(); ++i)
      if (probs[i] > probs[best]) best = i;
    return int(best);
  }

  int sample(RngStream& rng) const {
    double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return int(i);
    }
    return int(probs.size()) - 1;
  }

  Tensor sample_continuous(RngStream& rng) const {
    Tensor a = mean;
    for (auto& x : a.vec()) x += rng.normal();
    return a;
  }

  double log_prob_discrete(int a) const { return std::log(probs[std::size_t(a)]); }
  double log_prob_continuous(const Tensor& a) const {
    return ad::logpdf_normal(a, mean, 1.0);
  }
};

// A context window over steps [begin, end]: tokens are states begin..end and
// actions begin..end-1, interleaved; the query is the state token at `end`.
// The window is the transformer's entire input, which is what makes the
// finite-context contract an exact equality rather than a masking promise.
struct WindowSpec {
  std::size_t begin = 0;
  std::size_t end = 0;
};

namespace detail {

struct StackPlan {
  std::vector<std::size_t> src;   // row into [S_emb; A_emb]: state u -> u, action u -> Ts+u
  std::vector<std::size_t> pos;   // position inside the window
  std::vector<std::size_t> qrow;  // stacked row of each window's query token
  std::vector<std::pair<std::size_t, std::size_t>> span;  // [first, last) rows
};

inline StackPlan build_stack_plan(const std::vector<WindowSpec>& windows,
                                  std::size_t n_states) {
  StackPlan plan;
  for (const auto& w : windows) {
    const std::size_t first = plan.src.size();
    std::size_t p = 0;
    for (std::size_t u = w.begin; u <= w.end; ++u) {
      plan.src.push_back(u);  // state token
      plan.pos.push_back(p++);
      if (u < w.end) {
        plan.src.push_back(n_states + u);  // action token
        plan.pos.push_back(p++);
      }
    }
    plan.qrow.push_back(plan.src.size() - 1);
    plan.span.emplace_back(first, plan.src.size());
  }
  return plan;
}

}  // namespace detail

struct Model {
  ModelConfig cfg;
  ParamStore params;

  static Model make(const ModelConfig& cfg, RngStream& rng) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    m.init_prior_params(rng);
    m.init_generator_params(rng);
    m.init_return_params(rng);
    return m;
  }

  // ---- prior transform U_alpha ----

  ad::Var prior_transform_g(ad::Tape& tape, Binder& p, ad::Var z0) const {
    if (z0.rows() != 1 || z0.cols() != cfg.d)
      throw std::invalid_argument("prior_transform: z0 must be (1 x d)");
    switch (cfg.prior) {
      case PriorKind::identity:
        return z0;
      case PriorKind::resmlp: {
        auto h = ad::tanh_(linear(p, "alpha.l1", z0));
        return ad::add(z0, linear(p, "alpha.l2", h));
      }
      case PriorKind::unet:
        return ad::add(z0, unet_g(tape, p, z0));
    }
    throw std::logic_error("prior_transform: unknown kind");
  }

  // ---- generator p_beta ----

  // Stacked-window transformer; returns one output row per window (the query
  // token after the final layer norm), shape (n_windows x width).
  ad::Var transformer_queries_g(ad::Tape& tape, Binder& p, const Tensor& states,
                                const std::vector<int>& dacts, const Tensor& cacts,
                                const std::vector<WindowSpec>& windows,
                                ad::Var z) const {
    const std::size_t Ts = states.rows();
    const std::size_t Ta =
        cfg.action_mode == ActionMode::discrete ? dacts.size() : cacts.rows();
    for (const auto& w : windows) {
      if (w.end >= Ts || w.begin > w.end)
        throw std::invalid_argument("window out of range");
      if (w.end - w.begin + 1 > cfg.K)
        throw std::invalid_argument("window wider than context K");
      if (w.end > 0 && w.end - 1 >= Ta && w.end - w.begin > 0)
        throw std::invalid_argument("window references missing action");
    }
    auto plan = detail::build_stack_plan(windows, Ts);

    // Token embeddings, computed once over the distinct states/actions and
    // then gathered into the stacked window layout.
    auto s_emb = linear(p, "gen.semb", tape.constant(states));
    ad::Var a_emb;
    bool have_actions = Ta > 0;
    if (have_actions) {
      if (cfg.action_mode == ActionMode::discrete) {
        std::vector<std::size_t> ids(dacts.size());
        for (std::size_t i = 0; i < dacts.size(); ++i) ids[i] = std::size_t(dacts[i]);
        a_emb = ad::gather_rows(p["gen.aemb"], ids);
      } else {
        a_emb = linear(p, "gen.aemb", tape.constant(cacts));
      }
    }
    ad::Var token_bank = have_actions ? ad::concat_rows({s_emb, a_emb}) : s_emb;
    ad::Var x = ad::add(ad::gather_rows(token_bank, plan.src),
                        ad::gather_rows(p["gen.pos"], plan.pos));

    // Cross-attention keys/values come from z, carved into z_tokens rows.
    ad::Var z_rows = cfg.z_tokens == 1 ? z : ad::reshape(z, cfg.z_tokens,
                                                         cfg.d / cfg.z_tokens);
    ad::Var z_bank = linear(p, "gen.zemb", z_rows);  // (z_tokens x width)

    const double inv_sqrt_w = 1.0 / std::sqrt(double(cfg.width));
    for (std::size_t l = 0; l < cfg.L; ++l) {
      const std::string lp = "gen.l" + std::to_string(l);
      // Causal self-attention inside each window.
      {
        auto h = layer_norm(p, lp + ".ln1", x);
        auto q = ad::matmul(h, p[lp + ".att.wq"]);
        auto k = ad::matmul(h, p[lp + ".att.wk"]);
        auto v = ad::matmul(h, p[lp + ".att.wv"]);
        std::vector<ad::Var> outs;
        outs.reserve(plan.span.size());
        for (const auto& [first, last] : plan.span) {
          auto qw = ad::slice_rows(q, first, last);
          auto kw = ad::slice_rows(k, first, last);
          auto vw = ad::slice_rows(v, first, last);
          auto att = ad::causal_softmax(
              ad::scale(ad::matmul(qw, kw, false, true), inv_sqrt_w));
          outs.push_back(ad::matmul(att, vw));
        }
        auto merged = plan.span.size() == 1 ? outs[0] : ad::concat_rows(outs);
        x = ad::add(x, ad::add_rowvec(ad::matmul(merged, p[lp + ".att.wo"]),
                                      p[lp + ".att.bo"]));
      }
      // Cross-attention to the plan tokens.
      {
        auto h = layer_norm(p, lp + ".ln2", x);
        auto q = ad::matmul(h, p[lp + ".crs.wq"]);
        auto k = ad::matmul(z_bank, p[lp + ".crs.wk"]);
        auto v = ad::matmul(z_bank, p[lp + ".crs.wv"]);
        auto att = ad::softmax_rows(ad::scale(ad::matmul(q, k, false, true), inv_sqrt_w));
        x = ad::add(x, ad::add_rowvec(ad::matmul(ad::matmul(att, v), p[lp + ".crs.wo"]),
                                      p[lp + ".crs.bo"]));
      }
      // Position-wise MLP.
      {
        auto h = layer_norm(p, lp + ".ln3", x);
        auto m1 = ad::relu(linear(p, lp + ".mlp.l1", h));
        x = ad::add(x, linear(p, lp + ".mlp.l2", m1));
      }
    }
    auto xf = layer_norm(p, "gen.lnf", x);
    return ad::gather_rows(xf, plan.qrow);
  }

  ad::Var traj_loglik_g(ad::Tape& tape, Binder& p, const Trajectory& tau,
                        ad::Var z) const {
    tau.validate(cfg);
    const std::size_t T = tau.length();
    if (cfg.gen == GeneratorKind::linear) {
      if (cfg.action_mode != ActionMode::continuous)
        throw std::invalid_argument("linear generator requires continuous actions");
      auto mu = linear(p, "gen.lin", z);  // (1 x d_a)
      return ad::normal_loglik(ad::tile_rows(mu, T), tau.cactions, 1.0);
    }
    std::vector<WindowSpec> windows(T);
    for (std::size_t t = 0; t < T; ++t)
      windows[t] = {t + 1 >= cfg.K ? t + 1 - cfg.K : 0, t};
    auto queries =
        transformer_queries_g(tape, p, tau.states, tau.dactions, tau.cactions,
                              windows, z);
    auto head = linear(p, "gen.head", queries);  // (T x head_dim)
    if (cfg.action_mode == ActionMode::discrete) {
      std::vector<std::size_t> acts(T);
      for (std::size_t t = 0; t < T; ++t) acts[t] = std::size_t(tau.dactions[t]);
      return ad::sum(ad::take_per_row(ad::log_softmax_rows(head), acts));
    }
    return ad::normal_loglik(head, tau.cactions, 1.0);
  }

  // ---- return predictor p_gamma ----

  ad::Var return_mean_g(Binder& p, ad::Var z) const {
    if (cfg.ret_hidden == 0) return linear(p, "ret.l1", z);
    auto h = ad::tanh_(linear(p, "ret.l1", z));
    return linear(p, "ret.l2", h);
  }

  ad::Var return_loglik_g(ad::Tape&, Binder& p, double y, ad::Var z) const {
    return ad::normal_loglik(return_mean_g(p, z), Tensor(1, 1, y), cfg.sigma2);
  }

  // ---- value-space API ----

  Tensor prior_transform(const Tensor& z0) const {
    ad::Tape tape;
    Binder p(tape, params, false);
    return prior_transform_g(tape, p, tape.constant(z0)).value();
  }

  // Context may exceed K steps; it is truncated to the trailing window, so the
  // output provably depends on at most the last K steps.
  ActionDistribution action_distribution(const Tensor& ctx_states,
                                         const std::vector<int>& ctx_dacts,
                                         const Tensor& ctx_cacts,
                                         const Tensor& z) const {
    const std::size_t n = ctx_states.rows();
    if (n == 0) throw std::invalid_argument("action_distribution: empty context");
    const std::size_t na = cfg.action_mode == ActionMode::discrete
                               ? ctx_dacts.size()
                               : ctx_cacts.rows();
    if (na + 1 != n)
      throw std::invalid_argument("action_distribution: need one fewer action than states");
    if (z.rows() != 1 || z.cols() != cfg.d)
      throw std::invalid_argument("action_distribution: z dimension mismatch");

    Tensor states = ctx_states;
    std::vector<int> dacts = ctx_dacts;
    Tensor cacts = ctx_cacts;
    if (n > cfg.K) {
      const std::size_t drop = n - cfg.K;
      Tensor s(cfg.K, ctx_states.cols());
      for (std::size_t r = 0; r < cfg.K; ++r)
        for (std::size_t c = 0; c < s.cols(); ++c) s.at(r, c) = ctx_states.at(drop + r, c);
      states = std::move(s);
      if (cfg.action_mode == ActionMode::discrete) {
        dacts.assign(ctx_dacts.begin() + std::ptrdiff_t(drop), ctx_dacts.end());
      } else {
        Tensor a(cfg.K - 1, ctx_cacts.cols());
        for (std::size_t r = 0; r < a.rows(); ++r)
          for (std::size_t c = 0; c < a.cols(); ++c)
            a.at(r, c) = ctx_cacts.at(drop + r, c);
        cacts = std::move(a);
      }
    }

    ad::Tape tape;
    Binder p(tape, params, false);
    auto zv = tape.constant(z);
    ActionDistribution out;
    out.mode = cfg.action_mode;
    if (cfg.gen == GeneratorKind::linear) {
      out.mean = linear(p, "gen.lin", zv).value();
      return out;
    }
    std::vector<WindowSpec> w{{0, states.rows() - 1}};
    auto queries = transformer_queries_g(tape, p, states, dacts, cacts, w, zv);
    auto head = linear(p, "gen.head", queries);
    if (cfg.action_mode == ActionMode::discrete) {
      out.probs = ad::softmax_rows(head).value();
    } else {
      out.mean = head.value();
    }
    return out;
  }

  double traj_loglik(const Trajectory& tau, const Tensor& z) const {
    ad::Tape tape;
    Binder p(tape, params, false);
    return traj_loglik_g(tape, p, tau, tape.constant(z)).value().item();
  }

  double return_loglik(double y, const Tensor& z) const {
    ad::Tape tape;
    Binder p(tape, params, false);
    return return_loglik_g(tape, p, y, tape.constant(z)).value().item();
  }

  double return_mean(const Tensor& z) const {
    ad::Tape tape;
    Binder p(tape, params, false);
    return return_mean_g(p, tape.constant(z)).value().item();
  }

  // ---- scores over z0 ----

  struct ScoreTerms {
    bool gen = true;
    bool ret = true;
    double ret_weight = 1.0;
  };

  // score = -z0 + d/dz0 [ w * log p_gamma(y | U(z0)) + sum_t log p_beta ].
  Tensor score_z0(const Tensor& z0, const Trajectory* tau, double y,
                  const ScoreTerms& terms) const {
    if (z0.rows() != 1 || z0.cols() != cfg.d)
      throw std::invalid_argument("score: z0 must be (1 x d)");
    Tensor score(1, cfg.d);
    for (std::size_t i = 0; i < cfg.d; ++i) score[i] = -z0[i];
    if (!terms.gen && !terms.ret) return score;
    ad::Tape tape;
    Binder p(tape, params, false);
    auto z0v = tape.leaf(z0, true);
    auto z = prior_transform_g(tape, p, z0v);
    ad::Var total;
    bool have = false;
    if (terms.gen) {
      if (tau == nullptr) throw std::invalid_argument("score: generator term needs tau");
      total = traj_loglik_g(tape, p, *tau, z);
      have = true;
    }
    if (terms.ret) {
      auto r = ad::scale(return_loglik_g(tape, p, y, z), terms.ret_weight);
      total = have ? ad::add(total, r) : r;
      have = true;
    }
    tape.backward(total);
    const auto& node = tape.node(z0v.id);
    if (node.grad_live)
      for (std::size_t i = 0; i < cfg.d; ++i) score[i] += node.grad[i];
    return score;
  }

  Tensor posterior_score(const Tensor& z0, const Trajectory& tau, double y,
                         ScoreTerms terms = {}) const {
    return score_z0(z0, &tau, y, terms);
  }

  Tensor plan_score(const Tensor& z0, double y, double w) const {
    if (w < 0.0) throw std::invalid_argument("plan_score: w must be >= 0");
    ScoreTerms t;
    t.gen = false;
    t.ret = w > 0.0;
    t.ret_weight = w;
    return score_z0(z0, nullptr, y, t);
  }

 private:
  // ---- parameter registration ----

  void init_prior_params(RngStream& rng) {
    switch (cfg.prior) {
      case PriorKind::identity:
        return;
      case PriorKind::resmlp:
        init_linear(params, "alpha.l1", cfg.d, cfg.resmlp_width, rng);
        init_linear(params, "alpha.l2", cfg.resmlp_width, cfg.d, rng, true);
        return;
      case PriorKind::unet: {
        std::vector<std::size_t> chs;
        for (auto m : cfg.unet_mults) chs.push_back(cfg.unet_base * m);
        const std::size_t S = chs.size();
        init_conv(params, "alpha.cin", cfg.unet_channels, chs[0], 3, rng);
        for (std::size_t i = 0; i < S; ++i) {
          for (std::size_t j = 0; j < cfg.unet_resblocks; ++j)
            init_resblock("alpha.enc" + std::to_string(i) + ".rb" + std::to_string(j),
                          chs[i], chs[i], rng);
          if (i + 1 < S)
            init_conv(params, "alpha.down" + std::to_string(i), chs[i], chs[i + 1], 3,
                      rng);
        }
        init_resblock("alpha.mid.rb0", chs[S - 1], chs[S - 1], rng);
        for (std::size_t ii = S; ii-- > 0;) {
          if (ii + 1 < S)
            init_conv(params, "alpha.up" + std::to_string(ii), chs[ii + 1], chs[ii], 3,
                      rng);
          init_resblock("alpha.dec" + std::to_string(ii) + ".rb0", 2 * chs[ii], chs[ii],
                        rng);
        }
        init_conv(params, "alpha.cout", chs[0], cfg.unet_channels, 3, rng, true);
        return;
      }
    }
  }

  void init_resblock(const std::string& prefix, std::size_t in, std::size_t out,
                     RngStream& rng) {
    init_conv(params, prefix + ".c1", in, out, 3, rng);
    init_conv(params, prefix + ".c2", out, out, 3, rng);
    if (in != out) init_conv(params, prefix + ".sk", in, out, 1, rng);
  }

  ad::Var resblock_g(Binder& p, const std::string& prefix, ad::Var x, std::size_t in,
                     std::size_t out) const {
    auto h = conv(p, prefix + ".c1", ad::relu(x), 3, 1, 1);
    h = conv(p, prefix + ".c2", ad::relu(h), 3, 1, 1);
    auto skip = in == out ? x : conv(p, prefix + ".sk", x, 1, 1, 0);
    return ad::add(skip, h);
  }

  ad::Var unet_g(ad::Tape&, Binder& p, ad::Var z0) const {
    std::vector<std::size_t> chs;
    for (auto m : cfg.unet_mults) chs.push_back(cfg.unet_base * m);
    const std::size_t S = chs.size();
    auto x = ad::reshape(z0, cfg.unet_channels, cfg.d / cfg.unet_channels);
    x = conv(p, "alpha.cin", x, 3, 1, 1);
    std::vector<ad::Var> skips(S);
    for (std::size_t i = 0; i < S; ++i) {
      for (std::size_t j = 0; j < cfg.unet_resblocks; ++j)
        x = resblock_g(p, "alpha.enc" + std::to_string(i) + ".rb" + std::to_string(j),
                       x, chs[i], chs[i]);
      skips[i] = x;
      if (i + 1 < S) x = conv(p, "alpha.down" + std::to_string(i), x, 3, 2, 1);
    }
    x = resblock_g(p, "alpha.mid.rb0", x, chs[S - 1], chs[S - 1]);
    for (std::size_t ii = S; ii-- > 0;) {
      if (ii + 1 < S)
        x = conv(p, "alpha.up" + std::to_string(ii), ad::upsample2(x), 3, 1, 1);
      x = resblock_g(p, "alpha.dec" + std::to_string(ii) + ".rb0",
                     ad::concat_rows({x, skips[ii]}), 2 * chs[ii], chs[ii]);
    }
    x = conv(p, "alpha.cout", x, 3, 1, 1);
    return ad::reshape(x, 1, cfg.d);
  }

  void init_generator_params(RngStream& rng) {
    if (cfg.gen == GeneratorKind::linear) {
      init_linear(params, "gen.lin", cfg.d, cfg.d_a, rng);
      return;
    }
    init_linear(params, "gen.semb", cfg.d_s, cfg.width, rng);
    if (cfg.action_mode == ActionMode::discrete) {
      params.add("gen.aemb", Tensor::randn(cfg.action_arity, cfg.width, rng, 0.5));
    } else {
      init_linear(params, "gen.aemb", cfg.d_a, cfg.width, rng);
    }
    params.add("gen.pos", Tensor::randn(2 * cfg.K - 1, cfg.width, rng, 0.2));
    init_linear(params, "gen.zemb", cfg.d / cfg.z_tokens, cfg.width, rng);
    const double ws = 1.0 / std::sqrt(double(cfg.width));
    for (std::size_t l = 0; l < cfg.L; ++l) {
      const std::string lp = "gen.l" + std::to_string(l);
      init_layernorm(params, lp + ".ln1", cfg.width);
      params.add(lp + ".att.wq", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".att.wk", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".att.wv", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".att.wo", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".att.bo", Tensor(1, cfg.width));
      init_layernorm(params, lp + ".ln2", cfg.width);
      params.add(lp + ".crs.wq", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".crs.wk", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".crs.wv", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".crs.wo", Tensor::randn(cfg.width, cfg.width, rng, ws));
      params.add(lp + ".crs.bo", Tensor(1, cfg.width));
      init_layernorm(params, lp + ".ln3", cfg.width);
      init_linear(params, lp + ".mlp.l1", cfg.width, 2 * cfg.width, rng);
      init_linear(params, lp + ".mlp.l2", 2 * cfg.width, cfg.width, rng);
    }
    init_layernorm(params, "gen.lnf", cfg.width);
    // Zero head: the untrained discrete policy is exactly uniform.
    init_linear(params, "gen.head", cfg.width, cfg.head_dim(), rng, true);
  }

  void init_return_params(RngStream& rng) {
    if (cfg.ret_hidden == 0) {
      init_linear(params, "ret.l1", cfg.d, 1, rng);
      return;
    }
    init_linear(params, "ret.l1", cfg.d, cfg.ret_hidden, rng);
    init_linear(params, "ret.l2", cfg.ret_hidden, 1, rng);
  }
};

}  // namespace lpt
