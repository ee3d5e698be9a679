#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "skysmooth/nn.hpp"
#include "skysmooth/rng.hpp"
#include "skysmooth/sim.hpp"

namespace skysmooth {

/// Goal information offered to the policy: the scale-invariant unit
/// direction, or the raw distance baseline it is compared against.
enum class GoalSignal { Vector, Distance };

inline const char* to_string(GoalSignal g) {
  return g == GoalSignal::Vector ? "vec" : "dist";
}

inline GoalSignal goal_signal_from_string(const std::string& s) {
  if (s == "vec") return GoalSignal::Vector;
  if (s == "dist") return GoalSignal::Distance;
  throw std::invalid_argument("unknown goal_signal \"" + s +
                              "\" (expected \"vec\" or \"dist\")");
}

inline DepthMode depth_mode_from_string(const std::string& s) {
  if (s == "deep") return DepthMode::Deep;
  if (s == "shallow") return DepthMode::Shallow;
  throw std::invalid_argument("unknown depth_mode \"" + s +
                              "\" (expected \"deep\" or \"shallow\")");
}

/// Learner hyperparameters. noise_sigma_* are fractions of v_max.
/// smooth_enabled is stamped into the environment's reward constants by
/// train(), so one flag drives the ablation end to end.
struct TrainConfig {
  double gamma = 0.99;
  double tau = 0.005;
  double lr_actor = 1e-4;
  double lr_critic = 1e-3;
  int batch_size = 64;
  int buffer_capacity = 100000;
  int warmup_steps = 1000;
  double noise_sigma_start = 0.4;
  double noise_sigma_end = 0.05;
  int noise_decay_steps = 50000;
  int episodes = 2000;
  int train_every = 1;           // env steps per gradient step
  int eval_every = 25;           // episodes between greedy probes
  int eval_episodes = 1;         // greedy episodes per probe
  int early_stop_successes = 0;  // consecutive all-goal probes to stop; 0 = off
  std::uint64_t seed = 0;
  DepthMode depth_mode = DepthMode::Shallow;
  GoalSignal goal_signal = GoalSignal::Vector;
  bool smooth_enabled = true;
  int embedding = 32;    // depth embedding width after the projection
  int lstm_hidden = 32;
  int hidden = 64;       // actor/critic hidden width
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"gamma", c.gamma},
                     {"tau", c.tau},
                     {"lr_actor", c.lr_actor},
                     {"lr_critic", c.lr_critic},
                     {"batch_size", c.batch_size},
                     {"buffer_capacity", c.buffer_capacity},
                     {"warmup_steps", c.warmup_steps},
                     {"noise_sigma_start", c.noise_sigma_start},
                     {"noise_sigma_end", c.noise_sigma_end},
                     {"noise_decay_steps", c.noise_decay_steps},
                     {"episodes", c.episodes},
                     {"train_every", c.train_every},
                     {"eval_every", c.eval_every},
                     {"eval_episodes", c.eval_episodes},
                     {"early_stop_successes", c.early_stop_successes},
                     {"seed", c.seed},
                     {"depth_mode", to_string(c.depth_mode)},
                     {"goal_signal", to_string(c.goal_signal)},
                     {"smooth_enabled", c.smooth_enabled},
                     {"embedding", c.embedding},
                     {"lstm_hidden", c.lstm_hidden},
                     {"hidden", c.hidden}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.gamma = j.value("gamma", c.gamma);
  c.tau = j.value("tau", c.tau);
  c.lr_actor = j.value("lr_actor", c.lr_actor);
  c.lr_critic = j.value("lr_critic", c.lr_critic);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.buffer_capacity = j.value("buffer_capacity", c.buffer_capacity);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.noise_sigma_start = j.value("noise_sigma_start", c.noise_sigma_start);
  c.noise_sigma_end = j.value("noise_sigma_end", c.noise_sigma_end);
  c.noise_decay_steps = j.value("noise_decay_steps", c.noise_decay_steps);
  c.episodes = j.value("episodes", c.episodes);
  c.train_every = j.value("train_every", c.train_every);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.eval_episodes = j.value("eval_episodes", c.eval_episodes);
  c.early_stop_successes = j.value("early_stop_successes", c.early_stop_successes);
  c.seed = j.value("seed", c.seed);
  if (j.contains("depth_mode"))
    c.depth_mode = depth_mode_from_string(j.at("depth_mode").get<std::string>());
  if (j.contains("goal_signal"))
    c.goal_signal = goal_signal_from_string(j.at("goal_signal").get<std::string>());
  c.smooth_enabled = j.value("smooth_enabled", c.smooth_enabled);
  c.embedding = j.value("embedding", c.embedding);
  c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
  c.hidden = j.value("hidden", c.hidden);
}

inline void validate_train_config(const TrainConfig& c) {
  auto bad = [](const std::string& msg) {
    throw std::invalid_argument("train config: " + msg);
  };
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) bad("gamma must lie in (0, 1)");
  if (!(c.tau > 0.0 && c.tau <= 1.0)) bad("tau must lie in (0, 1]");
  if (c.batch_size < 1) bad("batch_size must be >= 1");
  if (c.buffer_capacity < c.batch_size) bad("buffer_capacity must be >= batch_size");
  if (c.warmup_steps < 0) bad("warmup_steps must be >= 0");
  if (c.lr_actor <= 0.0 || c.lr_critic <= 0.0)
    bad("learning rates must be positive");
  if (c.noise_sigma_start < 0.0 || c.noise_sigma_end < 0.0)
    bad("noise sigmas must be >= 0");
  if (c.noise_decay_steps < 1) bad("noise_decay_steps must be >= 1");
  if (c.episodes < 0) bad("episodes must be >= 0");
  if (c.train_every < 1) bad("train_every must be >= 1");
  if (c.eval_every < 1) bad("eval_every must be >= 1");
  if (c.eval_episodes < 1) bad("eval_episodes must be >= 1");
  if (c.embedding < 1 || c.lstm_hidden < 1 || c.hidden < 1)
    bad("network widths must be >= 1");
}

struct Transition {
  Observation obs;
  Vec2 action;
  double reward = 0.0;
  Observation next_obs;
  bool done = false;
};

/// Ring store of past transitions with uniform without-replacement
/// minibatch sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0)
      throw std::invalid_argument("replay capacity must be positive");
    data_.reserve(std::min<std::size_t>(capacity, 4096));
  }

  void push(Transition t) {
    if (!std::isfinite(t.reward))
      throw std::invalid_argument("non-finite reward pushed to replay buffer");
    if (data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_] = std::move(t);
    }
    next_ = (next_ + 1) % capacity_;
  }

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return data_[i]; }

  std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
    if (batch > data_.size())
      throw std::invalid_argument("batch larger than stored transitions");
    std::vector<std::size_t> out;
    out.reserve(batch);
    while (out.size() < batch) {
      const std::size_t idx = rng.next_index(data_.size());
      bool seen = false;
      for (const std::size_t j : out) {
        if (j == idx) {
          seen = true;
          break;
        }
      }
      if (!seen) out.push_back(idx);
    }
    return out;
  }

 private:
  std::vector<Transition> data_;
  std::size_t capacity_ = 0;
  std::size_t next_ = 0;
};

/// Actor-critic parameters plus the target copies and the normalization
/// constants the forward passes depend on. The depth encoder (LSTM +
/// tanh projection) is shared by actor and critic inputs and is trained
/// by the critic loss alone.
struct Policy {
  TrainConfig cfg;
  int n_rays = 0;
  int k_stack = 0;
  double v_max = 0.0;
  double depth_scale = 0.0;  // d_trunc (shallow) or d_max_sensor (deep)
  double dist_scale = 0.0;   // goal-distance divisor for the dist variant

  nn::LstmCell lstm;
  nn::DenseLayer proj;
  nn::DenseLayer a1, a2, a3;
  nn::DenseLayer c1, c2, c3;

  nn::LstmCell lstm_t;
  nn::DenseLayer proj_t;
  nn::DenseLayer a1_t, a2_t, a3_t;
  nn::DenseLayer c1_t, c2_t, c3_t;

  int goal_width() const {
    return cfg.goal_signal == GoalSignal::Vector ? 2 : 1;
  }
  int state_dim() const { return cfg.embedding + 2 + goal_width(); }
};

/// Fresh policy with Xavier-initialized online nets copied into the
/// targets. Passing rng = nullptr leaves every parameter zero (the
/// checkpoint loader's shell). The weight-draw order below is part of the
/// reproducibility contract.
inline Policy make_policy(const TrainConfig& cfg, int n_rays, int k_stack,
                          double v_max, double depth_scale, double dist_scale,
                          Rng* rng) {
  validate_train_config(cfg);
  if (n_rays < 1 || k_stack < 1)
    throw std::invalid_argument("policy needs n_rays >= 1 and k_stack >= 1");
  if (!(v_max > 0.0) || !(depth_scale > 0.0) || !(dist_scale > 0.0))
    throw std::invalid_argument(
        "policy needs positive v_max, depth_scale, dist_scale");
  Policy p;
  p.cfg = cfg;
  p.n_rays = n_rays;
  p.k_stack = k_stack;
  p.v_max = v_max;
  p.depth_scale = depth_scale;
  p.dist_scale = dist_scale;

  const auto u = [&](std::size_t n) { return static_cast<std::size_t>(n); };
  const std::size_t E = u(cfg.embedding), H = u(cfg.hidden),
                    L = u(cfg.lstm_hidden), R = u(n_rays);
  const std::size_t S = u(p.state_dim());
  auto dense = [&](std::size_t out, std::size_t in) {
    if (rng) return nn::make_dense(out, in, *rng);
    return nn::DenseLayer{nn::Mat(out, in), nn::VecD(out, 0.0)};
  };
  if (rng) {
    p.lstm = nn::make_lstm(R, L, *rng);
  } else {
    p.lstm.in = R;
    p.lstm.hidden = L;
    p.lstm.Wi = nn::Mat(L, R + L);
    p.lstm.Wf = nn::Mat(L, R + L);
    p.lstm.Wo = nn::Mat(L, R + L);
    p.lstm.Wg = nn::Mat(L, R + L);
    p.lstm.bi.assign(L, 0.0);
    p.lstm.bf.assign(L, 0.0);
    p.lstm.bo.assign(L, 0.0);
    p.lstm.bg.assign(L, 0.0);
  }
  p.proj = dense(E, L);
  p.a1 = dense(H, S);
  p.a2 = dense(H, H);
  p.a3 = dense(2, H);
  p.c1 = dense(H, S + 2);
  p.c2 = dense(H, H);
  p.c3 = dense(1, H);

  p.lstm_t = p.lstm;
  p.proj_t = p.proj;
  p.a1_t = p.a1;
  p.a2_t = p.a2;
  p.a3_t = p.a3;
  p.c1_t = p.c1;
  p.c2_t = p.c2;
  p.c3_t = p.c3;
  return p;
}

inline Policy make_policy(const SimParams& sp, double dist_scale,
                          const TrainConfig& cfg, Rng& rng) {
  const double depth_scale =
      cfg.depth_mode == DepthMode::Shallow ? sp.d_trunc : sp.d_max_sensor;
  return make_policy(cfg, sp.n_rays, sp.k_stack, sp.v_max, depth_scale,
                     dist_scale, &rng);
}

/// Parameter traversal shared by the optimizer, soft updates, and the
/// checkpoint blob. Order is load-bearing.
inline nn::ParamList online_params(Policy& p) {
  nn::ParamList out;
  nn::append_params(out, "enc.lstm", p.lstm);
  nn::append_params(out, "enc.proj", p.proj);
  nn::append_params(out, "actor.l1", p.a1);
  nn::append_params(out, "actor.l2", p.a2);
  nn::append_params(out, "actor.l3", p.a3);
  nn::append_params(out, "critic.l1", p.c1);
  nn::append_params(out, "critic.l2", p.c2);
  nn::append_params(out, "critic.l3", p.c3);
  return out;
}

inline nn::ParamList target_params(Policy& p) {
  nn::ParamList out;
  nn::append_params(out, "enc.lstm", p.lstm_t);
  nn::append_params(out, "enc.proj", p.proj_t);
  nn::append_params(out, "actor.l1", p.a1_t);
  nn::append_params(out, "actor.l2", p.a2_t);
  nn::append_params(out, "actor.l3", p.a3_t);
  nn::append_params(out, "critic.l1", p.c1_t);
  nn::append_params(out, "critic.l2", p.c2_t);
  nn::append_params(out, "critic.l3", p.c3_t);
  return out;
}

/// theta_target <- tau * theta_online + (1 - tau) * theta_target.
inline void soft_update(const nn::ParamList& online, const nn::ParamList& target,
                        double tau) {
  if (online.size() != target.size())
    throw std::invalid_argument("soft_update: parameter list size mismatch");
  for (std::size_t t = 0; t < online.size(); ++t) {
    const nn::VecD& src = *online[t].second;
    nn::VecD& dst = *target[t].second;
    if (src.size() != dst.size())
      throw std::invalid_argument("soft_update: shape mismatch at " +
                                  online[t].first);
    for (std::size_t k = 0; k < src.size(); ++k)
      dst[k] = tau * src[k] + (1.0 - tau) * dst[k];
  }
}

inline void soft_update_policy(Policy& p, double tau) {
  const nn::ParamList on = online_params(p);
  const nn::ParamList tg = target_params(p);
  soft_update(on, tg, tau);
}

namespace detail {

inline Vec2 clamp_norm(Vec2 v, double max_norm) {
  const double n = v.norm();
  if (n > max_norm) return v * (max_norm / n);
  return v;
}

}  // namespace detail

/// Forward bookkeeping reused by the backward passes.
struct EncodeTrace {
  std::vector<nn::VecD> frames;  // depth rows scaled to (0, 1]
  nn::LstmTrace lstm;
  nn::VecD h;  // final LSTM hidden state
  nn::VecD e;  // tanh-squashed projection (the depth embedding)
};

/// State vector fed to actor and critic: [depth embedding, vel / v_max,
/// goal signal]. The goal signal is the unit vector toward the goal, or
/// dist / dist_scale for the distance baseline.
inline nn::VecD encode_state(const Policy& p, bool target,
                             const Observation& obs,
                             EncodeTrace* trace = nullptr) {
  if (static_cast<int>(obs.depth_stack.size()) != p.k_stack)
    throw std::invalid_argument(
        "depth stack has " + std::to_string(obs.depth_stack.size()) +
        " frames, policy expects " + std::to_string(p.k_stack));
  std::vector<nn::VecD> frames;
  frames.reserve(obs.depth_stack.size());
  for (const DepthFrame& f : obs.depth_stack) {
    if (static_cast<int>(f.rays.size()) != p.n_rays)
      throw std::invalid_argument(
          "depth frame has " + std::to_string(f.rays.size()) +
          " rays, policy expects " + std::to_string(p.n_rays));
    nn::VecD row(f.rays.size());
    for (std::size_t r = 0; r < f.rays.size(); ++r)
      row[r] = f.rays[r] / p.depth_scale;
    frames.push_back(std::move(row));
  }
  const nn::LstmCell& lstm = target ? p.lstm_t : p.lstm;
  const nn::DenseLayer& proj = target ? p.proj_t : p.proj;
  nn::VecD h = nn::lstm_forward(lstm, frames, trace ? &trace->lstm : nullptr);
  nn::VecD e = nn::act_forward(nn::Act::Tanh, nn::dense_forward(proj, h));

  nn::VecD state;
  state.reserve(static_cast<std::size_t>(p.state_dim()));
  state.insert(state.end(), e.begin(), e.end());
  state.push_back(obs.vel.x / p.v_max);
  state.push_back(obs.vel.y / p.v_max);
  if (p.cfg.goal_signal == GoalSignal::Vector) {
    state.push_back(obs.unit_to_goal.x);
    state.push_back(obs.unit_to_goal.y);
  } else {
    state.push_back(obs.dist_to_goal / p.dist_scale);
  }
  if (trace) {
    trace->frames = std::move(frames);
    trace->h = std::move(h);
    trace->e = std::move(e);
  }
  return state;
}

struct ActorTrace {
  nn::VecD s;       // input state
  nn::VecD h1, h2;  // relu activations
  nn::VecD u;       // tanh head output
  Vec2 y;           // v_max * u before the norm clamp
  double y_norm = 0.0;
  bool clamped = false;
};

/// Deterministic actor: tanh head scaled by v_max, then clamped so the
/// commanded speed never exceeds v_max.
inline Vec2 actor_forward(const Policy& p, bool target, const nn::VecD& s,
                          ActorTrace* trace = nullptr) {
  const nn::DenseLayer& l1 = target ? p.a1_t : p.a1;
  const nn::DenseLayer& l2 = target ? p.a2_t : p.a2;
  const nn::DenseLayer& l3 = target ? p.a3_t : p.a3;
  nn::VecD h1 = nn::act_forward(nn::Act::Relu, nn::dense_forward(l1, s));
  nn::VecD h2 = nn::act_forward(nn::Act::Relu, nn::dense_forward(l2, h1));
  nn::VecD u = nn::act_forward(nn::Act::Tanh, nn::dense_forward(l3, h2));
  const Vec2 y{p.v_max * u[0], p.v_max * u[1]};
  const double y_norm = y.norm();
  const bool clamped = y_norm > p.v_max;
  const Vec2 a = clamped ? y * (p.v_max / y_norm) : y;
  if (trace) {
    trace->s = s;
    trace->h1 = std::move(h1);
    trace->h2 = std::move(h2);
    trace->u = std::move(u);
    trace->y = y;
    trace->y_norm = y_norm;
    trace->clamped = clamped;
  }
  return a;
}

struct CriticTrace {
  nn::VecD x;       // [state; action]
  nn::VecD h1, h2;  // relu activations
};

inline double critic_forward(const Policy& p, bool target, const nn::VecD& s,
                             Vec2 a, CriticTrace* trace = nullptr) {
  const nn::DenseLayer& l1 = target ? p.c1_t : p.c1;
  const nn::DenseLayer& l2 = target ? p.c2_t : p.c2;
  const nn::DenseLayer& l3 = target ? p.c3_t : p.c3;
  nn::VecD x;
  x.reserve(s.size() + 2);
  x.insert(x.end(), s.begin(), s.end());
  x.push_back(a.x);
  x.push_back(a.y);
  nn::VecD h1 = nn::act_forward(nn::Act::Relu, nn::dense_forward(l1, x));
  nn::VecD h2 = nn::act_forward(nn::Act::Relu, nn::dense_forward(l2, h1));
  const nn::VecD q = nn::dense_forward(l3, h2);
  if (trace) {
    trace->x = std::move(x);
    trace->h1 = std::move(h1);
    trace->h2 = std::move(h2);
  }
  return q[0];
}

/// Greedy action for an observation.
inline Vec2 greedy_action(const Policy& p, const Observation& obs) {
  return actor_forward(p, false, encode_state(p, false, obs));
}

/// Actor output plus Gaussian exploration noise scaled by sigma * v_max,
/// clamped back to the speed limit. sigma = 0 draws nothing from rng.
inline Vec2 select_action(const Policy& p, const Observation& obs,
                          double noise_sigma, Rng& rng) {
  Vec2 a = greedy_action(p, obs);
  if (noise_sigma > 0.0) {
    a.x += noise_sigma * p.v_max * rng.normal();
    a.y += noise_sigma * p.v_max * rng.normal();
    a = detail::clamp_norm(a, p.v_max);
  }
  return a;
}

/// Bootstrapped regression targets y_i = r_i + gamma (1 - done_i)
/// Q_t(s'_i, actor_t(s'_i)), all through the target copies.
inline std::vector<double> critic_target(const Policy& p,
                                         std::span<const Transition> batch) {
  if (batch.empty())
    throw std::invalid_argument("critic_target needs a nonempty batch");
  std::vector<double> y;
  y.reserve(batch.size());
  for (const Transition& t : batch) {
    double q_next = 0.0;
    if (!t.done) {
      const nn::VecD s_next = encode_state(p, true, t.next_obs);
      const Vec2 a_next = actor_forward(p, true, s_next);
      q_next = critic_forward(p, true, s_next, a_next);
    }
    y.push_back(t.reward + p.cfg.gamma * (t.done ? 0.0 : q_next));
  }
  return y;
}

/// Gradient accumulators mirroring one optimizer group each.
struct CriticGrads {
  nn::Mat dW1, dW2, dW3;
  nn::VecD db1, db2, db3;
  nn::Mat dWproj;
  nn::VecD dbproj;
  nn::LstmGrads lstm;
};

struct ActorGrads {
  nn::Mat dW1, dW2, dW3;
  nn::VecD db1, db2, db3;
};

inline CriticGrads make_critic_grads(const Policy& p) {
  CriticGrads g;
  g.dW1 = nn::Mat(p.c1.out(), p.c1.in());
  g.db1.assign(p.c1.out(), 0.0);
  g.dW2 = nn::Mat(p.c2.out(), p.c2.in());
  g.db2.assign(p.c2.out(), 0.0);
  g.dW3 = nn::Mat(p.c3.out(), p.c3.in());
  g.db3.assign(p.c3.out(), 0.0);
  g.dWproj = nn::Mat(p.proj.out(), p.proj.in());
  g.dbproj.assign(p.proj.out(), 0.0);
  g.lstm = nn::make_lstm_grads(p.lstm);
  return g;
}

inline ActorGrads make_actor_grads(const Policy& p) {
  ActorGrads g;
  g.dW1 = nn::Mat(p.a1.out(), p.a1.in());
  g.db1.assign(p.a1.out(), 0.0);
  g.dW2 = nn::Mat(p.a2.out(), p.a2.in());
  g.db2.assign(p.a2.out(), 0.0);
  g.dW3 = nn::Mat(p.a3.out(), p.a3.in());
  g.db3.assign(p.a3.out(), 0.0);
  return g;
}

/// Backward through the online critic MLP from a scalar gradient at Q.
/// Parameter gradients accumulate into grads when given; the return value
/// is the gradient at the [state; action] input either way.
inline nn::VecD critic_backward(const Policy& p, const CriticTrace& tr,
                                double dq, CriticGrads* grads) {
  const nn::VecD dq_vec{dq};
  nn::VecD dh2(p.c2.out(), 0.0);
  if (grads) {
    nn::dense_backward_acc(p.c3, tr.h2, dq_vec, grads->dW3, grads->db3, dh2);
  } else {
    nn::matvec_transpose_acc(p.c3.W, dq_vec, dh2);
  }
  const nn::VecD dh2m = nn::act_backward(nn::Act::Relu, tr.h2, dh2);
  nn::VecD dh1(p.c1.out(), 0.0);
  if (grads) {
    nn::dense_backward_acc(p.c2, tr.h1, dh2m, grads->dW2, grads->db2, dh1);
  } else {
    nn::matvec_transpose_acc(p.c2.W, dh2m, dh1);
  }
  const nn::VecD dh1m = nn::act_backward(nn::Act::Relu, tr.h1, dh1);
  nn::VecD dx(p.c1.in(), 0.0);
  if (grads) {
    nn::dense_backward_acc(p.c1, tr.x, dh1m, grads->dW1, grads->db1, dx);
  } else {
    nn::matvec_transpose_acc(p.c1.W, dh1m, dx);
  }
  return dx;
}

/// Backward through the online depth encoder from a gradient at the
/// embedding slice of the state.
inline void encoder_backward(const Policy& p, const EncodeTrace& tr,
                             std::span<const double> d_embed,
                             CriticGrads& grads) {
  nn::VecD de(tr.e.size());
  for (std::size_t k = 0; k < de.size(); ++k)
    de[k] = d_embed[k] * (1.0 - tr.e[k] * tr.e[k]);
  nn::VecD dh(p.proj.in(), 0.0);
  nn::dense_backward_acc(p.proj, tr.h, de, grads.dWproj, grads.dbproj, dh);
  nn::lstm_backward(p.lstm, tr.lstm, dh, grads.lstm);
}

/// Backward through the online actor from a gradient at the emitted
/// action, including the exact Jacobian of the norm clamp.
inline void actor_backward(const Policy& p, const ActorTrace& tr, Vec2 da,
                           ActorGrads& grads) {
  Vec2 dy = da;
  if (tr.clamped) {
    const Vec2 r = tr.y / tr.y_norm;
    const double along = dot(r, da);
    dy = (da - r * along) * (p.v_max / tr.y_norm);
  }
  const nn::VecD du{p.v_max * dy.x, p.v_max * dy.y};
  const nn::VecD du_pre = nn::act_backward(nn::Act::Tanh, tr.u, du);
  nn::VecD dh2(p.a2.out(), 0.0);
  nn::dense_backward_acc(p.a3, tr.h2, du_pre, grads.dW3, grads.db3, dh2);
  const nn::VecD dh2m = nn::act_backward(nn::Act::Relu, tr.h2, dh2);
  nn::VecD dh1(p.a1.out(), 0.0);
  nn::dense_backward_acc(p.a2, tr.h1, dh2m, grads.dW2, grads.db2, dh1);
  const nn::VecD dh1m = nn::act_backward(nn::Act::Relu, tr.h1, dh1);
  nn::VecD ds(p.a1.in(), 0.0);
  nn::dense_backward_acc(p.a1, tr.s, dh1m, grads.dW1, grads.db1, ds);
}

/// Optimizer state for the two gradient groups: the critic group also
/// owns the shared depth encoder.
struct Optimizer {
  nn::AdamState critic;
  nn::AdamState actor;
};

inline nn::ParamList critic_group(Policy& p) {
  nn::ParamList out;
  nn::append_params(out, "critic.l1", p.c1);
  nn::append_params(out, "critic.l2", p.c2);
  nn::append_params(out, "critic.l3", p.c3);
  nn::append_params(out, "enc.proj", p.proj);
  nn::append_params(out, "enc.lstm", p.lstm);
  return out;
}

inline nn::ParamList actor_group(Policy& p) {
  nn::ParamList out;
  nn::append_params(out, "actor.l1", p.a1);
  nn::append_params(out, "actor.l2", p.a2);
  nn::append_params(out, "actor.l3", p.a3);
  return out;
}

inline Optimizer make_optimizer(Policy& p) {
  Optimizer opt;
  opt.critic.lr = p.cfg.lr_critic;
  opt.critic.init_like(critic_group(p));
  opt.actor.lr = p.cfg.lr_actor;
  opt.actor.init_like(actor_group(p));
  return opt;
}

inline std::vector<const nn::VecD*> critic_grad_refs(const CriticGrads& g) {
  return {&g.dW1.data,      &g.db1,      &g.dW2.data,      &g.db2,
          &g.dW3.data,      &g.db3,      &g.dWproj.data,   &g.dbproj,
          &g.lstm.dWi.data, &g.lstm.dWf.data, &g.lstm.dWo.data,
          &g.lstm.dWg.data, &g.lstm.dbi, &g.lstm.dbf, &g.lstm.dbo,
          &g.lstm.dbg};
}

inline std::vector<const nn::VecD*> actor_grad_refs(const ActorGrads& g) {
  return {&g.dW1.data, &g.db1, &g.dW2.data, &g.db2, &g.dW3.data, &g.db3};
}

struct StepLosses {
  double critic_mse = 0.0;
  double actor_objective = 0.0;  // mean Q under the current actor
};

/// One DDPG gradient step: critic regresses to the bootstrapped targets
/// (gradients flowing on through the depth encoder), the actor ascends Q
/// with the encoder held fixed, and the targets blend toward the online
/// nets.
inline StepLosses train_step(Policy& p, Optimizer& opt,
                             const ReplayBuffer& buffer, Rng& rng) {
  const TrainConfig& cfg = p.cfg;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  if (buffer.size() < batch)
    throw std::invalid_argument("replay buffer smaller than batch size");
  const std::vector<std::size_t> idx = buffer.sample_indices(batch, rng);

  std::vector<double> y;
  y.reserve(batch);
  for (const std::size_t i : idx) {
    const Transition& t = buffer[i];
    double q_next = 0.0;
    if (!t.done) {
      const nn::VecD s_next = encode_state(p, true, t.next_obs);
      const Vec2 a_next = actor_forward(p, true, s_next);
      q_next = critic_forward(p, true, s_next, a_next);
    }
    y.push_back(t.reward + cfg.gamma * q_next);
  }

  const int state_dim = p.state_dim();
  const double inv_b = 1.0 / static_cast<double>(batch);

  CriticGrads cg = make_critic_grads(p);
  double mse = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Transition& t = buffer[idx[k]];
    EncodeTrace etr;
    const nn::VecD s = encode_state(p, false, t.obs, &etr);
    CriticTrace ctr;
    const double q = critic_forward(p, false, s, t.action, &ctr);
    const double err = q - y[k];
    mse += err * err;
    const double dq = 2.0 * err * inv_b;
    const nn::VecD dx = critic_backward(p, ctr, dq, &cg);
    encoder_backward(p, etr,
                     std::span<const double>(dx.data(),
                                             static_cast<std::size_t>(cfg.embedding)),
                     cg);
  }
  mse *= inv_b;
  if (!std::isfinite(mse))
    throw std::runtime_error("training diverged: non-finite critic loss");
  nn::adam_update(critic_group(p), critic_grad_refs(cg), opt.critic);

  ActorGrads ag = make_actor_grads(p);
  double objective = 0.0;
  for (const std::size_t i : idx) {
    const Transition& t = buffer[i];
    const nn::VecD s = encode_state(p, false, t.obs);
    ActorTrace atr;
    const Vec2 a = actor_forward(p, false, s, &atr);
    CriticTrace ctr;
    objective += critic_forward(p, false, s, a, &ctr);
    const nn::VecD dx = critic_backward(p, ctr, -inv_b, nullptr);
    const Vec2 da{dx[static_cast<std::size_t>(state_dim)],
                  dx[static_cast<std::size_t>(state_dim) + 1]};
    actor_backward(p, atr, da, ag);
  }
  objective *= inv_b;
  if (!std::isfinite(objective))
    throw std::runtime_error("training diverged: non-finite actor objective");
  nn::adam_update(actor_group(p), actor_grad_refs(ag), opt.actor);

  soft_update_policy(p, cfg.tau);
  return {mse, objective};
}

inline constexpr const char* kTrainingLogHeader =
    "episode,return,steps,outcome,eval_sr";

struct TrainResult {
  Policy policy;
  std::string log_csv;
  int episodes_run = 0;
  double final_eval_sr = -1.0;  // last greedy probe; -1 when never probed
};

namespace detail {

inline double noise_sigma_at(const TrainConfig& cfg, long step) {
  const double frac = std::min(
      1.0, static_cast<double>(step) / static_cast<double>(cfg.noise_decay_steps));
  return cfg.noise_sigma_start +
         (cfg.noise_sigma_end - cfg.noise_sigma_start) * frac;
}

/// Uniform draw from the disc of radius v_max (warmup exploration).
inline Vec2 random_action(double v_max, Rng& rng) {
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double r = v_max * std::sqrt(rng.uniform01());
  return {r * std::cos(ang), r * std::sin(ang)};
}

inline double greedy_probe_sr(const Policy& policy, Env& env, int episodes) {
  int goals = 0;
  for (int e = 0; e < episodes; ++e) {
    env.reset();
    while (env.status() == StepStatus::Running)
      env.step(greedy_action(policy, env.observation()));
    if (env.status() == StepStatus::Goal) goals += 1;
  }
  return 100.0 * static_cast<double>(goals) / static_cast<double>(episodes);
}

}  // namespace detail

/// Full training run: seeded exploration with linear noise decay, replay
/// learning after warmup, greedy probes every eval_every episodes, and an
/// optional early stop once early_stop_successes consecutive probes all
/// reach the goal. Reproducible to the byte for a given config.
inline TrainResult train(const Scene& scene, const SimParams& sim_params,
                         RewardParams reward_params, const TrainConfig& cfg) {
  validate_train_config(cfg);
  reward_params.smooth_enabled = cfg.smooth_enabled;

  Rng rng(cfg.seed);
  TrainResult result{
      make_policy(sim_params, reward_params.dist_scale, cfg, rng), "", 0, -1.0};
  Policy& policy = result.policy;
  result.log_csv = std::string(kTrainingLogHeader) + "\n";
  if (cfg.episodes == 0) return result;

  Env env(scene, sim_params, reward_params, cfg.depth_mode, cfg.seed);
  Env eval_env(scene, sim_params, reward_params, cfg.depth_mode, cfg.seed);
  ReplayBuffer buffer(static_cast<std::size_t>(cfg.buffer_capacity));
  Optimizer opt = make_optimizer(policy);

  long total_steps = 0;
  int consecutive_successes = 0;
  for (int episode = 1; episode <= cfg.episodes; ++episode) {
    Observation obs = env.reset();
    double ep_return = 0.0;
    try {
      while (env.status() == StepStatus::Running) {
        const Vec2 action =
            total_steps < cfg.warmup_steps
                ? detail::random_action(policy.v_max, rng)
                : select_action(policy, obs,
                                detail::noise_sigma_at(cfg, total_steps), rng);
        StepResult res = env.step(action);
        buffer.push({std::move(obs), action, res.reward.total, res.obs,
                     res.status != StepStatus::Running});
        obs = std::move(res.obs);
        ep_return += res.reward.total;
        total_steps += 1;
        if (total_steps >= cfg.warmup_steps &&
            buffer.size() >= static_cast<std::size_t>(cfg.batch_size) &&
            total_steps % cfg.train_every == 0) {
          train_step(policy, opt, buffer, rng);
        }
      }
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("episode " + std::to_string(episode) + ": " +
                               e.what());
    }

    std::string row = std::to_string(episode) + ",";
    detail::append_g17(row, ep_return);
    row += "," + std::to_string(env.steps()) + "," + to_string(env.status()) + ",";
    const bool probe = episode % cfg.eval_every == 0;
    if (probe) {
      const double sr =
          detail::greedy_probe_sr(policy, eval_env, cfg.eval_episodes);
      result.final_eval_sr = sr;
      detail::append_g17(row, sr);
      consecutive_successes = sr == 100.0 ? consecutive_successes + 1 : 0;
    }
    row += "\n";
    result.log_csv += row;
    result.episodes_run = episode;
    if (probe && cfg.early_stop_successes > 0 &&
        consecutive_successes >= cfg.early_stop_successes)
      break;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints: a text header (magic + version line, then one JSON line with
// the shapes manifest and config echo) followed by every parameter — online
// then target, traversal order above — as little-endian 64-bit floats.

inline constexpr int kPolicySchemaVersion = 1;
inline constexpr const char* kPolicyMagic = "skysmooth-policy";

namespace detail {

inline void write_f64_le(std::string& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b)
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xff));
}

inline double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b)
    bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline void save_policy(Policy& policy, const std::string& path) {
  nn::ParamList params = online_params(policy);
  {
    nn::ParamList targets = target_params(policy);
    params.insert(params.end(), targets.begin(), targets.end());
  }
  nlohmann::json shapes = nlohmann::json::array();
  for (std::size_t t = 0; t < params.size(); ++t) {
    const char* side = t < params.size() / 2 ? "online." : "target.";
    shapes.push_back({side + params[t].first, params[t].second->size()});
  }
  const nlohmann::json header{
      {"shapes", shapes},
      {"train_config", policy.cfg},
      {"policy",
       {{"n_rays", policy.n_rays},
        {"k_stack", policy.k_stack},
        {"v_max", policy.v_max},
        {"depth_scale", policy.depth_scale},
        {"dist_scale", policy.dist_scale}}}};

  std::string blob;
  std::size_t total = 0;
  for (const auto& [name, vec] : params) total += vec->size();
  blob.reserve(total * 8);
  for (const auto& [name, vec] : params)
    for (const double v : *vec) detail::write_f64_le(blob, v);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kPolicyMagic << " " << kPolicySchemaVersion << "\n";
  out << header.dump() << "\n";
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

inline Policy load_policy(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string magic_line, header_line;
  if (!std::getline(in, magic_line))
    throw std::runtime_error(path + ": not a policy checkpoint");
  const std::string expected =
      std::string(kPolicyMagic) + " " + std::to_string(kPolicySchemaVersion);
  if (magic_line != expected) {
    if (magic_line.rfind(kPolicyMagic, 0) == 0)
      throw std::runtime_error(path + ": checkpoint version \"" + magic_line +
                               "\" does not match \"" + expected + "\"");
    throw std::runtime_error(path + ": not a policy checkpoint");
  }
  if (!std::getline(in, header_line))
    throw std::runtime_error(path + ": missing checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  }

  TrainConfig cfg = header.at("train_config").get<TrainConfig>();
  const nlohmann::json& pj = header.at("policy");
  Policy policy = make_policy(
      cfg, pj.at("n_rays").get<int>(), pj.at("k_stack").get<int>(),
      pj.at("v_max").get<double>(), pj.at("depth_scale").get<double>(),
      pj.at("dist_scale").get<double>(), nullptr);

  nn::ParamList params = online_params(policy);
  {
    nn::ParamList targets = target_params(policy);
    params.insert(params.end(), targets.begin(), targets.end());
  }
  const nlohmann::json& shapes = header.at("shapes");
  if (shapes.size() != params.size())
    throw std::runtime_error(path + ": checkpoint holds " +
                             std::to_string(shapes.size()) +
                             " tensors, this build expects " +
                             std::to_string(params.size()));
  for (std::size_t t = 0; t < params.size(); ++t) {
    const std::string name = shapes[t][0].get<std::string>();
    const std::size_t size = shapes[t][1].get<std::size_t>();
    const char* side = t < params.size() / 2 ? "online." : "target.";
    const std::string want = side + params[t].first;
    if (name != want || size != params[t].second->size())
      throw std::runtime_error(
          path + ": tensor " + std::to_string(t) + " is " + name + "[" +
          std::to_string(size) + "], expected " + want + "[" +
          std::to_string(params[t].second->size()) + "]");
  }

  std::vector<unsigned char> buf(8);
  for (auto& [name, vec] : params) {
    for (double& v : *vec) {
      in.read(reinterpret_cast<char*>(buf.data()), 8);
      if (in.gcount() != 8)
        throw std::runtime_error(path + ": truncated checkpoint blob");
      v = detail::read_f64_le(buf.data());
    }
  }
  return policy;
}

}  // namespace skysmooth
