#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "skysmooth/ddpg.hpp"
#include "skysmooth/nn.hpp"
#include "skysmooth/rng.hpp"
#include "skysmooth/sim.hpp"

namespace skysmooth {

struct GradCheckCase {
  std::string name;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckCase> cases;
  double worst = 0.0;
};

namespace detail {

/// Small fixed-shape policy plus one observation/action pair for the
/// end-to-end checks. Seeded so every run exercises identical numbers.
struct GradCheckFixture {
  Policy policy;
  Observation obs;
  Vec2 action;
};

inline GradCheckFixture make_gradcheck_fixture(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.embedding = 4;
  cfg.lstm_hidden = 5;
  cfg.hidden = 8;
  cfg.goal_signal = GoalSignal::Vector;
  Rng rng(seed);
  GradCheckFixture fx{
      make_policy(cfg, /*n_rays=*/6, /*k_stack=*/4, /*v_max=*/2.0,
                  /*depth_scale=*/5.0, /*dist_scale=*/10.0, &rng),
      {}, {}};
  for (int t = 0; t < 4; ++t) {
    DepthFrame f;
    for (int r = 0; r < 6; ++r) f.rays.push_back(rng.uniform(0.4, 5.0));
    fx.obs.depth_stack.push_back(std::move(f));
  }
  fx.obs.vel = {rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
  const double ang = rng.uniform(0.0, 2.0 * std::numbers::pi);
  fx.obs.unit_to_goal = {std::cos(ang), std::sin(ang)};
  fx.obs.dist_to_goal = rng.uniform(1.0, 15.0);
  fx.action = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  return fx;
}

}  // namespace detail

/// Every analytic backward pass against central finite differences:
/// isolated layers, the recurrent encoder, and the exact end-to-end
/// chains the learner uses. Returns per-case worst relative errors.
inline GradCheckReport run_gradcheck_suite() {
  GradCheckReport report;
  const auto add = [&](const std::string& name, double err) {
    report.cases.push_back({name, err});
    report.worst = std::max(report.worst, err);
  };

  {  // dense layer, loss = sum y^2
    Rng rng(101);
    nn::DenseLayer layer = nn::make_dense(4, 5, rng);
    nn::VecD x(5);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto loss = [&]() {
      double acc = 0.0;
      for (const double y : nn::dense_forward(layer, x)) acc += y * y;
      return acc;
    };
    nn::VecD y = nn::dense_forward(layer, x);
    nn::VecD dy(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * y[i];
    const nn::DenseGrads g = nn::dense_backward(layer, x, dy);
    nn::ParamList params;
    nn::append_params(params, "dense", layer);
    add("dense", nn::grad_check(params, {&g.dW.data, &g.db}, loss));
  }

  {  // two tanh layers, loss = sum y^2
    Rng rng(102);
    nn::DenseLayer l1 = nn::make_dense(5, 6, rng);
    nn::DenseLayer l2 = nn::make_dense(3, 5, rng);
    nn::VecD x(6);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto forward = [&]() {
      const nn::VecD h = nn::act_forward(nn::Act::Tanh, nn::dense_forward(l1, x));
      return nn::act_forward(nn::Act::Tanh, nn::dense_forward(l2, h));
    };
    const auto loss = [&]() {
      double acc = 0.0;
      for (const double y : forward()) acc += y * y;
      return acc;
    };
    const nn::VecD h = nn::act_forward(nn::Act::Tanh, nn::dense_forward(l1, x));
    const nn::VecD y = nn::act_forward(nn::Act::Tanh, nn::dense_forward(l2, h));
    nn::VecD dy(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * y[i];
    const nn::VecD dy_pre = nn::act_backward(nn::Act::Tanh, y, dy);
    nn::Mat dW2(3, 5);
    nn::VecD db2(3, 0.0), dh(5, 0.0);
    nn::dense_backward_acc(l2, h, dy_pre, dW2, db2, dh);
    const nn::VecD dh_pre = nn::act_backward(nn::Act::Tanh, h, dh);
    nn::Mat dW1(5, 6);
    nn::VecD db1(5, 0.0), dx(6, 0.0);
    nn::dense_backward_acc(l1, x, dh_pre, dW1, db1, dx);
    nn::ParamList params;
    nn::append_params(params, "l1", l1);
    nn::append_params(params, "l2", l2);
    add("tanh_mlp",
        nn::grad_check(params, {&dW1.data, &db1, &dW2.data, &db2}, loss));
  }

  {  // LSTM over four frames, loss = sum h_last^2
    Rng rng(103);
    nn::LstmCell cell = nn::make_lstm(6, 5, rng);
    std::vector<nn::VecD> xs(4, nn::VecD(6));
    for (auto& x : xs)
      for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto loss = [&]() {
      double acc = 0.0;
      for (const double h : nn::lstm_forward(cell, xs)) acc += h * h;
      return acc;
    };
    nn::LstmTrace trace;
    const nn::VecD h = nn::lstm_forward(cell, xs, &trace);
    nn::VecD dh(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) dh[i] = 2.0 * h[i];
    nn::LstmGrads grads = nn::make_lstm_grads(cell);
    nn::lstm_backward(cell, trace, dh, grads);
    nn::ParamList params;
    nn::append_params(params, "lstm", cell);
    add("lstm_bptt",
        nn::grad_check(params,
                       {&grads.dWi.data, &grads.dWf.data, &grads.dWo.data,
                        &grads.dWg.data, &grads.dbi, &grads.dbf, &grads.dbo,
                        &grads.dbg},
                       loss));
  }

  {  // critic loss through the shared depth encoder (the critic group)
    detail::GradCheckFixture fx = detail::make_gradcheck_fixture(104);
    Policy& p = fx.policy;
    const auto loss = [&]() {
      return critic_forward(p, false, encode_state(p, false, fx.obs), fx.action);
    };
    EncodeTrace etr;
    const nn::VecD s = encode_state(p, false, fx.obs, &etr);
    CriticTrace ctr;
    critic_forward(p, false, s, fx.action, &ctr);
    CriticGrads cg = make_critic_grads(p);
    const nn::VecD dx = critic_backward(p, ctr, 1.0, &cg);
    encoder_backward(
        p, etr,
        std::span<const double>(dx.data(),
                                static_cast<std::size_t>(p.cfg.embedding)),
        cg);
    add("critic_through_encoder",
        nn::grad_check(critic_group(p), critic_grad_refs(cg), loss));
  }

  {  // actor head, norm clamp inactive
    detail::GradCheckFixture fx = detail::make_gradcheck_fixture(105);
    Policy& p = fx.policy;
    for (double& w : p.a3.W.data) w *= 0.05;
    for (double& b : p.a3.b) b *= 0.05;
    const nn::VecD s = encode_state(p, false, fx.obs);
    ActorTrace atr;
    const Vec2 a = actor_forward(p, false, s, &atr);
    if (atr.clamped)
      throw std::logic_error("gradcheck fixture expected an unclamped actor");
    const auto loss = [&]() {
      const Vec2 out = actor_forward(p, false, s);
      return out.x + 0.5 * out.y;
    };
    (void)a;
    ActorGrads ag = make_actor_grads(p);
    actor_backward(p, atr, {1.0, 0.5}, ag);
    add("actor_unclamped",
        nn::grad_check(actor_group(p), actor_grad_refs(ag), loss));
  }

  {  // actor head with the norm clamp engaged
    detail::GradCheckFixture fx = detail::make_gradcheck_fixture(106);
    Policy& p = fx.policy;
    for (double& w : p.a3.W.data) w *= 6.0;
    p.a3.b[0] += 1.0;
    p.a3.b[1] -= 1.0;
    const nn::VecD s = encode_state(p, false, fx.obs);
    ActorTrace atr;
    actor_forward(p, false, s, &atr);
    if (!atr.clamped)
      throw std::logic_error("gradcheck fixture expected a clamped actor");
    const auto loss = [&]() {
      const Vec2 out = actor_forward(p, false, s);
      return out.x + 0.5 * out.y;
    };
    ActorGrads ag = make_actor_grads(p);
    actor_backward(p, atr, {1.0, 0.5}, ag);
    add("actor_clamped",
        nn::grad_check(actor_group(p), actor_grad_refs(ag), loss));
  }

  {  // the policy-gradient chain: d Q(s, pi(s)) / d actor parameters
    detail::GradCheckFixture fx = detail::make_gradcheck_fixture(107);
    Policy& p = fx.policy;
    const nn::VecD s = encode_state(p, false, fx.obs);
    const auto loss = [&]() {
      return critic_forward(p, false, s, actor_forward(p, false, s));
    };
    ActorTrace atr;
    const Vec2 a = actor_forward(p, false, s, &atr);
    CriticTrace ctr;
    critic_forward(p, false, s, a, &ctr);
    const nn::VecD dx = critic_backward(p, ctr, 1.0, nullptr);
    const std::size_t sd = static_cast<std::size_t>(p.state_dim());
    ActorGrads ag = make_actor_grads(p);
    actor_backward(p, atr, {dx[sd], dx[sd + 1]}, ag);
    add("actor_through_critic",
        nn::grad_check(actor_group(p), actor_grad_refs(ag), loss));
  }

  return report;
}

}  // namespace skysmooth
