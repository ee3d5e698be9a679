#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "skysmooth/rng.hpp"

namespace skysmooth::nn {

using VecD = std::vector<double>;

/// Row-major matrix with an explicit shape.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  VecD data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_vec(const VecD& v, std::size_t n, const char* what) {
  require(v.size() == n, std::string("shape mismatch: ") + what + " has size " +
                             std::to_string(v.size()) + ", expected " +
                             std::to_string(n));
}

}  // namespace detail

/// y = W x + b.
inline VecD affine(const Mat& W, const VecD& b, const VecD& x) {
  detail::check_vec(x, W.cols, "input");
  detail::check_vec(b, W.rows, "bias");
  VecD y(W.rows);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* row = &W.data[r * W.cols];
    double acc = b[r];
    for (std::size_t c = 0; c < W.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// dx += W^T dy.
inline void matvec_transpose_acc(const Mat& W, const VecD& dy, VecD& dx) {
  detail::check_vec(dy, W.rows, "dy");
  detail::check_vec(dx, W.cols, "dx");
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* row = &W.data[r * W.cols];
    const double d = dy[r];
    for (std::size_t c = 0; c < W.cols; ++c) dx[c] += row[c] * d;
  }
}

/// dW += dy x^T.
inline void outer_acc(const VecD& dy, const VecD& x, Mat& dW) {
  detail::check_vec(dy, dW.rows, "dy");
  detail::check_vec(x, dW.cols, "x");
  for (std::size_t r = 0; r < dW.rows; ++r) {
    double* row = &dW.data[r * dW.cols];
    const double d = dy[r];
    for (std::size_t c = 0; c < dW.cols; ++c) row[c] += d * x[c];
  }
}

/// Fully connected layer.
struct DenseLayer {
  Mat W;
  VecD b;

  std::size_t in() const { return W.cols; }
  std::size_t out() const { return W.rows; }
};

struct DenseGrads {
  VecD dx;
  Mat dW;
  VecD db;
};

/// Xavier-uniform weight matrix, deterministic for a given stream.
inline Mat init_xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  Mat m(rows, cols);
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  for (double& w : m.data) w = rng.uniform(-limit, limit);
  return m;
}

inline DenseLayer make_dense(std::size_t out, std::size_t in, Rng& rng) {
  return DenseLayer{init_xavier(out, in, rng), VecD(out, 0.0)};
}

inline VecD dense_forward(const DenseLayer& layer, const VecD& x) {
  return affine(layer.W, layer.b, x);
}

/// Analytic gradients of y = Wx + b for upstream gradient dy.
inline DenseGrads dense_backward(const DenseLayer& layer, const VecD& x,
                                 const VecD& dy) {
  detail::check_vec(x, layer.in(), "x");
  detail::check_vec(dy, layer.out(), "dy");
  DenseGrads g{VecD(layer.in(), 0.0), Mat(layer.out(), layer.in()), dy};
  matvec_transpose_acc(layer.W, dy, g.dx);
  outer_acc(dy, x, g.dW);
  return g;
}

/// Accumulating form used by the training loop.
inline void dense_backward_acc(const DenseLayer& layer, const VecD& x,
                               const VecD& dy, Mat& dW, VecD& db, VecD& dx) {
  detail::check_vec(dx, layer.in(), "dx");
  matvec_transpose_acc(layer.W, dy, dx);
  outer_acc(dy, x, dW);
  for (std::size_t r = 0; r < dy.size(); ++r) db[r] += dy[r];
}

enum class Act { Identity, Relu, Tanh };

inline VecD act_forward(Act act, const VecD& x) {
  VecD y(x.size());
  switch (act) {
    case Act::Identity:
      y = x;
      break;
    case Act::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case Act::Tanh:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
      break;
  }
  return y;
}

/// Backward through an elementwise activation, expressed via the outputs y.
inline VecD act_backward(Act act, const VecD& y, const VecD& dy) {
  detail::check_vec(dy, y.size(), "dy");
  VecD dx(y.size());
  switch (act) {
    case Act::Identity:
      dx = dy;
      break;
    case Act::Relu:
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
      break;
    case Act::Tanh:
      for (std::size_t i = 0; i < y.size(); ++i) dx[i] = dy[i] * (1.0 - y[i] * y[i]);
      break;
  }
  return dx;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// LSTM cell; the four gates share the [hidden x (in + hidden)] layout.
struct LstmCell {
  std::size_t in = 0;
  std::size_t hidden = 0;
  Mat Wi, Wf, Wo, Wg;
  VecD bi, bf, bo, bg;
};

inline LstmCell make_lstm(std::size_t in, std::size_t hidden, Rng& rng) {
  LstmCell cell;
  cell.in = in;
  cell.hidden = hidden;
  const std::size_t z = in + hidden;
  cell.Wi = init_xavier(hidden, z, rng);
  cell.Wf = init_xavier(hidden, z, rng);
  cell.Wo = init_xavier(hidden, z, rng);
  cell.Wg = init_xavier(hidden, z, rng);
  cell.bi.assign(hidden, 0.0);
  cell.bf.assign(hidden, 1.0);  // open forget gates at init
  cell.bo.assign(hidden, 0.0);
  cell.bg.assign(hidden, 0.0);
  return cell;
}

/// One gated recurrence step.
inline std::pair<VecD, VecD> lstm_step(const LstmCell& cell, const VecD& x,
                                       const VecD& h_prev, const VecD& c_prev) {
  detail::check_vec(x, cell.in, "x");
  detail::check_vec(h_prev, cell.hidden, "h_prev");
  detail::check_vec(c_prev, cell.hidden, "c_prev");
  VecD z(cell.in + cell.hidden);
  std::copy(x.begin(), x.end(), z.begin());
  std::copy(h_prev.begin(), h_prev.end(), z.begin() + cell.in);
  VecD i = affine(cell.Wi, cell.bi, z);
  VecD f = affine(cell.Wf, cell.bf, z);
  VecD o = affine(cell.Wo, cell.bo, z);
  VecD g = affine(cell.Wg, cell.bg, z);
  VecD c(cell.hidden), h(cell.hidden);
  for (std::size_t k = 0; k < cell.hidden; ++k) {
    const double ik = sigmoid(i[k]);
    const double fk = sigmoid(f[k]);
    const double ok = sigmoid(o[k]);
    const double gk = std::tanh(g[k]);
    c[k] = fk * c_prev[k] + ik * gk;
    h[k] = ok * std::tanh(c[k]);
  }
  return {h, c};
}

/// Forward state kept for backpropagation through time.
struct LstmTrace {
  std::vector<VecD> z;       // concat [x_t; h_{t-1}] per step
  std::vector<VecD> i, f, o, g;  // gate activations (post nonlinearity)
  std::vector<VecD> c, tanh_c;
  std::vector<VecD> c_prev;
};

/// Run the cell over a sequence from zero initial state; returns the final
/// hidden state, which serves as the sequence embedding.
inline VecD lstm_forward(const LstmCell& cell, std::span<const VecD> xs,
                         LstmTrace* trace = nullptr) {
  VecD h(cell.hidden, 0.0), c(cell.hidden, 0.0);
  if (trace) *trace = {};
  for (const VecD& x : xs) {
    detail::check_vec(x, cell.in, "x");
    VecD z(cell.in + cell.hidden);
    std::copy(x.begin(), x.end(), z.begin());
    std::copy(h.begin(), h.end(), z.begin() + cell.in);
    VecD ip = affine(cell.Wi, cell.bi, z);
    VecD fp = affine(cell.Wf, cell.bf, z);
    VecD op = affine(cell.Wo, cell.bo, z);
    VecD gp = affine(cell.Wg, cell.bg, z);
    VecD c_new(cell.hidden), tanh_c(cell.hidden), h_new(cell.hidden);
    for (std::size_t k = 0; k < cell.hidden; ++k) {
      ip[k] = sigmoid(ip[k]);
      fp[k] = sigmoid(fp[k]);
      op[k] = sigmoid(op[k]);
      gp[k] = std::tanh(gp[k]);
      c_new[k] = fp[k] * c[k] + ip[k] * gp[k];
      tanh_c[k] = std::tanh(c_new[k]);
      h_new[k] = op[k] * tanh_c[k];
    }
    if (trace) {
      trace->z.push_back(std::move(z));
      trace->i.push_back(std::move(ip));
      trace->f.push_back(std::move(fp));
      trace->o.push_back(std::move(op));
      trace->g.push_back(std::move(gp));
      trace->c_prev.push_back(c);
      trace->c.push_back(c_new);
      trace->tanh_c.push_back(tanh_c);
    }
    h = std::move(h_new);
    c = std::move(c_new);
  }
  return h;
}

struct LstmGrads {
  Mat dWi, dWf, dWo, dWg;
  VecD dbi, dbf, dbo, dbg;
};

inline LstmGrads make_lstm_grads(const LstmCell& cell) {
  const std::size_t z = cell.in + cell.hidden;
  return LstmGrads{Mat(cell.hidden, z), Mat(cell.hidden, z),
                   Mat(cell.hidden, z), Mat(cell.hidden, z),
                   VecD(cell.hidden, 0.0), VecD(cell.hidden, 0.0),
                   VecD(cell.hidden, 0.0), VecD(cell.hidden, 0.0)};
}

/// Backpropagation through time from a gradient at the final hidden state.
/// Accumulates parameter gradients into acc.
inline void lstm_backward(const LstmCell& cell, const LstmTrace& trace,
                          const VecD& dh_last, LstmGrads& acc) {
  detail::check_vec(dh_last, cell.hidden, "dh_last");
  const std::size_t steps = trace.z.size();
  const std::size_t H = cell.hidden;
  VecD dh = dh_last;
  VecD dc(H, 0.0);
  VecD di(H), df(H), dof(H), dg(H);
  for (std::size_t s = steps; s-- > 0;) {
    const VecD& i = trace.i[s];
    const VecD& f = trace.f[s];
    const VecD& o = trace.o[s];
    const VecD& g = trace.g[s];
    const VecD& tc = trace.tanh_c[s];
    const VecD& c_prev = trace.c_prev[s];
    for (std::size_t k = 0; k < H; ++k) {
      dof[k] = dh[k] * tc[k] * o[k] * (1.0 - o[k]);
      const double dck = dc[k] + dh[k] * o[k] * (1.0 - tc[k] * tc[k]);
      df[k] = dck * c_prev[k] * f[k] * (1.0 - f[k]);
      di[k] = dck * g[k] * i[k] * (1.0 - i[k]);
      dg[k] = dck * i[k] * (1.0 - g[k] * g[k]);
      dc[k] = dck * f[k];
    }
    const VecD& z = trace.z[s];
    outer_acc(di, z, acc.dWi);
    outer_acc(df, z, acc.dWf);
    outer_acc(dof, z, acc.dWo);
    outer_acc(dg, z, acc.dWg);
    for (std::size_t k = 0; k < H; ++k) {
      acc.dbi[k] += di[k];
      acc.dbf[k] += df[k];
      acc.dbo[k] += dof[k];
      acc.dbg[k] += dg[k];
    }
    VecD dz(cell.in + H, 0.0);
    matvec_transpose_acc(cell.Wi, di, dz);
    matvec_transpose_acc(cell.Wf, df, dz);
    matvec_transpose_acc(cell.Wo, dof, dz);
    matvec_transpose_acc(cell.Wg, dg, dz);
    std::copy(dz.begin() + cell.in, dz.end(), dh.begin());
  }
}

/// Named references to a network's parameter tensors, in a fixed traversal
/// order shared by the optimizer, soft updates, and checkpoints.
using ParamList = std::vector<std::pair<std::string, VecD*>>;

inline void append_params(ParamList& out, const std::string& prefix,
                          DenseLayer& layer) {
  out.emplace_back(prefix + ".W", &layer.W.data);
  out.emplace_back(prefix + ".b", &layer.b);
}

inline void append_params(ParamList& out, const std::string& prefix,
                          LstmCell& cell) {
  out.emplace_back(prefix + ".Wi", &cell.Wi.data);
  out.emplace_back(prefix + ".Wf", &cell.Wf.data);
  out.emplace_back(prefix + ".Wo", &cell.Wo.data);
  out.emplace_back(prefix + ".Wg", &cell.Wg.data);
  out.emplace_back(prefix + ".bi", &cell.bi);
  out.emplace_back(prefix + ".bf", &cell.bf);
  out.emplace_back(prefix + ".bo", &cell.bo);
  out.emplace_back(prefix + ".bg", &cell.bg);
}

/// Adaptive-moment optimizer state; moments mirror the parameter list.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step = 0;
  std::vector<VecD> m, v;

  void init_like(const ParamList& params) {
    m.clear();
    v.clear();
    for (const auto& [name, p] : params) {
      m.emplace_back(p->size(), 0.0);
      v.emplace_back(p->size(), 0.0);
    }
    step = 0;
  }
};

/// Bias-corrected moment update, applied in place.
inline void adam_update(const ParamList& params,
                        const std::vector<const VecD*>& grads, AdamState& st) {
  if (params.size() != grads.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_update: parameter/gradient list mismatch");
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    VecD& p = *params[t].second;
    const VecD& g = *grads[t];
    detail::check_vec(g, p.size(), params[t].first.c_str());
    VecD& m = st.m[t];
    VecD& v = st.v[t];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g[k];
      if (!std::isfinite(gk))
        throw std::runtime_error("gradient blow-up in " + params[t].first);
      m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * gk;
      v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * gk * gk;
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= st.lr * mhat / (std::sqrt(vhat) + st.epsilon);
    }
  }
}

/// Worst relative error between analytic gradients and central finite
/// differences, perturbing every parameter in the list. The loss callback
/// must be a pure function of the referenced parameters.
inline double grad_check(const ParamList& params,
                         const std::vector<const VecD*>& analytic,
                         const std::function<double()>& loss) {
  if (params.size() != analytic.size())
    throw std::invalid_argument("grad_check: parameter/gradient list mismatch");
  double worst = 0.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    VecD& p = *params[t].second;
    const VecD& a = *analytic[t];
    detail::check_vec(a, p.size(), params[t].first.c_str());
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double saved = p[k];
      const double h = 1e-5 * std::max(1.0, std::abs(saved));
      p[k] = saved + h;
      const double fp = loss();
      p[k] = saved - h;
      const double fm = loss();
      p[k] = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      const double denom = std::max(std::abs(a[k]) + std::abs(numeric), 1e-6);
      worst = std::max(worst, std::abs(a[k] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace skysmooth::nn
