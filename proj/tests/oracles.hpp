#pragma once

// Independent reference implementations used only by tests. Nothing here
// calls into the library's kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <vector>

namespace oracle {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c(a.size(), Vec(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b[0].size(); ++j)
      for (std::size_t p = 0; p < b.size(); ++p) c[i][j] += a[i][p] * b[p][j];
  return c;
}

// input[t][c], filters[j][c][o]
inline Mat conv1d(const Mat& input, const std::vector<Mat>& filters, const Vec& bias) {
  const std::size_t T = input.size(), k = filters.size(), cin = input[0].size(), cout = bias.size();
  Mat out(T - k + 1, Vec(cout));
  for (std::size_t t = 0; t + k <= T; ++t)
    for (std::size_t o = 0; o < cout; ++o) {
      double s = bias[o];
      for (std::size_t j = 0; j < k; ++j)
        for (std::size_t c = 0; c < cin; ++c) s += input[t + j][c] * filters[j][c][o];
      out[t][o] = s;
    }
  return out;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// gate(v) = v * W + b for W of shape (len(v) x H), scalar loops
inline Vec gate(const Vec& v, const Mat& W, const Vec& b) {
  Vec out(b);
  for (std::size_t j = 0; j < b.size(); ++j)
    for (std::size_t i = 0; i < v.size(); ++i) out[j] += v[i] * W[i][j];
  return out;
}

inline Vec cat(const Vec& a, const Vec& b) {
  Vec out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

struct GruParams {
  Mat Wz, Wr, Wh;
  Vec bz, br, bh;
};

inline Vec gru_step(const GruParams& p, const Vec& x, const Vec& h) {
  const std::size_t H = h.size();
  Vec z = gate(cat(x, h), p.Wz, p.bz);
  Vec r = gate(cat(x, h), p.Wr, p.br);
  for (std::size_t j = 0; j < H; ++j) {
    z[j] = sigmoid(z[j]);
    r[j] = sigmoid(r[j]);
  }
  Vec rh(H);
  for (std::size_t j = 0; j < H; ++j) rh[j] = r[j] * h[j];
  Vec hc = gate(cat(x, rh), p.Wh, p.bh);
  Vec out(H);
  for (std::size_t j = 0; j < H; ++j) out[j] = (1.0 - z[j]) * h[j] + z[j] * std::tanh(hc[j]);
  return out;
}

struct LstmParams {
  Mat Wi, Wf, Wo, Wg;
  Vec bi, bf, bo, bg;
};

inline std::pair<Vec, Vec> lstm_step(const LstmParams& p, const Vec& x, const Vec& h, const Vec& c) {
  const std::size_t H = h.size();
  Vec v = cat(x, h);
  Vec i = gate(v, p.Wi, p.bi), f = gate(v, p.Wf, p.bf), o = gate(v, p.Wo, p.bo), g = gate(v, p.Wg, p.bg);
  Vec hn(H), cn(H);
  for (std::size_t j = 0; j < H; ++j) {
    cn[j] = sigmoid(f[j]) * c[j] + sigmoid(i[j]) * std::tanh(g[j]);
    hn[j] = sigmoid(o[j]) * std::tanh(cn[j]);
  }
  return {hn, cn};
}

// Most frequent vote; when the top count is shared, votes[fallback].
inline std::size_t mode_with_fallback(const std::vector<std::size_t>& votes, std::size_t fallback) {
  std::map<std::size_t, std::size_t> counts;
  for (auto v : votes) ++counts[v];
  std::size_t best = 0, winners = 0, label = 0;
  for (auto [l, c] : counts) {
    if (c > best) {
      best = c;
      winners = 1;
      label = l;
    } else if (c == best) {
      ++winners;
    }
  }
  return winners == 1 ? label : votes[fallback];
}

struct LabelCounts {
  double precision, recall, f1;
  std::size_t support;
};

// Per-label counting with explicit TP/FP/FN loops.
inline std::vector<LabelCounts> per_label(const std::vector<std::size_t>& truth,
                                          const std::vector<std::size_t>& pred, std::size_t classes) {
  std::vector<LabelCounts> out;
  for (std::size_t l = 0; l < classes; ++l) {
    double tp = 0, fp = 0, fn = 0;
    std::size_t support = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == l) ++support;
      if (truth[i] == l && pred[i] == l) ++tp;
      if (truth[i] != l && pred[i] == l) ++fp;
      if (truth[i] == l && pred[i] != l) ++fn;
    }
    double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    double f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
    out.push_back({p, r, f, support});
  }
  return out;
}

inline double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& pred,
                       std::size_t classes) {
  double s = 0;
  for (auto& c : per_label(truth, pred, classes)) s += c.f1;
  return s / static_cast<double>(classes);
}

// Central differences of a scalar function of a flat parameter vector.
template <typename F>
Vec numeric_gradient(F f, Vec x, double eps = 1e-5) {
  Vec g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double s = x[i];
    x[i] = s + eps;
    const double up = f(x);
    x[i] = s - eps;
    const double down = f(x);
    x[i] = s;
    g[i] = (up - down) / (2 * eps);
  }
  return g;
}

}  // namespace oracle
