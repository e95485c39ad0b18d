#pragma once

// Layer kit: embedding lookup, 1-D convolution, pooling, dropout, GRU/LSTM
// cells, the bidirectional wrapper, and dense projection.

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "jobpred/document.hpp"
#include "jobpred/error.hpp"
#include "jobpred/random.hpp"
#include "jobpred/tensor.hpp"

namespace jobpred {

enum class Mode { train, eval };

/// Glorot/Xavier uniform: U(-sqrt(6/(fan_in+fan_out)), +...).
inline Tensor glorot_uniform(Shape shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = uniform(rng, -limit, limit);
  return Tensor(std::move(shape), std::move(v), true);
}

// ---------------------------------------------------------------------------
// Embedding

/// vocab_size x dim lookup table. Row kPadId is all-zero; row kUnknownId is
/// reserved for out-of-vocabulary tokens.
struct EmbeddingTable {
  Tensor matrix;
  bool trainable = false;

  std::size_t vocab_size() const { return matrix.dim(0); }
  std::size_t dim() const { return matrix.dim(1); }

  static EmbeddingTable random(std::size_t vocab_size, std::size_t dim, Rng& rng,
                               double half_range = 0.05) {
    if (vocab_size < 2) throw ConfigError("embedding table needs the pad and unknown rows");
    std::vector<double> v(vocab_size * dim);
    for (double& x : v) x = uniform(rng, -half_range, half_range);
    std::fill_n(v.begin(), dim, 0.0);
    return EmbeddingTable{Tensor({vocab_size, dim}, std::move(v)), false};
  }
};

/// Row t of the result is table row indices[t]. Gradients, when the table is
/// trainable, reach only the looked-up non-pad rows.
inline Tensor embed(std::span<const std::size_t> indices, const EmbeddingTable& table) {
  const std::size_t dim = table.dim();
  const std::size_t vocab = table.vocab_size();
  if (indices.empty()) throw ShapeError("embed: empty index sequence");
  std::vector<double> out(indices.size() * dim);
  const double* src = table.matrix.values().data();
  for (std::size_t t = 0; t < indices.size(); ++t) {
    if (indices[t] >= vocab) {
      throw VocabularyError("index " + std::to_string(indices[t]) + " at position " +
                            std::to_string(t) + " exceeds vocabulary size " + std::to_string(vocab));
    }
    std::copy_n(src + indices[t] * dim, dim, out.data() + t * dim);
  }
  if (!table.trainable) return Tensor({indices.size(), dim}, std::move(out));
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return detail::make_result({indices.size(), dim}, std::move(out), {&table.matrix},
                             [idx = std::move(idx), dim](detail::Node& self) {
                               double* g = detail::parent_grad(self, 0);
                               if (!g) return;
                               for (std::size_t t = 0; t < idx.size(); ++t) {
                                 if (idx[t] == kPadId) continue;
                                 for (std::size_t j = 0; j < dim; ++j)
                                   g[idx[t] * dim + j] += self.grad[t * dim + j];
                               }
                             });
}

inline Tensor embed(const EncodedDocument& doc, const EmbeddingTable& table) {
  return embed(std::span<const std::size_t>(doc.indices), table);
}

// ---------------------------------------------------------------------------
// Convolution and pooling

/// Valid (unpadded) cross-correlation along time:
/// out[t][o] = bias[o] + sum_{j<k} sum_c input[t+j][c] * filters[j][c][o].
inline Tensor conv1d(const Tensor& input, const Tensor& filters, const Tensor& bias) {
  if (input.rank() != 2 || filters.rank() != 3 || bias.rank() != 1 ||
      filters.dim(1) != input.dim(1) || filters.dim(2) != bias.dim(0)) {
    throw ShapeError("conv1d: input " + shape_str(input.shape()) + ", filters " +
                     shape_str(filters.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::size_t T = input.dim(0), cin = input.dim(1);
  const std::size_t k = filters.dim(0), cout = filters.dim(2);
  if (T < k) {
    throw ShapeError("conv1d: sequence length " + std::to_string(T) + " shorter than kernel " +
                     std::to_string(k));
  }
  const std::size_t tout = T - k + 1;
  std::vector<double> out(tout * cout);
  const double* X = input.values().data();
  const double* W = filters.values().data();
  const double* B = bias.values().data();
  for (std::size_t t = 0; t < tout; ++t) {
    double* row = out.data() + t * cout;
    std::copy_n(B, cout, row);
    for (std::size_t j = 0; j < k; ++j) {
      const double* x = X + (t + j) * cin;
      const double* w = W + j * cin * cout;
      for (std::size_t c = 0; c < cin; ++c) {
        const double xv = x[c];
        if (xv == 0.0) continue;
        const double* wc = w + c * cout;
        for (std::size_t o = 0; o < cout; ++o) row[o] += xv * wc[o];
      }
    }
  }
  return detail::make_result(
      {tout, cout}, std::move(out), {&input, &filters, &bias},
      [tout, cin, k, cout](detail::Node& self) {
        const double* G = self.grad.data();
        const double* X = self.parents[0]->values.data();
        const double* W = self.parents[1]->values.data();
        double* gX = detail::parent_grad(self, 0);
        double* gW = detail::parent_grad(self, 1);
        double* gB = detail::parent_grad(self, 2);
        for (std::size_t t = 0; t < tout; ++t) {
          const double* g = G + t * cout;
          if (gB)
            for (std::size_t o = 0; o < cout; ++o) gB[o] += g[o];
          for (std::size_t j = 0; j < k; ++j) {
            const double* x = X + (t + j) * cin;
            const double* w = W + j * cin * cout;
            for (std::size_t c = 0; c < cin; ++c) {
              const double* wc = w + c * cout;
              if (gX) {
                double acc = 0.0;
                for (std::size_t o = 0; o < cout; ++o) acc += g[o] * wc[o];
                gX[(t + j) * cin + c] += acc;
              }
              if (gW && x[c] != 0.0) {
                double* gwc = gW + (j * cin + c) * cout;
                for (std::size_t o = 0; o < cout; ++o) gwc[o] += x[c] * g[o];
              }
            }
          }
        }
      });
}

/// Per-channel max over time; the gradient goes to the first argmax.
inline Tensor global_max_pool(const Tensor& input) {
  if (input.rank() != 2) throw ShapeError("global_max_pool: expected [T x C], got " + shape_str(input.shape()));
  const std::size_t T = input.dim(0), C = input.dim(1);
  std::vector<double> out(C);
  std::vector<std::size_t> arg(C, 0);
  const double* X = input.values().data();
  for (std::size_t c = 0; c < C; ++c) {
    double best = X[c];
    for (std::size_t t = 1; t < T; ++t) {
      if (X[t * C + c] > best) {
        best = X[t * C + c];
        arg[c] = t;
      }
    }
    out[c] = best;
  }
  return detail::make_result({C}, std::move(out), {&input}, [arg = std::move(arg), C](detail::Node& self) {
    if (double* g = detail::parent_grad(self, 0))
      for (std::size_t c = 0; c < C; ++c) g[arg[c] * C + c] += self.grad[c];
  });
}

// ---------------------------------------------------------------------------
// Dropout (inverted: survivors are scaled by 1/(1-rate) at train time)

namespace detail {

inline void check_rate(double rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate " + std::to_string(rate) + " not in [0,1)");
}

inline Tensor apply_mask(const Tensor& input, std::vector<double> mask) {
  std::vector<double> out(input.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = input[i] * mask[i];
  return make_result(input.shape(), std::move(out), {&input}, [mask = std::move(mask)](Node& self) {
    if (double* g = parent_grad(self, 0))
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * mask[i];
  });
}

}  // namespace detail

/// Zeroes whole channels of a [T x C] input: each channel is dropped with
/// probability rate across every time step, or kept and scaled.
inline Tensor spatial_dropout1d(const Tensor& input, double rate, Mode mode, Rng& rng) {
  detail::check_rate(rate);
  if (input.rank() != 2) throw ShapeError("spatial_dropout1d: expected [T x C], got " + shape_str(input.shape()));
  if (mode == Mode::eval || rate == 0.0) return input;
  const std::size_t T = input.dim(0), C = input.dim(1);
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> channel(C);
  for (double& m : channel) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  std::vector<double> mask(T * C);
  for (std::size_t t = 0; t < T; ++t) std::copy(channel.begin(), channel.end(), mask.begin() + t * C);
  return detail::apply_mask(input, std::move(mask));
}

/// Standard element-wise dropout.
inline Tensor dropout(const Tensor& input, double rate, Mode mode, Rng& rng) {
  detail::check_rate(rate);
  if (mode == Mode::eval || rate == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(input.size());
  for (double& m : mask) m = uniform01(rng) < rate ? 0.0 : keep_scale;
  return detail::apply_mask(input, std::move(mask));
}

// ---------------------------------------------------------------------------
// Dense

/// input[D] (or [N x D]) times W[D x K] plus b[K].
inline Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() == 1) {
    Tensor row = reshape(input, {1, input.dim(0)});
    Tensor out = matmul(row, weight);
    return add_bias(reshape(out, {weight.dim(1)}), bias);
  }
  return add_bias(matmul(input, weight), bias);
}

// ---------------------------------------------------------------------------
// Recurrent cells

enum class CellKind { gru, lstm };

inline const char* to_string(CellKind kind) { return kind == CellKind::gru ? "gru" : "lstm"; }

/// Per-gate weights use the concatenated-input convention: every gate matrix
/// is (input_dim + hidden_units) x hidden_units and multiplies the row
/// vector [x, h]. Gate order: GRU {z, r, h~}; LSTM {i, f, o, g}.
struct RecurrentCellParams {
  CellKind kind = CellKind::gru;
  std::size_t input_dim = 0;
  std::size_t hidden_units = 0;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  static std::size_t gate_count(CellKind kind) { return kind == CellKind::gru ? 3 : 4; }

  static std::vector<std::string> gate_names(CellKind kind) {
    if (kind == CellKind::gru) return {"update", "reset", "candidate"};
    return {"input", "forget", "output", "cell"};
  }

  static RecurrentCellParams zeros(CellKind kind, std::size_t input_dim, std::size_t hidden) {
    RecurrentCellParams p{kind, input_dim, hidden, {}, {}};
    for (std::size_t q = 0; q < gate_count(kind); ++q) {
      p.weights.push_back(Tensor::zeros({input_dim + hidden, hidden}, true));
      p.biases.push_back(Tensor::zeros({hidden}, true));
    }
    return p;
  }

  /// Glorot-uniform weights, zero biases (LSTM forget bias starts at 1).
  static RecurrentCellParams init(CellKind kind, std::size_t input_dim, std::size_t hidden, Rng& rng) {
    RecurrentCellParams p = zeros(kind, input_dim, hidden);
    for (auto& w : p.weights) w = glorot_uniform({input_dim + hidden, hidden}, input_dim + hidden, hidden, rng);
    if (kind == CellKind::lstm) {
      for (double& b : p.biases[1].mutable_values()) b = 1.0;
    }
    return p;
  }

  void validate() const {
    const std::size_t g = gate_count(kind);
    if (weights.size() != g || biases.size() != g) throw ShapeError("recurrent cell: wrong gate count");
    for (std::size_t q = 0; q < g; ++q) {
      if (weights[q].shape() != Shape{input_dim + hidden_units, hidden_units} ||
          biases[q].shape() != Shape{hidden_units}) {
        throw ShapeError("recurrent cell gate " + std::to_string(q) + ": weight " +
                         shape_str(weights[q].shape()) + ", bias " + shape_str(biases[q].shape()) +
                         " for input " + std::to_string(input_dim) + ", hidden " +
                         std::to_string(hidden_units));
      }
    }
  }

  std::vector<Tensor> tensors() const {
    std::vector<Tensor> all;
    for (std::size_t q = 0; q < weights.size(); ++q) {
      all.push_back(weights[q]);
      all.push_back(biases[q]);
    }
    return all;
  }
};

namespace detail {

inline void check_step_dims(const RecurrentCellParams& params, CellKind kind, const Tensor& x,
                            const Tensor& h) {
  if (params.kind != kind) throw ShapeError("recurrent step: wrong cell kind");
  params.validate();
  if (x.shape() != Shape{params.input_dim} || h.shape() != Shape{params.hidden_units}) {
    throw ShapeError("recurrent step: x " + shape_str(x.shape()) + ", h " + shape_str(h.shape()) +
                     " for input " + std::to_string(params.input_dim) + ", hidden " +
                     std::to_string(params.hidden_units));
  }
}

}  // namespace detail

/// z = s([x,h]Wz+bz); r = s([x,h]Wr+br); h~ = tanh([x, r*h]Wh+bh);
/// h' = (1-z)*h + z*h~. Built from graph primitives.
inline Tensor gru_step(const RecurrentCellParams& params, const Tensor& x, const Tensor& h_prev) {
  detail::check_step_dims(params, CellKind::gru, x, h_prev);
  Tensor xh = concat({x, h_prev});
  Tensor z = sigmoid(dense(xh, params.weights[0], params.biases[0]));
  Tensor r = sigmoid(dense(xh, params.weights[1], params.biases[1]));
  Tensor candidate = tanh(dense(concat({x, mul(r, h_prev)}), params.weights[2], params.biases[2]));
  return add(mul(one_minus(z), h_prev), mul(z, candidate));
}

/// Returns (h', c') with c' = f*c + i*g and h' = o*tanh(c').
inline std::pair<Tensor, Tensor> lstm_step(const RecurrentCellParams& params, const Tensor& x,
                                           const Tensor& h_prev, const Tensor& c_prev) {
  detail::check_step_dims(params, CellKind::lstm, x, h_prev);
  if (c_prev.shape() != h_prev.shape()) throw ShapeError("lstm_step: cell state " + shape_str(c_prev.shape()));
  Tensor xh = concat({x, h_prev});
  Tensor i = sigmoid(dense(xh, params.weights[0], params.biases[0]));
  Tensor f = sigmoid(dense(xh, params.weights[1], params.biases[1]));
  Tensor o = sigmoid(dense(xh, params.weights[2], params.biases[2]));
  Tensor g = tanh(dense(xh, params.weights[3], params.biases[3]));
  Tensor c = add(mul(f, c_prev), mul(i, g));
  return {mul(o, tanh(c)), c};
}

namespace detail {

// out[j] += sum_i v[i] * W[i][j]
inline void vecmat_acc(const double* v, const double* W, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    const double* w = W + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += vi * w[j];
  }
}

// out[i] += sum_j W[i][j] * d[j]
inline void matvec_acc(const double* W, const double* d, std::size_t rows, std::size_t cols, double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* w = W + i * cols;
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc += w[j] * d[j];
    out[i] += acc;
  }
}

// G[i][j] += v[i] * d[j]
inline void outer_acc(const double* v, const double* d, std::size_t rows, std::size_t cols, double* G) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double vi = v[i];
    if (vi == 0.0) continue;
    double* g = G + i * cols;
    for (std::size_t j = 0; j < cols; ++j) g[j] += vi * d[j];
  }
}

// Activations saved by one directional pass, one slab of H per step.
struct DirectionTrace {
  std::vector<std::size_t> positions;  // time index processed at each step
  std::vector<double> h_prev;          // GRU and LSTM
  std::vector<double> gates;           // G slabs per step (post-activation)
  std::vector<double> c_prev, c_tanh;  // LSTM only
};

struct RecurrentView {
  CellKind kind;
  std::size_t D, H;
  std::vector<const double*> W, B;
};

inline RecurrentView view_of(const RecurrentCellParams& p) {
  RecurrentView v{p.kind, p.input_dim, p.hidden_units, {}, {}};
  for (std::size_t q = 0; q < p.weights.size(); ++q) {
    v.W.push_back(p.weights[q].values().data());
    v.B.push_back(p.biases[q].values().data());
  }
  return v;
}

// Runs one direction over `positions`, writing h into out[t*stride + offset].
inline DirectionTrace run_direction(const RecurrentView& cell, const double* X,
                                    std::vector<std::size_t> positions, double* out,
                                    std::size_t stride, std::size_t offset) {
  const std::size_t D = cell.D, H = cell.H;
  const std::size_t G = cell.kind == CellKind::gru ? 3 : 4;
  DirectionTrace tr;
  const std::size_t L = positions.size();
  tr.h_prev.resize(L * H);
  tr.gates.resize(L * G * H);
  if (cell.kind == CellKind::lstm) {
    tr.c_prev.resize(L * H);
    tr.c_tanh.resize(L * H);
  }
  std::vector<double> h(H, 0.0), c(H, 0.0), v(D + H), a(H);
  for (std::size_t s = 0; s < L; ++s) {
    const std::size_t t = positions[s];
    std::copy_n(X + t * D, D, v.begin());
    std::copy(h.begin(), h.end(), v.begin() + static_cast<std::ptrdiff_t>(D));
    std::copy(h.begin(), h.end(), tr.h_prev.begin() + static_cast<std::ptrdiff_t>(s * H));
    double* gs = tr.gates.data() + s * G * H;
    if (cell.kind == CellKind::gru) {
      double* z = gs;
      double* r = gs + H;
      double* hc = gs + 2 * H;
      for (std::size_t q = 0; q < 2; ++q) {
        double* dst = gs + q * H;
        std::copy_n(cell.B[q], H, dst);
        vecmat_acc(v.data(), cell.W[q], D + H, H, dst);
        for (std::size_t j = 0; j < H; ++j) dst[j] = sigmoid_scalar(dst[j]);
      }
      for (std::size_t j = 0; j < H; ++j) v[D + j] = r[j] * h[j];
      std::copy_n(cell.B[2], H, hc);
      vecmat_acc(v.data(), cell.W[2], D + H, H, hc);
      for (std::size_t j = 0; j < H; ++j) {
        hc[j] = std::tanh(hc[j]);
        h[j] = (1.0 - z[j]) * h[j] + z[j] * hc[j];
      }
    } else {
      std::copy(c.begin(), c.end(), tr.c_prev.begin() + static_cast<std::ptrdiff_t>(s * H));
      for (std::size_t q = 0; q < 4; ++q) {
        double* dst = gs + q * H;
        std::copy_n(cell.B[q], H, dst);
        vecmat_acc(v.data(), cell.W[q], D + H, H, dst);
        for (std::size_t j = 0; j < H; ++j) dst[j] = q == 3 ? std::tanh(dst[j]) : sigmoid_scalar(dst[j]);
      }
      const double* i = gs;
      const double* f = gs + H;
      const double* o = gs + 2 * H;
      const double* g = gs + 3 * H;
      double* ct = tr.c_tanh.data() + s * H;
      for (std::size_t j = 0; j < H; ++j) {
        c[j] = f[j] * c[j] + i[j] * g[j];
        ct[j] = std::tanh(c[j]);
        h[j] = o[j] * ct[j];
      }
    }
    std::copy(h.begin(), h.end(), out + t * stride + offset);
  }
  tr.positions = std::move(positions);
  return tr;
}

// Backpropagation through time for one direction. gW/gB entries may be null.
inline void backprop_direction(const RecurrentView& cell, const DirectionTrace& tr, const double* X,
                               const double* dout, std::size_t stride, std::size_t offset, double* gX,
                               const std::vector<double*>& gW, const std::vector<double*>& gB) {
  const std::size_t D = cell.D, H = cell.H;
  const std::size_t G = cell.kind == CellKind::gru ? 3 : 4;
  std::vector<double> dh_next(H, 0.0), dc_next(H, 0.0), dh(H), dv(D + H), v(D + H);
  std::vector<std::vector<double>> da(G, std::vector<double>(H));
  for (std::size_t s = tr.positions.size(); s-- > 0;) {
    const std::size_t t = tr.positions[s];
    const double* hp = tr.h_prev.data() + s * H;
    const double* gs = tr.gates.data() + s * G * H;
    for (std::size_t j = 0; j < H; ++j) dh[j] = dout[t * stride + offset + j] + dh_next[j];
    std::copy_n(X + t * D, D, v.begin());
    std::fill(dv.begin(), dv.end(), 0.0);
    std::fill(dh_next.begin(), dh_next.end(), 0.0);

    if (cell.kind == CellKind::gru) {
      const double* z = gs;
      const double* r = gs + H;
      const double* hc = gs + 2 * H;
      // candidate path, input u = [x, r*h_prev]
      for (std::size_t j = 0; j < H; ++j) {
        da[2][j] = dh[j] * z[j] * (1.0 - hc[j] * hc[j]);
        da[0][j] = dh[j] * (hc[j] - hp[j]) * z[j] * (1.0 - z[j]);
        dh_next[j] = dh[j] * (1.0 - z[j]);
        v[D + j] = r[j] * hp[j];
      }
      if (gW[2]) outer_acc(v.data(), da[2].data(), D + H, H, gW[2]);
      if (gB[2]) for (std::size_t j = 0; j < H; ++j) gB[2][j] += da[2][j];
      std::vector<double> du(D + H, 0.0);
      matvec_acc(cell.W[2], da[2].data(), D + H, H, du.data());
      for (std::size_t j = 0; j < D; ++j) dv[j] += du[j];
      for (std::size_t j = 0; j < H; ++j) {
        const double d_rh = du[D + j];
        da[1][j] = d_rh * hp[j] * r[j] * (1.0 - r[j]);
        dh_next[j] += d_rh * r[j];
      }
      // update/reset gates, input v = [x, h_prev]
      for (std::size_t j = 0; j < H; ++j) v[D + j] = hp[j];
      for (std::size_t q = 0; q < 2; ++q) {
        if (gW[q]) outer_acc(v.data(), da[q].data(), D + H, H, gW[q]);
        if (gB[q]) for (std::size_t j = 0; j < H; ++j) gB[q][j] += da[q][j];
        matvec_acc(cell.W[q], da[q].data(), D + H, H, dv.data());
      }
    } else {
      const double* i = gs;
      const double* f = gs + H;
      const double* o = gs + 2 * H;
      const double* g = gs + 3 * H;
      const double* cp = tr.c_prev.data() + s * H;
      const double* ct = tr.c_tanh.data() + s * H;
      for (std::size_t j = 0; j < H; ++j) {
        const double dc = dc_next[j] + dh[j] * o[j] * (1.0 - ct[j] * ct[j]);
        da[0][j] = dc * g[j] * i[j] * (1.0 - i[j]);
        da[1][j] = dc * cp[j] * f[j] * (1.0 - f[j]);
        da[2][j] = dh[j] * ct[j] * o[j] * (1.0 - o[j]);
        da[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
        dc_next[j] = dc * f[j];
        v[D + j] = hp[j];
      }
      for (std::size_t q = 0; q < 4; ++q) {
        if (gW[q]) outer_acc(v.data(), da[q].data(), D + H, H, gW[q]);
        if (gB[q]) for (std::size_t j = 0; j < H; ++j) gB[q][j] += da[q][j];
        matvec_acc(cell.W[q], da[q].data(), D + H, H, dv.data());
      }
    }
    if (gX)
      for (std::size_t j = 0; j < D; ++j) gX[t * D + j] += dv[j];
    for (std::size_t j = 0; j < H; ++j) dh_next[j] += dv[D + j];
  }
}

}  // namespace detail

/// Runs forward_cell over positions 0..true_length-1 and backward_cell over
/// true_length-1..0, both from zero state, and returns [T x 2H] rows
/// [h_fwd; h_bwd]. Positions at or past true_length are zero. Backward is
/// hand-written BPTT over the saved activations.
inline Tensor bidirectional_run(const RecurrentCellParams& forward_cell,
                                const RecurrentCellParams& backward_cell, const Tensor& sequence,
                                std::size_t true_length) {
  forward_cell.validate();
  backward_cell.validate();
  if (forward_cell.kind != backward_cell.kind || forward_cell.input_dim != backward_cell.input_dim ||
      forward_cell.hidden_units != backward_cell.hidden_units) {
    throw ShapeError("bidirectional_run: forward and backward cells differ");
  }
  if (sequence.rank() != 2 || sequence.dim(1) != forward_cell.input_dim) {
    throw ShapeError("bidirectional_run: sequence " + shape_str(sequence.shape()) + " for input dim " +
                     std::to_string(forward_cell.input_dim));
  }
  const std::size_t T = sequence.dim(0), H = forward_cell.hidden_units;
  if (true_length > T) {
    throw LengthError("true length " + std::to_string(true_length) + " exceeds sequence length " +
                      std::to_string(T));
  }
  std::vector<std::size_t> fwd_pos(true_length), bwd_pos(true_length);
  for (std::size_t s = 0; s < true_length; ++s) {
    fwd_pos[s] = s;
    bwd_pos[s] = true_length - 1 - s;
  }
  const auto fview = detail::view_of(forward_cell);
  const auto bview = detail::view_of(backward_cell);
  const double* X = sequence.values().data();
  std::vector<double> out(T * 2 * H, 0.0);
  auto ftrace = detail::run_direction(fview, X, std::move(fwd_pos), out.data(), 2 * H, 0);
  auto btrace = detail::run_direction(bview, X, std::move(bwd_pos), out.data(), 2 * H, H);

  std::vector<Tensor> parents{sequence};
  for (const Tensor& t : forward_cell.tensors()) parents.push_back(t);
  for (const Tensor& t : backward_cell.tensors()) parents.push_back(t);
  const std::size_t G = RecurrentCellParams::gate_count(forward_cell.kind);
  return detail::make_result(
      {T, 2 * H}, std::move(out), parents,
      [ftrace = std::move(ftrace), btrace = std::move(btrace), G, H](detail::Node& self) {
        auto view_from = [&](std::size_t base) {
          detail::RecurrentView v{G == 3 ? CellKind::gru : CellKind::lstm,
                                  self.parents[0]->shape[1], H, {}, {}};
          std::vector<double*> gW, gB;
          for (std::size_t q = 0; q < G; ++q) {
            v.W.push_back(self.parents[base + 2 * q]->values.data());
            v.B.push_back(self.parents[base + 2 * q + 1]->values.data());
            gW.push_back(detail::parent_grad(self, base + 2 * q));
            gB.push_back(detail::parent_grad(self, base + 2 * q + 1));
          }
          return std::make_tuple(std::move(v), std::move(gW), std::move(gB));
        };
        const double* X = self.parents[0]->values.data();
        double* gX = detail::parent_grad(self, 0);
        auto [fv, fgW, fgB] = view_from(1);
        detail::backprop_direction(fv, ftrace, X, self.grad.data(), 2 * H, 0, gX, fgW, fgB);
        auto [bv, bgW, bgB] = view_from(1 + 2 * G);
        detail::backprop_direction(bv, btrace, X, self.grad.data(), 2 * H, H, gX, bgW, bgB);
      });
}

/// Single cell shared by both directions.
inline Tensor bidirectional_run(const RecurrentCellParams& cell, const Tensor& sequence,
                                std::size_t true_length) {
  return bidirectional_run(cell, cell, sequence, true_length);
}

}  // namespace jobpred
