#pragma once

// Fixed-architecture actor-critic:
//
//   heightmap 21x21 -> conv3x3(8) -> ELU -> maxpool2 -> conv3x3(16) -> ELU
//     -> maxpool2 -> flatten(400) -> dense(128) -> ELU = latent
//   trunk input = [proprio(49), latent(128)]
//   actor:  177 -> 128 -> 128 -> 64 -> 12 (action mean), plus state-free log_std
//   critic: 177 -> 128 -> 128 -> 64 -> 1
//
// The encoder is shared; each head owns its MLP. Activations are stored
// channels-last (rows = sample * spatial position, cols = channels), so every
// layer reduces to a dense matrix product. Gradients are hand-derived for
// exactly this graph.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "env.hpp"
#include "rng.hpp"

namespace stairclimb {

inline constexpr int kActionDim = kNumJoints;
inline constexpr int kLatentDim = 128;
inline constexpr int kTrunkDim = kProprioDim + kLatentDim;  // 177
inline constexpr int kConv1Channels = 8;
inline constexpr int kConv2Channels = 16;
inline constexpr int kPool1Side = kHeightmapSide / 2;  // 10
inline constexpr int kPool2Side = kPool1Side / 2;      // 5
inline constexpr int kFlatDim = kPool2Side * kPool2Side * kConv2Channels;  // 400
inline constexpr std::array<int, 3> kHiddenSizes = {128, 128, 64};

struct ParamBlock {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

/// Named parameter blocks in storage order. Conv weights are
/// [out, kernel_y, kernel_x, in]; dense weights are [out, in].
inline const std::vector<ParamBlock>& parameter_layout() {
  static const std::vector<ParamBlock> layout = [] {
    std::vector<ParamBlock> blocks;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<int> shape) {
      std::size_t n = 1;
      for (int d : shape) n *= static_cast<std::size_t>(d);
      blocks.push_back({std::move(name), std::move(shape), offset, n});
      offset += n;
    };
    add("conv1.weight", {kConv1Channels, 3, 3, 1});
    add("conv1.bias", {kConv1Channels});
    add("conv2.weight", {kConv2Channels, 3, 3, kConv1Channels});
    add("conv2.bias", {kConv2Channels});
    add("encoder.weight", {kLatentDim, kFlatDim});
    add("encoder.bias", {kLatentDim});
    for (const char* head : {"actor", "critic"}) {
      const int out_dim = std::string(head) == "actor" ? kActionDim : 1;
      int in = kTrunkDim;
      for (int i = 0; i < 4; ++i) {
        const int out = i < 3 ? kHiddenSizes[i] : out_dim;
        add(std::string(head) + "." + std::to_string(i) + ".weight", {out, in});
        add(std::string(head) + "." + std::to_string(i) + ".bias", {out});
        in = out;
      }
      if (std::string(head) == "actor") add("actor.log_std", {kActionDim});
    }
    return blocks;
  }();
  return layout;
}

inline const ParamBlock& find_block(const std::string& name) {
  for (const auto& b : parameter_layout()) {
    if (b.name == name) return b;
  }
  throw std::out_of_range("no parameter block " + name);
}

inline constexpr std::size_t kParamCount = 148537;

inline std::size_t parameter_count() {
  const auto& l = parameter_layout();
  return l.back().offset + l.back().size;
}

template <typename S>
struct NetOutput {
  std::array<S, kActionDim> action_mean{};
  std::array<S, kActionDim> action_std{};
  S value = 0;
};

/// Everything the reverse pass needs from one batched forward pass.
template <typename S>
struct ForwardTrace {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using IdxMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  int batch = 0;
  bool valid = false;
  Mat cols1, act1, pool1;  // conv1 im2col, post-ELU, pooled
  IdxMat arg1;
  Mat cols2, act2, pool2;
  IdxMat arg2;
  Mat latent;  // post-ELU encoder output
  Mat trunk;   // [proprio, latent]
  std::array<Mat, 3> actor_hidden, critic_hidden;
  Mat mean;   // batch x 12
  Mat value;  // batch x 1
};

template <typename S>
class ActorCritic {
 public:
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MapMat = Eigen::Map<Mat>;
  using ConstMapMat = Eigen::Map<const Mat>;
  using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;
  using ConstMapRow = Eigen::Map<const RowVec>;
  using MapRow = Eigen::Map<RowVec>;

  ActorCritic() : params_(parameter_count(), S(0)) {}

  explicit ActorCritic(std::uint64_t seed) : ActorCritic() { initialize(seed); }

  /// Uniform fan-in init for convolutions, scaled orthogonal init for dense
  /// layers (gain sqrt(2) hidden, 0.01 actor output, 1 critic output),
  /// zero biases, log_std = ln(0.5).
  void initialize(std::uint64_t seed) {
    std::fill(params_.begin(), params_.end(), S(0));
    std::uint64_t stream = 0;
    for (const auto& b : parameter_layout()) {
      Rng rng = make_stream(seed, 0x1A17ULL, stream++);
      auto dst = std::span<S>(params_).subspan(b.offset, b.size);
      if (b.name.ends_with(".bias")) continue;
      if (b.name == "actor.log_std") {
        std::fill(dst.begin(), dst.end(), static_cast<S>(std::log(0.5)));
      } else if (b.name.starts_with("conv")) {
        const int fan_in = b.shape[1] * b.shape[2] * b.shape[3];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (auto& w : dst) w = static_cast<S>(uniform(rng, -bound, bound));
      } else {
        double gain = std::numbers::sqrt2;
        if (b.name == "actor.3.weight") gain = 0.01;
        if (b.name == "critic.3.weight") gain = 1.0;
        orthogonal_fill(dst, b.shape[0], b.shape[1], gain, rng);
      }
    }
  }

  std::span<S> params() { return params_; }
  std::span<const S> params() const { return params_; }

  std::span<S> block(const std::string& name) {
    const auto& b = find_block(name);
    return std::span<S>(params_).subspan(b.offset, b.size);
  }
  std::span<const S> block(const std::string& name) const {
    const auto& b = find_block(name);
    return std::span<const S>(params_).subspan(b.offset, b.size);
  }

  std::array<S, kActionDim> action_std() const {
    std::array<S, kActionDim> out;
    const auto ls = block("actor.log_std");
    for (int j = 0; j < kActionDim; ++j) out[j] = std::exp(ls[j]);
    return out;
  }

  /// Terrain encoder alone: heightmaps is batch x 441.
  Mat encode(const Mat& heightmaps) const {
    if (heightmaps.cols() != kHeightmapCells) throw std::invalid_argument("encode expects 441 columns");
    if (!heightmaps.allFinite()) throw std::invalid_argument("non-finite heightmap input");
    ForwardTrace<S> trace;
    encode_into(heightmaps, trace);
    return trace.latent;
  }

  /// Batched forward pass; obs is batch x 490 in the observation layout.
  void forward(const Mat& obs, ForwardTrace<S>& t) const {
    if (obs.cols() != kObsDim) {
      throw std::invalid_argument("forward expects " + std::to_string(kObsDim) +
                                  " observation columns, got " + std::to_string(obs.cols()));
    }
    const int B = static_cast<int>(obs.rows());
    t.valid = false;
    t.batch = B;
    encode_into(obs.rightCols(kHeightmapCells), t);
    t.trunk.resize(B, kTrunkDim);
    t.trunk.leftCols(kProprioDim) = obs.leftCols(kProprioDim);
    t.trunk.rightCols(kLatentDim) = t.latent;
    mlp_forward("actor", t.trunk, t.actor_hidden, t.mean);
    mlp_forward("critic", t.trunk, t.critic_hidden, t.value);
    t.valid = true;
  }

  NetOutput<S> forward(std::span<const float> obs) const {
    if (obs.size() != static_cast<std::size_t>(kObsDim)) {
      throw std::invalid_argument("observation must have " + std::to_string(kObsDim) +
                                  " entries, got " + std::to_string(obs.size()));
    }
    Mat x(1, kObsDim);
    for (int i = 0; i < kObsDim; ++i) {
      if (!std::isfinite(obs[i])) {
        throw std::invalid_argument("non-finite observation entry " + std::to_string(i));
      }
      x(0, i) = static_cast<S>(obs[i]);
    }
    ForwardTrace<S> t;
    forward(x, t);
    NetOutput<S> out;
    out.action_std = action_std();
    for (int j = 0; j < kActionDim; ++j) out.action_mean[j] = t.mean(0, j);
    out.value = t.value(0, 0);
    return out;
  }

  /// Accumulates dLoss/dparams into `grad` given upstream gradients w.r.t. the
  /// action means (batch x 12) and values (batch x 1). The log_std gradient is
  /// not touched here; it does not depend on the forward graph.
  void backward(const ForwardTrace<S>& t, const Mat& d_mean, const Mat& d_value,
                std::span<S> grad) const {
    if (!t.valid) throw std::logic_error("backward called without a recorded forward pass");
    if (grad.size() != params_.size()) throw std::invalid_argument("gradient buffer size mismatch");
    if (d_mean.rows() != t.batch || d_mean.cols() != kActionDim || d_value.rows() != t.batch ||
        d_value.cols() != 1) {
      throw std::invalid_argument("upstream gradient shape mismatch");
    }
    Mat d_trunk = mlp_backward("actor", t.trunk, t.actor_hidden, d_mean, grad);
    d_trunk += mlp_backward("critic", t.trunk, t.critic_hidden, d_value, grad);
    encoder_backward(t, d_trunk.rightCols(kLatentDim), grad);
  }

 private:
  ConstMapMat weight(const std::string& name) const {
    const auto& b = find_block(name);
    return ConstMapMat(params_.data() + b.offset, b.shape[0],
                       static_cast<Eigen::Index>(b.size / b.shape[0]));
  }
  ConstMapRow bias(const std::string& name) const {
    const auto& b = find_block(name);
    return ConstMapRow(params_.data() + b.offset, static_cast<Eigen::Index>(b.size));
  }
  static MapMat grad_weight(std::span<S> grad, const std::string& name) {
    const auto& b = find_block(name);
    return MapMat(grad.data() + b.offset, b.shape[0], static_cast<Eigen::Index>(b.size / b.shape[0]));
  }
  static MapRow grad_bias(std::span<S> grad, const std::string& name) {
    const auto& b = find_block(name);
    return MapRow(grad.data() + b.offset, static_cast<Eigen::Index>(b.size));
  }

  // Row-by-row so each column is summed in a fixed order; Eigen's colwise
  // reduction picks its vector peeling from the heap address.
  static void add_column_sums(std::span<S> grad, const std::string& name, const Mat& m) {
    auto dst = grad_bias(grad, name);
    for (Eigen::Index r = 0; r < m.rows(); ++r) dst += m.row(r);
  }

  // ELU(z) = max(z, 0) + (exp(min(z, 0)) - 1), branch-free so it vectorizes.
  static void elu_inplace(Mat& z) {
    z = z.array().max(S(0)) + (z.array().min(S(0)).exp() - S(1));
  }
  // d/dz ELU expressed through the activation y: 1 for y > 0, y + 1 otherwise.
  static void elu_backward_inplace(Mat& dy, const Mat& y) {
    dy.array() *= y.array().min(S(0)) + S(1);
  }

  // 3x3, pad 1, stride 1 patch extraction. `in` rows are (sample, y, x), cols
  // channels. Output cols are ordered (ky, kx, channel).
  static void im2col(const Mat& in, int batch, int side, int channels, Mat& cols) {
    const Eigen::Index width = 9 * channels;
    cols.resize(static_cast<Eigen::Index>(batch) * side * side, width);
    const S* src_base = in.data();
    S* dst_base = cols.data();
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          S* dst = dst_base + ((static_cast<Eigen::Index>(b) * side + y) * side + x) * width;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = x + kx - 1;
              S* d = dst + (ky * 3 + kx) * channels;
              if (sy < 0 || sy >= side || sx < 0 || sx >= side) {
                std::fill(d, d + channels, S(0));
                continue;
              }
              const S* src = src_base + ((static_cast<Eigen::Index>(b) * side + sy) * side + sx) * channels;
              std::copy(src, src + channels, d);
            }
          }
        }
      }
    }
  }

  static void col2im_add(const Mat& dcols, int batch, int side, int channels, Mat& din) {
    const Eigen::Index width = 9 * channels;
    din.setZero(static_cast<Eigen::Index>(batch) * side * side, channels);
    const S* src_base = dcols.data();
    S* dst_base = din.data();
    for (int b = 0; b < batch; ++b) {
      for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
          const S* src = src_base + ((static_cast<Eigen::Index>(b) * side + y) * side + x) * width;
          for (int ky = 0; ky < 3; ++ky) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= side) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = x + kx - 1;
              if (sx < 0 || sx >= side) continue;
              S* dst = dst_base + ((static_cast<Eigen::Index>(b) * side + sy) * side + sx) * channels;
              const S* s = src + (ky * 3 + kx) * channels;
              for (int c = 0; c < channels; ++c) dst[c] += s[c];
            }
          }
        }
      }
    }
  }

  // 2x2 max pooling with floor semantics; arg holds the source row per output.
  static void maxpool(const Mat& in, int batch, int side, Mat& out,
                      typename ForwardTrace<S>::IdxMat& arg) {
    const int os = side / 2;
    const int channels = static_cast<int>(in.cols());
    out.resize(static_cast<Eigen::Index>(batch) * os * os, channels);
    arg.resize(out.rows(), channels);
    const S* src = in.data();
    for (int b = 0; b < batch; ++b) {
      for (int oy = 0; oy < os; ++oy) {
        for (int ox = 0; ox < os; ++ox) {
          const Eigen::Index orow = (static_cast<Eigen::Index>(b) * os + oy) * os + ox;
          S* ov = out.data() + orow * channels;
          int* oa = arg.data() + orow * channels;
          const int r0 = (b * side + 2 * oy) * side + 2 * ox;
          const int rows[4] = {r0, r0 + 1, r0 + side, r0 + side + 1};
          for (int c = 0; c < channels; ++c) {
            int best = rows[0];
            S best_v = src[static_cast<Eigen::Index>(best) * channels + c];
            for (int k = 1; k < 4; ++k) {
              const S v = src[static_cast<Eigen::Index>(rows[k]) * channels + c];
              if (v > best_v) {
                best_v = v;
                best = rows[k];
              }
            }
            ov[c] = best_v;
            oa[c] = best;
          }
        }
      }
    }
  }

  template <typename Derived>
  void encode_into(const Eigen::MatrixBase<Derived>& heightmaps, ForwardTrace<S>& t) const {
    const int B = static_cast<int>(heightmaps.rows());
    // Single-channel input: a batch x 441 row-major block is already (sample, y, x) x 1.
    Mat input(static_cast<Eigen::Index>(B) * kHeightmapCells, 1);
    for (int b = 0; b < B; ++b) {
      input.middleRows(static_cast<Eigen::Index>(b) * kHeightmapCells, kHeightmapCells) =
          heightmaps.row(b).transpose();
    }
    im2col(input, B, kHeightmapSide, 1, t.cols1);
    t.act1.noalias() = t.cols1 * weight("conv1.weight").transpose();
    t.act1.rowwise() += bias("conv1.bias");
    elu_inplace(t.act1);
    maxpool(t.act1, B, kHeightmapSide, t.pool1, t.arg1);

    im2col(t.pool1, B, kPool1Side, kConv1Channels, t.cols2);
    t.act2.noalias() = t.cols2 * weight("conv2.weight").transpose();
    t.act2.rowwise() += bias("conv2.bias");
    elu_inplace(t.act2);
    maxpool(t.act2, B, kPool1Side, t.pool2, t.arg2);

    // (B*25) x 16 row-major is bit-identical to B x 400 row-major.
    ConstMapMat flat(t.pool2.data(), B, kFlatDim);
    t.latent.noalias() = flat * weight("encoder.weight").transpose();
    t.latent.rowwise() += bias("encoder.bias");
    elu_inplace(t.latent);
  }

  void mlp_forward(const std::string& head, const Mat& in, std::array<Mat, 3>& hidden,
                   Mat& out) const {
    const Mat* x = &in;
    for (int i = 0; i < 3; ++i) {
      const std::string p = head + "." + std::to_string(i);
      hidden[i].noalias() = *x * weight(p + ".weight").transpose();
      hidden[i].rowwise() += bias(p + ".bias");
      elu_inplace(hidden[i]);
      x = &hidden[i];
    }
    out.noalias() = *x * weight(head + ".3.weight").transpose();
    out.rowwise() += bias(head + ".3.bias");
  }

  Mat mlp_backward(const std::string& head, const Mat& in, const std::array<Mat, 3>& hidden,
                   const Mat& d_out, std::span<S> grad) const {
    Mat dy = d_out;
    for (int i = 3; i >= 0; --i) {
      const std::string p = head + "." + std::to_string(i);
      const Mat& x = i == 0 ? in : hidden[i - 1];
      grad_weight(grad, p + ".weight").noalias() += dy.transpose() * x;
      add_column_sums(grad, p + ".bias", dy);
      Mat dx = dy * weight(p + ".weight");
      if (i > 0) elu_backward_inplace(dx, hidden[i - 1]);
      dy = std::move(dx);
    }
    return dy;
  }

  template <typename Derived>
  void encoder_backward(const ForwardTrace<S>& t, const Eigen::MatrixBase<Derived>& d_latent_in,
                        std::span<S> grad) const {
    const int B = t.batch;
    Mat d_latent = d_latent_in;
    elu_backward_inplace(d_latent, t.latent);
    ConstMapMat flat(t.pool2.data(), B, kFlatDim);
    grad_weight(grad, "encoder.weight").noalias() += d_latent.transpose() * flat;
    add_column_sums(grad, "encoder.bias", d_latent);
    Mat d_flat = d_latent * weight("encoder.weight");
    ConstMapMat d_pool2(d_flat.data(), static_cast<Eigen::Index>(B) * kPool2Side * kPool2Side,
                        kConv2Channels);

    Mat d_act2 = Mat::Zero(t.act2.rows(), t.act2.cols());
    for (Eigen::Index r = 0; r < d_pool2.rows(); ++r) {
      for (Eigen::Index c = 0; c < d_pool2.cols(); ++c) d_act2(t.arg2(r, c), c) += d_pool2(r, c);
    }
    elu_backward_inplace(d_act2, t.act2);
    grad_weight(grad, "conv2.weight").noalias() += d_act2.transpose() * t.cols2;
    add_column_sums(grad, "conv2.bias", d_act2);
    const Mat d_cols2 = d_act2 * weight("conv2.weight");
    Mat d_pool1;
    col2im_add(d_cols2, B, kPool1Side, kConv1Channels, d_pool1);

    Mat d_act1 = Mat::Zero(t.act1.rows(), t.act1.cols());
    for (Eigen::Index r = 0; r < d_pool1.rows(); ++r) {
      for (Eigen::Index c = 0; c < d_pool1.cols(); ++c) d_act1(t.arg1(r, c), c) += d_pool1(r, c);
    }
    elu_backward_inplace(d_act1, t.act1);
    grad_weight(grad, "conv1.weight").noalias() += d_act1.transpose() * t.cols1;
    add_column_sums(grad, "conv1.bias", d_act1);
  }

  static void orthogonal_fill(std::span<S> dst, int rows, int cols, double gain, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int big = std::max(rows, cols), small = std::min(rows, cols);
    Eigen::MatrixXd a(big, small);
    for (int i = 0; i < big; ++i) {
      for (int j = 0; j < small; ++j) a(i, j) = normal(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
    const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(small, small);
    for (int j = 0; j < small; ++j) {
      if (r(j, j) < 0) q.col(j) *= -1.0;
    }
    if (rows < cols) q.transposeInPlace();
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < cols; ++j) {
        dst[static_cast<std::size_t>(i) * cols + j] = static_cast<S>(gain * q(i, j));
      }
    }
  }

  std::vector<S> params_;
};

// Diagonal Gaussian policy head.

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

template <typename S>
struct GaussianStats {
  S log_prob = 0;
  S entropy = 0;
};

template <typename S>
GaussianStats<S> log_prob_and_entropy(std::span<const S> mean, std::span<const S> std_dev,
                                      std::span<const S> action) {
  if (mean.size() != std_dev.size() || mean.size() != action.size()) {
    throw std::invalid_argument("gaussian argument size mismatch");
  }
  GaussianStats<S> g;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    if (!(std_dev[j] > S(0))) throw std::invalid_argument("standard deviation must be > 0");
    const S z = (action[j] - mean[j]) / std_dev[j];
    const S log_s = std::log(std_dev[j]);
    g.log_prob += S(-0.5) * z * z - log_s - static_cast<S>(kHalfLog2Pi);
    g.entropy += static_cast<S>(0.5 + kHalfLog2Pi) + log_s;
  }
  return g;
}

}  // namespace stairclimb
