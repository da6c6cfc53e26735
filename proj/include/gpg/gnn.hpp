#pragma once

#include "gpg/core.hpp"
#include "gpg/env.hpp"

#include <iosfwd>

namespace gpg {

/// All trainable GNN weights: per layer l and tap k a d_{l-1} x d_l
/// coefficient matrix, plus a per-layer bias vector. Layer widths chain
/// d_0 -> d_1 -> ... -> d_L.
struct FilterTensor {
  std::vector<std::vector<Mat>> taps;  // [layer][tap], d_{l-1} x d_l
  std::vector<Vec> biases;             // [layer], length d_l

  int layers() const { return static_cast<int>(taps.size()); }
  int k_taps() const { return taps.empty() ? 0 : static_cast<int>(taps[0].size()); }
  std::vector<int> widths() const;
  bool finite() const;
  void validate() const;  // shape chain + finiteness

  int parameter_count() const;
  Vec to_flat() const;
  static FilterTensor from_flat(const Vec& theta, const std::vector<int>& widths, int k);

  static FilterTensor zeros(const std::vector<int>& widths, int k);
  /// i.i.d. uniform in [-a, a] with a = sqrt(1 / (K * d_{l-1})); biases zero.
  static FilterTensor random_init(const std::vector<int>& widths, int k, Rng& rng);
};

/// Intermediate values of one forward pass, kept for the backward pass.
/// diffusion[l][k] holds S^k applied to layer l's input; the input itself is
/// diffusion[l][0].
struct ForwardTrace {
  std::vector<std::vector<Mat>> diffusion;
  std::vector<Mat> pre_activation;   // Z_l
  std::vector<Mat> post_activation;  // tanh(Z_l), or Z_L itself for the head
};

/// Z_l = sum_k S^k X_{l-1} H_lk + 1 b_l^T, X_l = tanh(Z_l) for l < L, linear
/// head. Summation order is fixed: bias first, then taps in ascending k, with
/// neighbor sums in ascending node index.
Mat gnn_forward(const Mat& x, const GraphShiftOperator& s, const FilterTensor& h,
                ForwardTrace* trace = nullptr);

struct LocalForwardResult {
  Mat output;                      // rows computed by per-node message passing
  std::vector<int> rows_received;  // per node, summed over layers and taps
};

/// Evaluates every node using only rows received from its in-neighbors,
/// exchanging (K-1) rounds of messages per layer. Bit-identical to
/// gnn_forward under the shared summation order.
LocalForwardResult gnn_forward_local(const Mat& x, const GraphShiftOperator& s,
                                     const FilterTensor& h);

/// One node's tap update from an explicit inbox (node id -> row). Throws
/// std::runtime_error if a declared in-neighbor's row is missing.
Eigen::RowVectorXd local_tap_update(
    int node, int width, const GraphShiftOperator& s,
    const std::vector<std::pair<int, Eigen::RowVectorXd>>& inbox);

struct GnnGradients {
  FilterTensor filter;  // gradients w.r.t. taps and biases
  Mat input;            // gradient w.r.t. X
};

/// Reverse-mode gradients of a scalar loss with upstream dLoss/dA. S is
/// treated as a constant.
GnnGradients gnn_backward(const ForwardTrace& trace, const GraphShiftOperator& s,
                          const FilterTensor& h, const Mat& upstream);

/// Binary container: magic "GPGF", u32 version, u32 L, u32 K, u32 widths
/// [L+1], then row-major f64 tap matrices in (l, k) order, then biases.
void save_filter(const FilterTensor& h, std::ostream& out);
FilterTensor load_filter(std::istream& in);

}  // namespace gpg
