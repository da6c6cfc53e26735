#include "gpg/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

namespace gpg {

namespace {

// Both evaluators funnel every sum through these two kernels so that the
// centralized and node-local paths perform bit-identical arithmetic.

// acc = sum over in-neighbors (ascending index) of weight * rows[m].
Eigen::RowVectorXd diffuse_row(const std::vector<int>& neighbors,
                               const std::vector<double>& weights,
                               const Mat& rows) {
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(rows.cols());
  for (std::size_t t = 0; t < neighbors.size(); ++t) {
    const double w = weights[t];
    const int m = neighbors[t];
    for (int j = 0; j < acc.size(); ++j) acc(j) += w * rows(m, j);
  }
  return acc;
}

// z += d * H with the inner product accumulated over ascending input index.
void transform_accumulate(Mat& z, int row, const Eigen::RowVectorXd& d,
                          const Mat& h) {
  for (int j = 0; j < h.cols(); ++j) {
    double s = 0.0;
    for (int i = 0; i < h.rows(); ++i) s += d(i) * h(i, j);
    z(row, j) += s;
  }
}

void check_forward_shapes(const Mat& x, const GraphShiftOperator& s,
                          const FilterTensor& h) {
  h.validate();
  if (s.S.rows() != s.S.cols())
    throw std::invalid_argument("gnn_forward: S must be square");
  if (x.rows() != s.S.rows())
    throw std::invalid_argument("gnn_forward: X rows must match S size");
  if (x.cols() != h.taps[0][0].rows())
    throw std::invalid_argument("gnn_forward: X width must match d_0");
  if (!x.allFinite())
    throw std::invalid_argument("gnn_forward: non-finite input");
}

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw std::runtime_error("filter container: truncated header");
  return v;
}

}  // namespace

std::vector<int> FilterTensor::widths() const {
  std::vector<int> w;
  if (taps.empty()) return w;
  w.push_back(static_cast<int>(taps[0][0].rows()));
  for (const auto& layer : taps)
    w.push_back(static_cast<int>(layer[0].cols()));
  return w;
}

bool FilterTensor::finite() const {
  for (const auto& layer : taps)
    for (const auto& m : layer)
      if (!m.allFinite()) return false;
  for (const auto& b : biases)
    if (!b.allFinite()) return false;
  return true;
}

void FilterTensor::validate() const {
  if (taps.empty()) throw std::invalid_argument("filter: no layers");
  if (biases.size() != taps.size())
    throw std::invalid_argument("filter: bias count must equal layer count");
  const int k = k_taps();
  if (k < 1) throw std::invalid_argument("filter: need at least one tap");
  for (std::size_t l = 0; l < taps.size(); ++l) {
    if (static_cast<int>(taps[l].size()) != k)
      throw std::invalid_argument("filter: ragged tap count");
    for (const auto& m : taps[l]) {
      if (m.rows() != taps[l][0].rows() || m.cols() != taps[l][0].cols())
        throw std::invalid_argument("filter: tap shapes differ within a layer");
    }
    if (l > 0 && taps[l][0].rows() != taps[l - 1][0].cols())
      throw std::invalid_argument("filter: layer width chain broken");
    if (biases[l].size() != taps[l][0].cols())
      throw std::invalid_argument("filter: bias width mismatch");
  }
  if (!finite()) throw std::invalid_argument("filter: non-finite entries");
}

int FilterTensor::parameter_count() const {
  int n = 0;
  for (const auto& layer : taps)
    for (const auto& m : layer) n += static_cast<int>(m.size());
  for (const auto& b : biases) n += static_cast<int>(b.size());
  return n;
}

Vec FilterTensor::to_flat() const {
  Vec theta(parameter_count());
  int at = 0;
  for (const auto& layer : taps)
    for (const auto& m : layer)
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) theta(at++) = m(i, j);
  for (const auto& b : biases)
    for (int i = 0; i < b.size(); ++i) theta(at++) = b(i);
  return theta;
}

FilterTensor FilterTensor::from_flat(const Vec& theta,
                                     const std::vector<int>& widths, int k) {
  FilterTensor h = zeros(widths, k);
  if (theta.size() != h.parameter_count())
    throw std::invalid_argument("filter: flat parameter size mismatch");
  int at = 0;
  for (auto& layer : h.taps)
    for (auto& m : layer)
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = theta(at++);
  for (auto& b : h.biases)
    for (int i = 0; i < b.size(); ++i) b(i) = theta(at++);
  return h;
}

FilterTensor FilterTensor::zeros(const std::vector<int>& widths, int k) {
  if (widths.size() < 2) throw std::invalid_argument("filter: need d_0 and d_L");
  FilterTensor h;
  const int layers = static_cast<int>(widths.size()) - 1;
  h.taps.resize(layers);
  h.biases.resize(layers);
  for (int l = 0; l < layers; ++l) {
    h.taps[l].assign(k, Mat::Zero(widths[l], widths[l + 1]));
    h.biases[l] = Vec::Zero(widths[l + 1]);
  }
  return h;
}

FilterTensor FilterTensor::random_init(const std::vector<int>& widths, int k,
                                       Rng& rng) {
  FilterTensor h = zeros(widths, k);
  for (int l = 0; l < h.layers(); ++l) {
    const double a = std::sqrt(1.0 / (k * widths[l]));
    for (auto& m : h.taps[l])
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-a, a);
  }
  return h;
}

Mat gnn_forward(const Mat& x, const GraphShiftOperator& s, const FilterTensor& h,
                ForwardTrace* trace) {
  check_forward_shapes(x, s, h);
  const int n = static_cast<int>(x.rows());
  const int layers = h.layers();
  const int k_taps = h.k_taps();

  if (trace) {
    trace->diffusion.assign(layers, {});
    trace->pre_activation.resize(layers);
    trace->post_activation.resize(layers);
  }

  Mat cur = x;
  for (int l = 0; l < layers; ++l) {
    const int d_out = static_cast<int>(h.taps[l][0].cols());
    Mat z(n, d_out);
    for (int r = 0; r < n; ++r) z.row(r) = h.biases[l].transpose();

    Mat diffused = cur;
    for (int k = 0; k < k_taps; ++k) {
      if (k > 0) {
        Mat next(n, diffused.cols());
        for (int r = 0; r < n; ++r)
          next.row(r) = diffuse_row(s.in_neighbors[r], s.edge_weights[r], diffused);
        diffused = std::move(next);
      }
      if (trace) trace->diffusion[l].push_back(diffused);
      for (int r = 0; r < n; ++r) {
        Eigen::RowVectorXd row = diffused.row(r);
        transform_accumulate(z, r, row, h.taps[l][k]);
      }
    }

    Mat post = (l + 1 == layers) ? z : z.array().tanh().matrix();
    if (trace) {
      trace->pre_activation[l] = z;
      trace->post_activation[l] = post;
    }
    cur = std::move(post);
  }
  return cur;
}

Eigen::RowVectorXd local_tap_update(
    int node, int width, const GraphShiftOperator& s,
    const std::vector<std::pair<int, Eigen::RowVectorXd>>& inbox) {
  const auto& neighbors = s.in_neighbors[node];
  const auto& weights = s.edge_weights[node];
  Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(width);
  for (std::size_t t = 0; t < neighbors.size(); ++t) {
    const int want = neighbors[t];
    const Eigen::RowVectorXd* row = nullptr;
    for (const auto& [id, r] : inbox)
      if (id == want) {
        row = &r;
        break;
      }
    if (!row)
      throw std::runtime_error(
          "local_tap_update: missing message from declared neighbor " +
          std::to_string(want));
    const double w = weights[t];
    for (int j = 0; j < width; ++j) acc(j) += w * (*row)(j);
  }
  return acc;
}

LocalForwardResult gnn_forward_local(const Mat& x, const GraphShiftOperator& s,
                                     const FilterTensor& h) {
  check_forward_shapes(x, s, h);
  const int n = static_cast<int>(x.rows());
  const int layers = h.layers();
  const int k_taps = h.k_taps();

  LocalForwardResult res;
  res.rows_received.assign(n, 0);

  // held.row(r) is the signal node r holds; each tap round delivers one row
  // per in-edge of S into the node's inbox.
  Mat cur = x;
  for (int l = 0; l < layers; ++l) {
    const int d_out = static_cast<int>(h.taps[l][0].cols());
    const int d_in = static_cast<int>(h.taps[l][0].rows());
    Mat z(n, d_out);
    for (int r = 0; r < n; ++r) z.row(r) = h.biases[l].transpose();

    Mat held = cur;
    for (int k = 0; k < k_taps; ++k) {
      if (k > 0) {
        Mat next(n, held.cols());
        for (int r = 0; r < n; ++r) {
          std::vector<std::pair<int, Eigen::RowVectorXd>> inbox;
          inbox.reserve(s.in_neighbors[r].size());
          for (int m : s.in_neighbors[r]) inbox.emplace_back(m, held.row(m));
          res.rows_received[r] += static_cast<int>(inbox.size());
          next.row(r) = local_tap_update(r, d_in, s, inbox);
        }
        held = std::move(next);
      }
      for (int r = 0; r < n; ++r) {
        Eigen::RowVectorXd row = held.row(r);
        transform_accumulate(z, r, row, h.taps[l][k]);
      }
    }
    cur = (l + 1 == layers) ? z : z.array().tanh().matrix();
  }
  res.output = std::move(cur);
  return res;
}

GnnGradients gnn_backward(const ForwardTrace& trace, const GraphShiftOperator& s,
                          const FilterTensor& h, const Mat& upstream) {
  const int layers = h.layers();
  const int k_taps = h.k_taps();
  if (static_cast<int>(trace.diffusion.size()) != layers ||
      static_cast<int>(trace.pre_activation.size()) != layers)
    throw std::invalid_argument("gnn_backward: trace does not match filter");
  if (upstream.rows() != trace.pre_activation.back().rows() ||
      upstream.cols() != trace.pre_activation.back().cols())
    throw std::invalid_argument("gnn_backward: upstream shape mismatch");

  GnnGradients g;
  g.filter = FilterTensor::zeros(h.widths(), k_taps);

  Mat delta = upstream;  // dLoss/dZ_l, starting at the linear head
  for (int l = layers - 1; l >= 0; --l) {
    if (static_cast<int>(trace.diffusion[l].size()) != k_taps ||
        trace.diffusion[l][0].cols() != h.taps[l][0].rows())
      throw std::invalid_argument("gnn_backward: trace does not match filter");
    g.filter.biases[l] = delta.colwise().sum().transpose();
    for (int k = 0; k < k_taps; ++k)
      g.filter.taps[l][k] = trace.diffusion[l][k].transpose() * delta;

    // dLoss/d(layer input) = sum_k (S^T)^k delta H_lk^T, Horner form.
    Mat grad_in = delta * h.taps[l][k_taps - 1].transpose();
    for (int k = k_taps - 2; k >= 0; --k)
      grad_in = delta * h.taps[l][k].transpose() + s.shift().transpose() * grad_in;

    if (l == 0) {
      g.input = std::move(grad_in);
    } else {
      const Mat& post = trace.post_activation[l - 1];
      delta = grad_in.cwiseProduct(Mat::Ones(post.rows(), post.cols()) -
                                   post.cwiseProduct(post));
    }
  }
  return g;
}

void save_filter(const FilterTensor& h, std::ostream& out) {
  h.validate();
  out.write("GPGF", 4);
  write_u32(out, 1);  // format version
  write_u32(out, static_cast<std::uint32_t>(h.layers()));
  write_u32(out, static_cast<std::uint32_t>(h.k_taps()));
  for (int w : h.widths()) write_u32(out, static_cast<std::uint32_t>(w));
  for (const auto& layer : h.taps)
    for (const auto& m : layer)
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) {
          double v = m(i, j);
          out.write(reinterpret_cast<const char*>(&v), sizeof v);
        }
  for (const auto& b : h.biases)
    for (int i = 0; i < b.size(); ++i) {
      double v = b(i);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
}

FilterTensor load_filter(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "GPGF", 4) != 0)
    throw std::runtime_error("filter container: bad magic");
  const std::uint32_t version = read_u32(in);
  if (version != 1)
    throw std::runtime_error("filter container: unsupported version " +
                             std::to_string(version));
  const std::uint32_t layers = read_u32(in);
  const std::uint32_t k_taps = read_u32(in);
  if (layers < 1 || layers > 64 || k_taps < 1 || k_taps > 64)
    throw std::runtime_error("filter container: implausible layer/tap count");
  std::vector<int> widths(layers + 1);
  for (auto& w : widths) {
    w = static_cast<int>(read_u32(in));
    if (w < 1 || w > 65536)
      throw std::runtime_error("filter container: implausible width");
  }
  FilterTensor h = FilterTensor::zeros(widths, static_cast<int>(k_taps));
  auto read_f64 = [&in]() {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw std::runtime_error("filter container: truncated payload");
    return v;
  };
  for (auto& layer : h.taps)
    for (auto& m : layer)
      for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = read_f64();
  for (auto& b : h.biases)
    for (int i = 0; i < b.size(); ++i) b(i) = read_f64();
  h.validate();
  return h;
}

}  // namespace gpg
