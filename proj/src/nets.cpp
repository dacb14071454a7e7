#include "dcada/nets.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dcada::nets {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void check_rows(const Mat& x, int expected, const char* what) {
  if (x.rows() != expected)
    throw std::invalid_argument(std::string(what) + ": expected input dimension " +
                                std::to_string(expected) + ", got " + std::to_string(x.rows()));
}

void write_dense(const Dense& d, Vec& flat, Eigen::Index& off) {
  RowMap(flat.data() + off, d.out(), d.in()) = d.weight;
  off += d.weight.size();
  flat.segment(off, d.bias.size()) = d.bias;
  off += d.bias.size();
}

Dense read_dense(const Vec& flat, Eigen::Index& off, int in, int out) {
  Dense d;
  d.weight = ConstRowMap(flat.data() + off, out, in);
  off += static_cast<Eigen::Index>(in) * out;
  d.bias = flat.segment(off, out);
  off += out;
  return d;
}

Dense init_dense(int in, int out, Rng& rng, double gain) {
  Dense d = Dense::zeros(in, out);
  const double bound = gain / std::sqrt(static_cast<double>(in));
  for (Eigen::Index r = 0; r < d.weight.rows(); ++r)
    for (Eigen::Index c = 0; c < d.weight.cols(); ++c) d.weight(r, c) = rng.uniform(-bound, bound);
  return d;
}

void dense_grads(const Mat& d_out, const Mat& input, Dense& g) {
  g.weight = d_out * input.transpose();
  g.bias = d_out.rowwise().sum();
}

Mat tanh_of(const Mat& x) { return x.array().tanh().matrix(); }

}  // namespace

Dense Dense::zeros(int in, int out) { return Dense{Mat::Zero(out, in), Vec::Zero(out)}; }

Mat Dense::forward(const Mat& x) const { return (weight * x).colwise() + bias; }

PolicyParams PolicyParams::zeros(int input_dim, int hidden) {
  return {Dense::zeros(input_dim, hidden), Dense::zeros(hidden, hidden),
          Dense::zeros(hidden, kActionDim), Dense::zeros(hidden, kActionDim)};
}

std::size_t PolicyParams::size() const {
  return hidden1.size() + hidden2.size() + mean_head.size() + logstd_head.size();
}

ValueParams ValueParams::zeros(int input_dim, int hidden) {
  return {Dense::zeros(input_dim, hidden), Dense::zeros(hidden, hidden), Dense::zeros(hidden, 1)};
}

std::size_t ValueParams::size() const { return hidden1.size() + hidden2.size() + head.size(); }

Vec pack(const PolicyParams& p) {
  Vec flat(static_cast<Eigen::Index>(p.size()));
  Eigen::Index off = 0;
  for (const Dense* d : {&p.hidden1, &p.hidden2, &p.mean_head, &p.logstd_head}) write_dense(*d, flat, off);
  return flat;
}

Vec pack(const ValueParams& p) {
  Vec flat(static_cast<Eigen::Index>(p.size()));
  Eigen::Index off = 0;
  for (const Dense* d : {&p.hidden1, &p.hidden2, &p.head}) write_dense(*d, flat, off);
  return flat;
}

PolicyParams unpack_policy(const Vec& flat, int input_dim, int hidden) {
  const auto expected = PolicyParams::zeros(input_dim, hidden).size();
  if (static_cast<std::size_t>(flat.size()) != expected)
    throw std::invalid_argument("policy flat vector has wrong length");
  Eigen::Index off = 0;
  PolicyParams p;
  p.hidden1 = read_dense(flat, off, input_dim, hidden);
  p.hidden2 = read_dense(flat, off, hidden, hidden);
  p.mean_head = read_dense(flat, off, hidden, kActionDim);
  p.logstd_head = read_dense(flat, off, hidden, kActionDim);
  return p;
}

ValueParams unpack_value(const Vec& flat, int input_dim, int hidden) {
  const auto expected = ValueParams::zeros(input_dim, hidden).size();
  if (static_cast<std::size_t>(flat.size()) != expected)
    throw std::invalid_argument("value flat vector has wrong length");
  Eigen::Index off = 0;
  ValueParams p;
  p.hidden1 = read_dense(flat, off, input_dim, hidden);
  p.hidden2 = read_dense(flat, off, hidden, hidden);
  p.head = read_dense(flat, off, hidden, 1);
  return p;
}

PolicyParams init_policy(int input_dim, Rng& rng, int hidden) {
  PolicyParams p;
  p.hidden1 = init_dense(input_dim, hidden, rng, 1.0);
  p.hidden2 = init_dense(hidden, hidden, rng, 1.0);
  p.mean_head = init_dense(hidden, kActionDim, rng, 0.01);
  p.logstd_head = init_dense(hidden, kActionDim, rng, 0.01);
  return p;
}

ValueParams init_value(int input_dim, Rng& rng, int hidden) {
  ValueParams p;
  p.hidden1 = init_dense(input_dim, hidden, rng, 1.0);
  p.hidden2 = init_dense(hidden, hidden, rng, 1.0);
  p.head = init_dense(hidden, 1, rng, 0.01);
  return p;
}

PolicyOutput policy_forward(const PolicyParams& p, const Mat& x, PolicyCache* cache) {
  check_rows(x, p.input_dim(), "policy_forward");
  Mat h1 = tanh_of(p.hidden1.forward(x));
  Mat h2 = tanh_of(p.hidden2.forward(h1));
  PolicyOutput out;
  out.mean = p.mean_head.forward(h2);
  Mat raw = p.logstd_head.forward(h2);
  out.logstd = raw.cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
  if (cache) {
    cache->input = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
    cache->logstd_raw = std::move(raw);
  }
  return out;
}

void policy_backward(const PolicyParams& p, const PolicyCache& cache, const Mat& d_mean,
                     const Mat& d_logstd, PolicyParams* grads, Mat* d_input) {
  const Mat d_raw =
      ((cache.logstd_raw.array() >= kLogStdMin) && (cache.logstd_raw.array() <= kLogStdMax))
          .select(d_logstd, 0.0);
  const Mat d_h2 = p.mean_head.weight.transpose() * d_mean + p.logstd_head.weight.transpose() * d_raw;
  const Mat d_pre2 = (d_h2.array() * (1.0 - cache.h2.array().square())).matrix();
  const Mat d_h1 = p.hidden2.weight.transpose() * d_pre2;
  const Mat d_pre1 = (d_h1.array() * (1.0 - cache.h1.array().square())).matrix();
  if (grads) {
    dense_grads(d_mean, cache.h2, grads->mean_head);
    dense_grads(d_raw, cache.h2, grads->logstd_head);
    dense_grads(d_pre2, cache.h1, grads->hidden2);
    dense_grads(d_pre1, cache.input, grads->hidden1);
  }
  if (d_input) *d_input = p.hidden1.weight.transpose() * d_pre1;
}

Mat value_forward(const ValueParams& p, const Mat& x, ValueCache* cache) {
  check_rows(x, p.input_dim(), "value_forward");
  Mat h1 = tanh_of(p.hidden1.forward(x));
  Mat h2 = tanh_of(p.hidden2.forward(h1));
  Mat v = p.head.forward(h2);
  if (cache) {
    cache->input = x;
    cache->h1 = std::move(h1);
    cache->h2 = std::move(h2);
  }
  return v;
}

void value_backward(const ValueParams& p, const ValueCache& cache, const Mat& d_value,
                    ValueParams* grads) {
  const Mat d_h2 = p.head.weight.transpose() * d_value;
  const Mat d_pre2 = (d_h2.array() * (1.0 - cache.h2.array().square())).matrix();
  const Mat d_h1 = p.hidden2.weight.transpose() * d_pre2;
  const Mat d_pre1 = (d_h1.array() * (1.0 - cache.h1.array().square())).matrix();
  dense_grads(d_value, cache.h2, grads->head);
  dense_grads(d_pre2, cache.h1, grads->hidden2);
  dense_grads(d_pre1, cache.input, grads->hidden1);
}

Vec squashed_logprob(const Mat& mean, const Mat& logstd, const Mat& u, Mat* d_mean,
                     Mat* d_logstd) {
  const Eigen::ArrayXXd inv_std = (-logstd.array()).exp();
  const Eigen::ArrayXXd eps = (u - mean).array() * inv_std;
  const Eigen::ArrayXXd squash = (1.0 - u.array().tanh().square() + kSquashEps).log();
  const Eigen::ArrayXXd per_dim = -0.5 * eps.square() - logstd.array() - kHalfLog2Pi - squash;
  if (d_mean) *d_mean = (eps * inv_std).matrix();
  if (d_logstd) *d_logstd = (eps.square() - 1.0).matrix();
  return per_dim.colwise().sum().transpose().matrix();
}

Vec gaussian_entropy(const Mat& logstd) {
  return (logstd.array() + 0.5 + kHalfLog2Pi).colwise().sum().transpose().matrix();
}

ActionSample sample_action(const PolicyParams& p, const Vec& x, Rng& rng) {
  const auto out = policy_forward(p, x);
  const auto noise = gaussian(rng, kActionDim);
  ActionSample s;
  for (int j = 0; j < kActionDim; ++j) s.u[j] = out.mean(j, 0) + std::exp(out.logstd(j, 0)) * noise[static_cast<std::size_t>(j)];
  s.action = s.u.array().tanh().matrix();
  s.logprob = squashed_logprob(out.mean, out.logstd, s.u)[0];
  return s;
}

Eigen::Vector2d deterministic_action(const PolicyParams& p, const Vec& x) {
  return policy_forward(p, x).mean.col(0).array().tanh().matrix();
}

Mat deterministic_actions(const PolicyParams& p, const Mat& x) {
  return policy_forward(p, x).mean.array().tanh().matrix();
}

AdapterParams AdapterParams::zeros(int dim) {
  return AdapterParams{dim, Vec::Zero(static_cast<Eigen::Index>(flat_size(dim)))};
}

std::size_t AdapterParams::flat_size(int dim) {
  const auto d = static_cast<std::size_t>(dim);
  constexpr std::size_t z = kAdapterLatent;
  return z * d + z + z * z + z + d * z + d;
}

Mat layer_norm(const Mat& x, Mat* inv_std) {
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Mat centered = x.rowwise() - mu;
  const Eigen::RowVectorXd var = centered.array().square().colwise().mean().matrix();
  const Eigen::RowVectorXd inv = (var.array() + kLayerNormEps).rsqrt().matrix();
  if (inv_std) *inv_std = inv;
  return centered * inv.asDiagonal();
}

namespace {

struct AdapterViews {
  ConstRowMap we, wh, wd;
  Eigen::Map<const Vec> be, bh, bd;
};

AdapterViews views(const AdapterParams& phi) {
  const int d = phi.dim;
  constexpr int z = kAdapterLatent;
  const double* base = phi.flat.data();
  std::size_t off = 0;
  auto take = [&](std::size_t n) {
    const double* ptr = base + off;
    off += n;
    return ptr;
  };
  const double* we = take(static_cast<std::size_t>(z * d));
  const double* be = take(z);
  const double* wh = take(static_cast<std::size_t>(z * z));
  const double* bh = take(z);
  const double* wd = take(static_cast<std::size_t>(d * z));
  const double* bd = take(static_cast<std::size_t>(d));
  return {ConstRowMap(we, z, d), ConstRowMap(wh, z, z), ConstRowMap(wd, d, z),
          Eigen::Map<const Vec>(be, z), Eigen::Map<const Vec>(bh, z), Eigen::Map<const Vec>(bd, d)};
}

}  // namespace

Mat adapter_forward(const AdapterParams& phi, const Mat& o, AdapterCache* cache) {
  check_rows(o, phi.dim, "adapter_forward");
  if (static_cast<std::size_t>(phi.flat.size()) != AdapterParams::flat_size(phi.dim))
    throw std::invalid_argument("adapter flat vector has wrong length");
  const auto v = views(phi);
  Mat pre_e = (v.we * o).colwise() + v.be;
  Mat inv_std;
  Mat z = layer_norm(pre_e.cwiseMax(0.0), &inv_std);
  Mat pre_h = (v.wh * z).colwise() + v.bh;
  Mat h = pre_h.cwiseMax(0.0);
  const Mat delta = (v.wd * h).colwise() + v.bd;
  // o - (0 - delta) equals o + delta and leaves -0.0 entries intact when delta is zero.
  Mat out = o - (Mat::Zero(o.rows(), o.cols()) - delta);
  if (cache) {
    cache->input = o;
    cache->pre_e = std::move(pre_e);
    cache->z = std::move(z);
    cache->inv_std = std::move(inv_std);
    cache->pre_h = std::move(pre_h);
    cache->h = std::move(h);
  }
  return out;
}

Vec adapter_forward(const AdapterParams& phi, const Vec& o) {
  return adapter_forward(phi, Mat(o), nullptr).col(0);
}

void adapter_backward(const AdapterParams& phi, const AdapterCache& cache, const Mat& d_out,
                      Vec* d_flat, Mat* d_input) {
  const auto v = views(phi);
  const Mat d_h = v.wd.transpose() * d_out;
  const Mat d_pre_h = (cache.pre_h.array() > 0.0).select(d_h, 0.0);
  const Mat d_z = v.wh.transpose() * d_pre_h;
  // LayerNorm backward per column.
  const Eigen::RowVectorXd mean_dz = d_z.colwise().mean();
  const Eigen::RowVectorXd mean_dz_z = (d_z.array() * cache.z.array()).colwise().mean().matrix();
  const Mat d_relu = ((d_z.rowwise() - mean_dz).array() -
                      cache.z.array() * mean_dz_z.replicate(cache.z.rows(), 1).array())
                         .matrix() *
                     cache.inv_std.row(0).asDiagonal();
  const Mat d_pre_e = (cache.pre_e.array() > 0.0).select(d_relu, 0.0);

  if (d_flat) {
    const int d = phi.dim;
    constexpr int z = kAdapterLatent;
    d_flat->resize(static_cast<Eigen::Index>(AdapterParams::flat_size(d)));
    Eigen::Index off = 0;
    RowMap(d_flat->data() + off, z, d) = d_pre_e * cache.input.transpose();
    off += static_cast<Eigen::Index>(z) * d;
    d_flat->segment(off, z) = d_pre_e.rowwise().sum();
    off += z;
    RowMap(d_flat->data() + off, z, z) = d_pre_h * cache.z.transpose();
    off += static_cast<Eigen::Index>(z) * z;
    d_flat->segment(off, z) = d_pre_h.rowwise().sum();
    off += z;
    RowMap(d_flat->data() + off, d, z) = d_out * cache.h.transpose();
    off += static_cast<Eigen::Index>(d) * z;
    d_flat->segment(off, d) = d_out.rowwise().sum();
  }
  if (d_input) *d_input = d_out + v.we.transpose() * d_pre_e;
}

Adam::Adam(std::size_t size, double lr, double beta1, double beta2, double eps)
    : m_(Vec::Zero(static_cast<Eigen::Index>(size))),
      v_(Vec::Zero(static_cast<Eigen::Index>(size))),
      lr_(lr),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {}

void Adam::step(Vec& params, const Vec& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  if (lr_ == 0.0) return;
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

double clip_by_norm(Vec& grad, double max_norm) {
  const double norm = grad.norm();
  if (norm > max_norm && norm > 0.0) grad *= max_norm / norm;
  return norm;
}

}  // namespace dcada::nets
