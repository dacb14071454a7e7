#pragma once

#include <Eigen/Core>
#include <cstddef>

#include "dcada/seeds.hpp"

namespace dcada::nets {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline constexpr int kPolicyHidden = 256;
inline constexpr int kValueHidden = 128;
inline constexpr int kAdapterLatent = 32;
inline constexpr int kActionDim = 2;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;
inline constexpr double kLayerNormEps = 1e-5;

/// Affine layer y = W x + b, W stored out x in. Inputs are batched as columns.
struct Dense {
  Mat weight;
  Vec bias;

  static Dense zeros(int in, int out);
  int in() const { return static_cast<int>(weight.cols()); }
  int out() const { return static_cast<int>(weight.rows()); }
  Mat forward(const Mat& x) const;
  std::size_t size() const { return static_cast<std::size_t>(weight.size() + bias.size()); }
};

/// Two tanh hidden layers feeding separate mean and log-std heads.
struct PolicyParams {
  Dense hidden1;
  Dense hidden2;
  Dense mean_head;
  Dense logstd_head;

  static PolicyParams zeros(int input_dim, int hidden = kPolicyHidden);
  int input_dim() const { return hidden1.in(); }
  int hidden_dim() const { return hidden1.out(); }
  std::size_t size() const;
};

struct ValueParams {
  Dense hidden1;
  Dense hidden2;
  Dense head;

  static ValueParams zeros(int input_dim, int hidden = kValueHidden);
  int input_dim() const { return hidden1.in(); }
  std::size_t size() const;
};

/// Flat layout of every parameter set: for each Dense in declaration order,
/// the weight in row-major order followed by the bias.
Vec pack(const PolicyParams& p);
Vec pack(const ValueParams& p);
PolicyParams unpack_policy(const Vec& flat, int input_dim, int hidden = kPolicyHidden);
ValueParams unpack_value(const Vec& flat, int input_dim, int hidden = kValueHidden);

/// Scaled uniform fan-in init; the output heads are scaled by 0.01.
PolicyParams init_policy(int input_dim, Rng& rng, int hidden = kPolicyHidden);
ValueParams init_value(int input_dim, Rng& rng, int hidden = kValueHidden);

struct PolicyCache {
  Mat input;
  Mat h1;
  Mat h2;
  Mat logstd_raw;
};

struct PolicyOutput {
  Mat mean;    // 2 x n
  Mat logstd;  // 2 x n, clamped to [kLogStdMin, kLogStdMax]
};

PolicyOutput policy_forward(const PolicyParams& p, const Mat& x, PolicyCache* cache = nullptr);

/// Reverse pass from head gradients. Either output may be null.
void policy_backward(const PolicyParams& p, const PolicyCache& cache, const Mat& d_mean,
                     const Mat& d_logstd, PolicyParams* grads, Mat* d_input);

struct ValueCache {
  Mat input;
  Mat h1;
  Mat h2;
};

/// 1 x n row of state values.
Mat value_forward(const ValueParams& p, const Mat& x, ValueCache* cache = nullptr);
void value_backward(const ValueParams& p, const ValueCache& cache, const Mat& d_value,
                    ValueParams* grads);

/// Log-density of the squashed Gaussian at pre-squash sample u (per column),
/// with d/dmean and d/dlogstd when requested.
Vec squashed_logprob(const Mat& mean, const Mat& logstd, const Mat& u, Mat* d_mean = nullptr,
                     Mat* d_logstd = nullptr);

/// Entropy of the pre-squash Gaussian per column; d/dlogstd is 1.
Vec gaussian_entropy(const Mat& logstd);

struct ActionSample {
  Eigen::Vector2d action;
  Eigen::Vector2d u;
  double logprob = 0.0;
};

/// u ~ N(mean, exp(logstd)^2), action = tanh(u); draws two normals from rng.
ActionSample sample_action(const PolicyParams& p, const Vec& x, Rng& rng);
Eigen::Vector2d deterministic_action(const PolicyParams& p, const Vec& x);
/// tanh(mean) for every column of x.
Mat deterministic_actions(const PolicyParams& p, const Mat& x);

/// Per-robot residual bottleneck transform:
///   z = LN(ReLU(We o + be)),  h = ReLU(Wh z + bh),  o_hat = o + Wd h + bd.
/// Stored flat as We (32 x d, row-major), be, Wh (32 x 32), bh, Wd (d x 32), bd.
struct AdapterParams {
  int dim = 0;
  Vec flat;

  static AdapterParams zeros(int dim);
  static std::size_t flat_size(int dim);
  bool is_zero() const { return flat.isZero(0.0); }
};

struct AdapterCache {
  Mat input;
  Mat pre_e;
  Mat z;
  Mat inv_std;  // 1 x n
  Mat pre_h;
  Mat h;
};

Mat adapter_forward(const AdapterParams& phi, const Mat& o, AdapterCache* cache = nullptr);
Vec adapter_forward(const AdapterParams& phi, const Vec& o);

/// Writes d_flat (flat-size gradient) and/or d_input; either may be null.
void adapter_backward(const AdapterParams& phi, const AdapterCache& cache, const Mat& d_out,
                      Vec* d_flat, Mat* d_input);

/// Layer normalization over rows of each column, no affine parameters.
Mat layer_norm(const Mat& x, Mat* inv_std = nullptr);

/// Adam on a flat parameter vector.
class Adam {
 public:
  Adam(std::size_t size, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Vec& params, const Vec& grad);
  double lr() const { return lr_; }

 private:
  Vec m_;
  Vec v_;
  long t_ = 0;
  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
};

/// Rescales grad in place to at most max_norm; returns the pre-clip norm.
double clip_by_norm(Vec& grad, double max_norm);

}  // namespace dcada::nets
