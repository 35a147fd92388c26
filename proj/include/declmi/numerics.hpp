#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>

namespace declmi::numerics {

// Row-major 64-bit storage throughout; training-scale problems here are
// small enough that determinism and checkability beat raw speed.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Throws std::runtime_error naming `what` if any entry is non-finite.
void ensure_finite(const Matrix& m, const std::string& what);
void ensure_finite(const Vector& v, const std::string& what);

// Wx + b with shape validation.
Vector affine(const Vector& x, const Matrix& W, const Vector& b);

struct AffineGrads {
  Vector dx;
  Matrix dW;
  Vector db;
};

// Vector-Jacobian product of affine for upstream gradient `dy`.
AffineGrads affine_vjp(const Vector& x, const Matrix& W, const Vector& dy);

struct SoftmaxLoss {
  double loss_nats;  // -log softmax(logits)[target]
  Vector grad;       // softmax(logits) - onehot(target)
  Vector probs;
};

// Numerically stabilized via max-subtraction. Throws on non-finite logits
// or target out of range.
SoftmaxLoss softmax_cross_entropy(const Vector& logits, Eigen::Index target);

// Max relative error between the analytic gradient and central finite
// differences (f(x+eps e_j) - f(x-eps e_j)) / 2 eps, coordinate-wise.
// Relative error uses a unit floor so near-zero coordinates compare
// absolutely.
double grad_check(const std::function<double(const Vector&)>& value_fn,
                  const std::function<Vector(const Vector&)>& grad_fn,
                  const Vector& point, double eps);

struct PCAModel {
  Vector mean;                    // dim d
  Matrix projection;              // k x d, rows orthonormal, descending variance
  double retained_variance = 0.0; // fraction of total variance kept

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return projection.rows(); }
};

// Eigendecomposition of the sample covariance (d is small here). Component
// sign convention: the largest-magnitude entry of each direction is
// positive, so the model is unique and reproducible.
PCAModel pca_fit(const Matrix& X, Eigen::Index k);
Vector pca_transform(const PCAModel& m, const Vector& x);

}  // namespace declmi::numerics
