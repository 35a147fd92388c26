#include "declmi/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace declmi::numerics {

void ensure_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw std::runtime_error(what + ": non-finite entries");
}

void ensure_finite(const Vector& v, const std::string& what) {
  if (!v.allFinite()) throw std::runtime_error(what + ": non-finite entries");
}

Vector affine(const Vector& x, const Matrix& W, const Vector& b) {
  if (W.cols() != x.size() || W.rows() != b.size())
    throw std::invalid_argument("affine: shape mismatch");
  return W * x + b;
}

AffineGrads affine_vjp(const Vector& x, const Matrix& W, const Vector& dy) {
  if (W.cols() != x.size() || W.rows() != dy.size())
    throw std::invalid_argument("affine_vjp: shape mismatch");
  AffineGrads g;
  g.dx = W.transpose() * dy;
  g.dW = dy * x.transpose();
  g.db = dy;
  return g;
}

SoftmaxLoss softmax_cross_entropy(const Vector& logits, Eigen::Index target) {
  if (target < 0 || target >= logits.size())
    throw std::invalid_argument("softmax_cross_entropy: target out of range");
  ensure_finite(logits, "softmax_cross_entropy logits");
  const double mx = logits.maxCoeff();
  Vector shifted = logits.array() - mx;
  Vector ex = shifted.array().exp();
  const double z = ex.sum();
  SoftmaxLoss out;
  out.probs = ex / z;
  out.loss_nats = std::log(z) - shifted[target];
  out.grad = out.probs;
  out.grad[target] -= 1.0;
  return out;
}

double grad_check(const std::function<double(const Vector&)>& value_fn,
                  const std::function<Vector(const Vector&)>& grad_fn,
                  const Vector& point, double eps) {
  const Vector analytic = grad_fn(point);
  double worst = 0.0;
  Vector x = point;
  for (Eigen::Index j = 0; j < point.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + eps;
    const double fp = value_fn(x);
    x[j] = saved - eps;
    const double fm = value_fn(x);
    x[j] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({1.0, std::abs(analytic[j]), std::abs(numeric)});
    worst = std::max(worst, std::abs(analytic[j] - numeric) / denom);
  }
  return worst;
}

PCAModel pca_fit(const Matrix& X, Eigen::Index k) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw std::invalid_argument("pca_fit: need at least 2 samples");
  if (k < 1 || k > d) throw std::invalid_argument("pca_fit: k out of range");
  ensure_finite(X, "pca_fit input");

  PCAModel model;
  model.mean = X.colwise().mean().transpose();
  Matrix centered = X.rowwise() - model.mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("pca_fit: eigendecomposition failed");
  // Eigen returns ascending eigenvalues; we want descending.
  Vector evals = solver.eigenvalues().reverse();
  Matrix evecs = solver.eigenvectors().rowwise().reverse();

  model.projection = Matrix(k, d);
  for (Eigen::Index i = 0; i < k; ++i) {
    Vector dir = evecs.col(i);
    Eigen::Index argmax = 0;
    dir.cwiseAbs().maxCoeff(&argmax);
    if (dir[argmax] < 0.0) dir = -dir;
    model.projection.row(i) = dir.transpose();
  }

  // Tiny negative eigenvalues are numerical noise on rank-deficient input.
  Vector clipped = evals.cwiseMax(0.0);
  const double total = clipped.sum();
  model.retained_variance = total > 0.0 ? clipped.head(k).sum() / total : 1.0;
  return model;
}

Vector pca_transform(const PCAModel& m, const Vector& x) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("pca_transform: dimension mismatch");
  return m.projection * (x - m.mean);
}

}  // namespace declmi::numerics
