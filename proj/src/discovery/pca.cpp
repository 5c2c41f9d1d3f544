#include "cropemu/discovery/pca.hpp"

#include <cmath>

#include <Eigen/Dense>

#include "cropemu/error.hpp"

namespace cropemu::discovery {

PcaResult pca_project(const nn::Tensor& points, std::size_t components) {
  if (points.rank() != 2 || points.shape[0] < 2) throw InputError("pca needs at least 2 points");
  const auto n = static_cast<long>(points.shape[0]);
  const auto d = static_cast<long>(points.shape[1]);
  if (components == 0 || static_cast<long>(components) > d) {
    throw InputError("pca component count must be in [1, " + std::to_string(d) + "]");
  }
  Eigen::MatrixXd z = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      points.values.data(), n, d);
  for (long j = 0; j < d; ++j) {
    const double mean = z.col(j).mean();
    z.col(j).array() -= mean;
    const double sd = std::sqrt(z.col(j).squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0) z.col(j) /= sd;
    else z.col(j).setZero();
  }
  const Eigen::MatrixXd cov = z.transpose() * z / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  const double total = values.sum();

  PcaResult res;
  res.coordinates = nn::Tensor({points.shape[0], components});
  for (std::size_t c = 0; c < components; ++c) {
    auto v = vectors.col(static_cast<long>(c));
    long arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    res.explained.push_back(total > 0 ? values(static_cast<long>(c)) / total : 0.0);
    res.loadings.emplace_back(v.data(), v.data() + d);
    const Eigen::VectorXd proj = z * v;
    for (long i = 0; i < n; ++i) res.coordinates.values[static_cast<std::size_t>(i) * components + c] = proj(i);
  }
  return res;
}

}  // namespace cropemu::discovery
