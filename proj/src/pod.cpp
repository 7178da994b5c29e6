#include "romkit/pod.hpp"

#include <cmath>
#include <string>

#include "romkit/error.hpp"

namespace romkit::pod {

std::vector<Eigen::Index> NormalizationParams::degenerate_rows() const {
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < size(); ++i)
    if (is_degenerate(i)) rows.push_back(i);
  return rows;
}

Eigen::VectorXd NormalizationParams::span() const {
  Eigen::VectorXd s = max - min;
  for (Eigen::Index i = 0; i < size(); ++i)
    if (is_degenerate(i)) s(i) = 0.0;
  return s;
}

NormalizationParams fit_normalization(const Eigen::MatrixXd& snapshots) {
  require(snapshots.rows() > 0 && snapshots.cols() > 0, "fit_normalization: empty snapshot matrix");
  return {snapshots.rowwise().minCoeff(), snapshots.rowwise().maxCoeff()};
}

namespace {

void check_rows(Eigen::Index rows, const NormalizationParams& p, const char* what) {
  require(rows == p.size(), std::string(what) + ": dimension " + std::to_string(rows) +
                                " does not match normalization size " +
                                std::to_string(p.size()));
}

}  // namespace

Eigen::MatrixXd normalize(const Eigen::MatrixXd& x, const NormalizationParams& p) {
  check_rows(x.rows(), p, "normalize");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (p.is_degenerate(i)) {
      out.row(i).setConstant(0.5);
    } else {
      out.row(i) = (x.row(i).array() - p.min(i)) / (p.max(i) - p.min(i));
    }
  }
  return out;
}

Eigen::VectorXd normalize(const Eigen::VectorXd& x, const NormalizationParams& p) {
  return normalize(Eigen::MatrixXd(x), p).col(0);
}

Eigen::MatrixXd denormalize(const Eigen::MatrixXd& x_norm, const NormalizationParams& p) {
  check_rows(x_norm.rows(), p, "denormalize");
  const Eigen::VectorXd scale = p.span();
  Eigen::MatrixXd out = x_norm.array().colwise() * scale.array();
  out.colwise() += p.min;
  return out;
}

Eigen::VectorXd denormalize(const Eigen::VectorXd& x_norm, const NormalizationParams& p) {
  check_rows(x_norm.rows(), p, "denormalize");
  return p.min + p.span().cwiseProduct(x_norm);
}

SnapshotAdequacy check_snapshot_shape(Eigen::Index states, Eigen::Index samples) {
  require(samples >= states, "snapshot matrix has " + std::to_string(samples) +
                                 " samples for " + std::to_string(states) +
                                 " states; need at least as many samples as states");
  return samples >= 10 * states ? SnapshotAdequacy::adequate : SnapshotAdequacy::thin;
}

namespace {

void fix_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index j = 0; j < modes.cols(); ++j) {
    Eigen::Index arg = 0;
    modes.col(j).cwiseAbs().maxCoeff(&arg);
    if (modes(arg, j) < 0.0) modes.col(j) *= -1.0;
  }
}

}  // namespace

ReducedBasis compute_basis(const Eigen::MatrixXd& snapshots, int order, SvdMethod method) {
  const Eigen::Index n = snapshots.rows();
  const Eigen::Index m = snapshots.cols();
  require(n > 0 && m > 0, "compute_basis: empty snapshot matrix");
  require(order >= 1 && order <= std::min(n, m),
          "compute_basis: order " + std::to_string(order) + " outside [1, " +
              std::to_string(std::min(n, m)) + "]");
  require(snapshots.allFinite(), "compute_basis: snapshot matrix contains non-finite values");
  if (method == SvdMethod::automatic)
    method = m > 10 * n ? SvdMethod::gram : SvdMethod::direct;

  ReducedBasis basis;
  basis.total_energy = snapshots.squaredNorm();
  if (method == SvdMethod::gram) {
    const Eigen::MatrixXd gram = snapshots * snapshots.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success)
      fail(ErrorCategory::numerical, "compute_basis: Gram eigendecomposition did not converge (" +
                                         std::to_string(n) + " x " + std::to_string(m) + ")");
    // Eigenvalues come back ascending.
    basis.modes = eig.eigenvectors().rightCols(order).rowwise().reverse();
    basis.singular_values =
        eig.eigenvalues().tail(order).reverse().cwiseMax(0.0).cwiseSqrt();
  } else {
    Eigen::BDCSVD<Eigen::MatrixXd> svd(snapshots, Eigen::ComputeThinU);
    if (svd.info() != Eigen::Success) {
      const auto& s = svd.singularValues();
      fail(ErrorCategory::numerical,
           "compute_basis: SVD did not converge; sigma_max=" + std::to_string(s(0)) +
               " sigma_min=" + std::to_string(s(s.size() - 1)));
    }
    basis.modes = svd.matrixU().leftCols(order);
    basis.singular_values = svd.singularValues().head(order);
  }
  fix_signs(basis.modes);
  return basis;
}

ReducedBasis truncate(const ReducedBasis& basis, int order) {
  require(order >= 1 && order <= basis.order(), "truncate: order outside [1, basis order]");
  return {basis.modes.leftCols(order), basis.singular_values.head(order), basis.total_energy};
}

Eigen::VectorXd reduce(const Eigen::VectorXd& x, const ReducedBasis& basis,
                       const NormalizationParams& p) {
  return basis.modes.transpose() * normalize(x, p);
}

Eigen::MatrixXd reduce(const Eigen::MatrixXd& x, const ReducedBasis& basis,
                       const NormalizationParams& p) {
  return basis.modes.transpose() * normalize(x, p);
}

Eigen::VectorXd reconstruct(const Eigen::VectorXd& xi, const ReducedBasis& basis,
                            const NormalizationParams& p) {
  require(xi.size() == basis.order(), "reconstruct: reduced vector length != basis order");
  return denormalize(Eigen::VectorXd(basis.modes * xi), p);
}

Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& xi, const ReducedBasis& basis,
                            const NormalizationParams& p) {
  require(xi.rows() == basis.order(), "reconstruct: reduced rows != basis order");
  return denormalize(Eigen::MatrixXd(basis.modes * xi), p);
}

double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
  require(truth.rows() == estimate.rows() && truth.cols() == estimate.cols(),
          "rmse: shape mismatch");
  require(truth.cols() >= 2, "rmse: need at least two samples (N >= 1)");
  const double intervals = static_cast<double>(truth.cols() - 1);
  return std::sqrt((truth - estimate).squaredNorm() / intervals);
}

double energy_fraction(const ReducedBasis& basis, int order) {
  require(order >= 0 && order <= basis.order(), "energy_fraction: order outside [0, basis order]");
  if (order == 0 || basis.total_energy <= 0.0) return 0.0;
  return std::min(1.0, basis.singular_values.head(order).squaredNorm() / basis.total_energy);
}

}  // namespace romkit::pod
