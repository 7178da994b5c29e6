#pragma once

#include <vector>

#include <Eigen/Dense>

namespace romkit::pod {

/// Per-state min/max of a snapshot matrix (rows are states).
struct NormalizationParams {
  Eigen::VectorXd min;
  Eigen::VectorXd max;

  Eigen::Index size() const { return min.size(); }
  /// Rows with max == min. They normalize to 0.5 and denormalize to min.
  bool is_degenerate(Eigen::Index i) const { return !(max(i) > min(i)); }
  std::vector<Eigen::Index> degenerate_rows() const;
  /// max - min, with 0 on degenerate rows.
  Eigen::VectorXd span() const;
};

NormalizationParams fit_normalization(const Eigen::MatrixXd& snapshots);

Eigen::VectorXd normalize(const Eigen::VectorXd& x, const NormalizationParams& p);
Eigen::MatrixXd normalize(const Eigen::MatrixXd& x, const NormalizationParams& p);
Eigen::VectorXd denormalize(const Eigen::VectorXd& x_norm, const NormalizationParams& p);
Eigen::MatrixXd denormalize(const Eigen::MatrixXd& x_norm, const NormalizationParams& p);

enum class SnapshotAdequacy { adequate, thin };

/// Samples should exceed the state dimension by 10x. Returns `thin` below
/// that and throws a contract violation when samples < states.
SnapshotAdequacy check_snapshot_shape(Eigen::Index states, Eigen::Index samples);

struct ReducedBasis {
  Eigen::MatrixXd modes;            // n x r, orthonormal columns
  Eigen::VectorXd singular_values;  // r, nonincreasing
  double total_energy = 0.0;        // sum of all squared singular values

  int order() const { return static_cast<int>(modes.cols()); }
  Eigen::Index state_dim() const { return modes.rows(); }
};

enum class SvdMethod {
  automatic,  // Gram eigendecomposition when samples > 10 * states, else direct
  gram,
  direct,
};

/// Truncated SVD basis of a snapshot matrix. Each mode's largest-magnitude
/// entry is made positive.
ReducedBasis compute_basis(const Eigen::MatrixXd& snapshots, int order,
                           SvdMethod method = SvdMethod::automatic);

/// Leading `order` modes of an existing basis.
ReducedBasis truncate(const ReducedBasis& basis, int order);

/// xi = U_r^T normalize(x)
Eigen::VectorXd reduce(const Eigen::VectorXd& x, const ReducedBasis& basis,
                       const NormalizationParams& p);
Eigen::MatrixXd reduce(const Eigen::MatrixXd& x, const ReducedBasis& basis,
                       const NormalizationParams& p);

/// x = denormalize(U_r xi)
Eigen::VectorXd reconstruct(const Eigen::VectorXd& xi, const ReducedBasis& basis,
                            const NormalizationParams& p);
Eigen::MatrixXd reconstruct(const Eigen::MatrixXd& xi, const ReducedBasis& basis,
                            const NormalizationParams& p);

/// sqrt(sum_j sum_i (a_ij - b_ij)^2 / N) for n x (N+1) inputs. The divisor is
/// the number of sampling intervals N, not the element count.
double rmse(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate);

/// Share of total energy captured by the first `order` modes.
double energy_fraction(const ReducedBasis& basis, int order);

}  // namespace romkit::pod
