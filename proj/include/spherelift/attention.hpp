#pragma once

#include "spherelift/autodiff.hpp"
#include "spherelift/icosphere.hpp"
#include "spherelift/lifting.hpp"

namespace spherelift {

/// Projection W0 (f x f0) and the two scoring vectors w1, w2 (f0 x 1) of one role.
struct AttentionRole {
  Matrix W0;
  Matrix w1;
  Matrix w2;

  static AttentionRole zeros(Index features, Index hidden);
  Index features() const { return W0.rows(); }
  Index hidden() const { return W0.cols(); }
};

enum class LiftRole { Update, Predict };

struct AttentionParams {
  AttentionRole update;
  AttentionRole predict;
  /// When set, the predict role reuses the update parameters.
  bool share_roles = false;
  double negative_slope = 0.2;

  const AttentionRole& role(LiftRole r) const { return (r == LiftRole::Predict && !share_roles) ? predict : update; }
  void validate() const;
};

/// Leaky-linear activation used on attention scores.
inline double leaky(double v, double negative_slope) { return v >= 0.0 ? v : negative_slope * v; }

/// t_ij = sigma(x_i W0 w1 + x_j W0 w2) for row feature vectors xi, xj.
double attention_score(const Matrix& xi, const Matrix& xj, const AttentionRole& role, double negative_slope);

/// Pre-normalization scores on the supports of M (update) and N (predict), in
/// pattern storage order.
struct AttentionScores {
  std::vector<double> update;
  std::vector<double> predict;
};

AttentionScores attention_scores(const SphericalSignal& x, const BlockAdjacency& adj, const AttentionParams& p);

/// Masked attention followed by the row-wise softmax over each row's support;
/// predict rows are halved afterwards.
LiftingOperators compute_operators(const SphericalSignal& x, const BlockAdjacency& adj, const AttentionParams& p);

/// Tape variables for the operator values, in pattern storage order.
struct RecordedOperators {
  ad::Var update;   // nnz(M) x 1
  ad::Var predict;  // nnz(N) x 1
};

struct RecordedAttentionRole {
  ad::Var W0, w1, w2;
};

/// Same computation as compute_operators, recorded on a tape. `x` holds the
/// level-l features with even rows first.
RecordedOperators record_operators(ad::Tape& tape, ad::Var x, const BlockAdjacency& adj,
                                   const RecordedAttentionRole& update, const RecordedAttentionRole& predict,
                                   double negative_slope);

}  // namespace spherelift
