#pragma once

#include "spherelift/icosphere.hpp"
#include "spherelift/signal.hpp"
#include "spherelift/sparse.hpp"

#include <string>
#include <utility>

namespace spherelift {

/// Normalized update and predict operators of one level.
///
/// `update` lives on the support of M (even rows, odd columns) and its rows sum
/// to 1; `predict` lives on the support of N (odd rows, even columns) and its
/// rows sum to 1/2. Together they give constant signals zero detail.
struct LiftingOperators {
  int level = 0;
  CsrMatrix update;
  CsrMatrix predict;
};

/// Uniform operators: 1/deg on each even row of M, 1/4 on each odd row of N.
LiftingOperators handcrafted_operators(const BlockAdjacency& adj);

/// Checks the row-sum, sign, finiteness and support invariants; the result
/// names the first violated invariant, or is empty.
std::string check_operators(const LiftingOperators& ops, const BlockAdjacency& adj, double tol = 1e-9);

/// Update-first analysis: C = X_e + U X_o, D = X_o - P C.
SubbandPair lift_forward(const SphericalSignal& x, const LiftingOperators& ops);

/// Synthesis: X_o = D + P C, X_e = C - U X_o, merged as [X_e; X_o].
SphericalSignal lift_backward(const SubbandPair& sub, const LiftingOperators& ops);

/// Pooling keeps C as the level-(l-1) signal and hands D back for the loss.
std::pair<SphericalSignal, Matrix> lift_pool(const SphericalSignal& x, const LiftingOperators& ops);

/// Unpooling runs the synthesis with D = 0.
SphericalSignal lift_unpool(const SphericalSignal& c, const LiftingOperators& ops);

enum class BaselinePool { Downsample, Mean, Max };

SphericalSignal baseline_pool(const SphericalSignal& x, const BlockAdjacency& adj, BaselinePool kind);

/// Zero padding: coarse values on even indices, zeros on odd indices.
SphericalSignal baseline_unpool(const SphericalSignal& c, const BlockAdjacency& adj);

}  // namespace spherelift
