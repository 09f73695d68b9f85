#pragma once

#include <Eigen/Dense>

#include "dbn/core.hpp"

namespace dbn {

/// Value and gradient of a smooth acyclicity functional.
struct AcyclicityValue {
    double value = 0.0;
    Eigen::MatrixXd gradient;
};

/// exp(A) by scaling and squaring: A is scaled by 2^-s until its 1-norm is at most 1/2, a
/// degree-18 Taylor polynomial is evaluated by Horner's rule, and the result is squared s times.
/// The fixed schedule makes results reproducible bit for bit.
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

/// tr exp(W o W) - d. Zero exactly when the support of W is acyclic.
double h_expm(const Eigen::MatrixXd& w);

/// 2 exp(W o W)^T o W.
Eigen::MatrixXd h_expm_grad(const Eigen::MatrixXd& w);

AcyclicityValue h_expm_value(const Eigen::MatrixXd& w);

/// tr((I + mu W o W)^d) - d and its gradient 2 mu d ((I + mu W o W)^(d-1))^T o W.
AcyclicityValue h_poly(const Eigen::MatrixXd& w, double mu);

/// Drops entries with |w| < threshold, then repeatedly removes the smallest-|w| edge lying on a
/// cycle (ties: smallest (row, col)) until the support is a DAG.
Adjacency threshold_and_repair(const Eigen::MatrixXd& w, double threshold);

}  // namespace dbn
