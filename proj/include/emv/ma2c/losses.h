#pragma once

#include "emv/ma2c/recurrent_net.h"

#include <vector>

namespace emv::ma2c {

inline constexpr double kLogFloor = 1e-10;

/// Softmax of each column.
Mat softmax_columns(const Mat &logits);
Vec softmax(const double *logits, int n);

/// L_v = 1/(2|B|) sum (R - V)^2. Writes dL/dV when d_values is given. Throws on an empty batch.
double value_loss(const Vec &values, const Vec &returns, Vec *d_values = nullptr);

/// L_p = -1/|B| sum ( ln pi(a) A - lambda sum_k pi_k ln pi_k ), pi = softmax(logits column).
/// ln is floored at kLogFloor. Writes dL/dlogits when d_logits is given.
double policy_loss(const Mat &logits, const std::vector<int> &actions, const Vec &advantages, double lambda,
                   Mat *d_logits = nullptr);

/// Draw from a probability vector.
int sample_action(const Vec &pi, sim::Rng &rng);
/// Index of the largest probability, lowest index on ties.
int argmax_action(const Vec &pi);

/// Adaptive moment estimation with global-norm gradient clipping.
class Adam {
public:
    Adam() = default;
    explicit Adam(int n, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
    /// Returns the gradient norm before clipping.
    double step(Vec &params, Vec grad, double lr, double clip_norm);

    Vec m, v;
    long t = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

/// Order-sensitive FNV-1a over the raw bytes of a parameter vector.
std::uint64_t checksum(const Vec &v);

} // namespace emv::ma2c
