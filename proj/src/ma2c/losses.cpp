#include "emv/ma2c/losses.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace emv::ma2c {

Vec softmax(const double *logits, int n) {
    Eigen::Map<const Vec> z(logits, n);
    Vec e = (z.array() - z.maxCoeff()).exp().matrix();
    return e / e.sum();
}

Mat softmax_columns(const Mat &logits) {
    Mat out(logits.rows(), logits.cols());
    for (Eigen::Index t = 0; t < logits.cols(); ++t)
        out.col(t) = softmax(logits.col(t).data(), static_cast<int>(logits.rows()));
    return out;
}

double value_loss(const Vec &values, const Vec &returns, Vec *d_values) {
    if (values.size() == 0)
        throw std::invalid_argument("value loss on an empty batch");
    if (values.size() != returns.size())
        throw std::invalid_argument("value loss: size mismatch");
    const double n = static_cast<double>(values.size());
    Vec diff = returns - values;
    if (d_values)
        *d_values = -diff / n;
    return diff.squaredNorm() / (2.0 * n);
}

double policy_loss(const Mat &logits, const std::vector<int> &actions, const Vec &advantages, double lambda,
                   Mat *d_logits) {
    const Eigen::Index B = logits.cols();
    if (B == 0)
        throw std::invalid_argument("policy loss on an empty batch");
    if (static_cast<Eigen::Index>(actions.size()) != B || advantages.size() != B)
        throw std::invalid_argument("policy loss: size mismatch");
    const int A = static_cast<int>(logits.rows());
    if (d_logits)
        d_logits->resize(A, B);
    double total = 0.0;
    for (Eigen::Index t = 0; t < B; ++t) {
        Vec pi = softmax(logits.col(t).data(), A);
        Vec logp = pi.array().max(kLogFloor).log().matrix();
        const int a = actions[t];
        if (a < 0 || a >= A)
            throw std::invalid_argument("policy loss: action out of range");
        double plogp = pi.dot(logp);
        total += logp[a] * advantages[t] - lambda * plogp;
        if (d_logits) {
            // d ln pi_a / dz = e_a - pi ; d sum pi ln pi / dz_k = pi_k (ln pi_k - sum pi ln pi)
            Vec g = -advantages[t] * pi;
            g[a] += advantages[t];
            g -= lambda * (pi.array() * (logp.array() - plogp)).matrix();
            d_logits->col(t) = -g / static_cast<double>(B);
        }
    }
    return -total / static_cast<double>(B);
}

int sample_action(const Vec &pi, sim::Rng &rng) {
    double u = rng.uniform();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < pi.size(); ++k) {
        acc += pi[k];
        if (u < acc)
            return static_cast<int>(k);
    }
    // rounding left u above the final partial sum: last action with mass
    for (Eigen::Index k = pi.size(); k-- > 0;)
        if (pi[k] > 0.0)
            return static_cast<int>(k);
    return 0;
}

int argmax_action(const Vec &pi) {
    int best = 0;
    for (Eigen::Index k = 1; k < pi.size(); ++k)
        if (pi[k] > pi[best])
            best = static_cast<int>(k);
    return best;
}

Adam::Adam(int n, double b1, double b2, double e) : m(Vec::Zero(n)), v(Vec::Zero(n)), beta1(b1), beta2(b2), eps(e) {}

double Adam::step(Vec &params, Vec grad, double lr, double clip_norm) {
    double norm = grad.norm();
    if (!std::isfinite(norm))
        throw std::runtime_error("non-finite gradient");
    if (clip_norm > 0.0 && norm > clip_norm)
        grad *= clip_norm / norm;
    if (m.size() != params.size()) {
        m.setZero(params.size());
        v.setZero(params.size());
    }
    ++t;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    return norm;
}

std::uint64_t checksum(const Vec &v) {
    std::uint64_t h = 1469598103934665603ULL;
    const auto *bytes = reinterpret_cast<const unsigned char *>(v.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(v.size()) * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace emv::ma2c
