#include "emv/ma2c/recurrent_net.h"

#include <stdexcept>
#include <string>

namespace emv::ma2c {

namespace {

using CMap = Eigen::Map<const Mat>;
using MMap = Eigen::Map<Mat>;
using CVMap = Eigen::Map<const Vec>;
using MVMap = Eigen::Map<Vec>;

template <typename Derived> auto sigmoid(const Eigen::ArrayBase<Derived> &x) {
    return 1.0 / (1.0 + (-x).exp());
}

} // namespace

int NetShape::param_count() const {
    int n = obs_hidden * obs + obs_hidden;
    if (has_fp())
        n += fp_hidden * fp + fp_hidden;
    n += 4 * lstm * concat() + 4 * lstm * lstm + 4 * lstm;
    n += out * lstm + out;
    return n;
}

RecurrentNet::RecurrentNet(NetShape shape) : shape_(shape) {
    if (shape.obs < 1 || shape.out < 1 || shape.obs_hidden < 1 || shape.lstm < 1 || shape.fp < 0 ||
        (shape.fp > 0 && shape.fp_hidden < 1))
        throw std::invalid_argument("invalid network shape");
    layout();
    params_.setZero(shape_.param_count());
}

void RecurrentNet::layout() {
    const NetShape &s = shape_;
    int at = 0;
    auto take = [&](int n) {
        int o = at;
        at += n;
        return o;
    };
    off_.w1 = take(s.obs_hidden * s.obs);
    off_.b1 = take(s.obs_hidden);
    off_.w2 = take(s.has_fp() ? s.fp_hidden * s.fp : 0);
    off_.b2 = take(s.has_fp() ? s.fp_hidden : 0);
    off_.wx = take(4 * s.lstm * s.concat());
    off_.wh = take(4 * s.lstm * s.lstm);
    off_.b = take(4 * s.lstm);
    off_.wo = take(s.out * s.lstm);
    off_.bo = take(s.out);
}

void RecurrentNet::init(sim::Rng &rng, double std, bool zero_output_layer) {
    params_.setZero(shape_.param_count());
    auto fill = [&](int off, int n) {
        for (int k = 0; k < n; ++k)
            params_[off + k] = std * rng.normal();
    };
    const NetShape &s = shape_;
    fill(off_.w1, s.obs_hidden * s.obs);
    if (s.has_fp())
        fill(off_.w2, s.fp_hidden * s.fp);
    fill(off_.wx, 4 * s.lstm * s.concat());
    fill(off_.wh, 4 * s.lstm * s.lstm);
    if (!zero_output_layer)
        fill(off_.wo, s.out * s.lstm);
}

void RecurrentNet::step(const double *obs, const double *fp, RecurrentState &state, double *out) const {
    const NetShape &s = shape_;
    const int H = s.lstm;
    const double *p = params_.data();
    Vec u(s.concat());
    u.head(s.obs_hidden) =
        (CMap(p + off_.w1, s.obs_hidden, s.obs) * CVMap(obs, s.obs) + CVMap(p + off_.b1, s.obs_hidden)).cwiseMax(0.0);
    if (s.has_fp())
        u.tail(s.fp_hidden) =
            (CMap(p + off_.w2, s.fp_hidden, s.fp) * CVMap(fp, s.fp) + CVMap(p + off_.b2, s.fp_hidden)).cwiseMax(0.0);
    if (state.h.size() != H)
        state.zero(H);
    Vec g = CMap(p + off_.wx, 4 * H, s.concat()) * u + CMap(p + off_.wh, 4 * H, H) * state.h +
            CVMap(p + off_.b, 4 * H);
    auto ig = sigmoid(g.segment(0, H).array());
    auto fg = sigmoid(g.segment(H, H).array());
    auto gg = g.segment(2 * H, H).array().tanh();
    auto og = sigmoid(g.segment(3 * H, H).array());
    state.c = (fg * state.c.array() + ig * gg).matrix();
    state.h = (og * state.c.array().tanh()).matrix();
    MVMap(out, s.out) = CMap(p + off_.wo, s.out, H) * state.h + CVMap(p + off_.bo, s.out);
}

void RecurrentNet::forward(const Mat &obs, const Mat &fp, const RecurrentState &initial,
                           const std::vector<char> &reset, SequenceCache &cache, Mat &out,
                           RecurrentState *final_state) const {
    const NetShape &s = shape_;
    const int H = s.lstm;
    const int T = static_cast<int>(obs.cols());
    if (obs.rows() != s.obs || (s.has_fp() && (fp.rows() != s.fp || fp.cols() != T)))
        throw std::invalid_argument("input width mismatch: expected obs " + std::to_string(s.obs) + ", fp " +
                                    std::to_string(s.fp) + ", got " + std::to_string(obs.rows()) + ", " +
                                    std::to_string(fp.rows()));
    if (static_cast<int>(reset.size()) != T)
        throw std::invalid_argument("reset flags must match the sequence length");
    const double *p = params_.data();

    cache.obs = obs;
    cache.reset = reset;
    cache.a1 = ((CMap(p + off_.w1, s.obs_hidden, s.obs) * obs).colwise() + CVMap(p + off_.b1, s.obs_hidden))
                   .cwiseMax(0.0);
    cache.u.resize(s.concat(), T);
    cache.u.topRows(s.obs_hidden) = cache.a1;
    if (s.has_fp()) {
        cache.fp = fp;
        cache.a2 = ((CMap(p + off_.w2, s.fp_hidden, s.fp) * fp).colwise() + CVMap(p + off_.b2, s.fp_hidden))
                       .cwiseMax(0.0);
        cache.u.bottomRows(s.fp_hidden) = cache.a2;
    }
    Mat gin = (CMap(p + off_.wx, 4 * H, s.concat()) * cache.u).colwise() + CVMap(p + off_.b, 4 * H);
    CMap wh(p + off_.wh, 4 * H, H);

    cache.gates.resize(4 * H, T);
    cache.c.resize(H, T);
    cache.tanh_c.resize(H, T);
    cache.h.resize(H, T);
    cache.h_prev.resize(H, T);
    cache.c_prev.resize(H, T);
    Vec g(4 * H);
    for (int t = 0; t < T; ++t) {
        if (reset[t]) {
            cache.h_prev.col(t).setZero();
            cache.c_prev.col(t).setZero();
        } else if (t == 0) {
            if (initial.h.size() == H) {
                cache.h_prev.col(0) = initial.h;
                cache.c_prev.col(0) = initial.c;
            } else {
                cache.h_prev.col(0).setZero();
                cache.c_prev.col(0).setZero();
            }
        } else {
            cache.h_prev.col(t) = cache.h.col(t - 1);
            cache.c_prev.col(t) = cache.c.col(t - 1);
        }
        g.noalias() = gin.col(t) + wh * cache.h_prev.col(t);
        auto gate = cache.gates.col(t);
        gate.segment(0, H) = sigmoid(g.segment(0, H).array()).matrix();
        gate.segment(H, H) = sigmoid(g.segment(H, H).array()).matrix();
        gate.segment(2 * H, H) = g.segment(2 * H, H).array().tanh().matrix();
        gate.segment(3 * H, H) = sigmoid(g.segment(3 * H, H).array()).matrix();
        cache.c.col(t) = (gate.segment(H, H).array() * cache.c_prev.col(t).array() +
                          gate.segment(0, H).array() * gate.segment(2 * H, H).array())
                             .matrix();
        cache.tanh_c.col(t) = cache.c.col(t).array().tanh().matrix();
        cache.h.col(t) = (gate.segment(3 * H, H).array() * cache.tanh_c.col(t).array()).matrix();
    }
    out = (CMap(p + off_.wo, s.out, H) * cache.h).colwise() + CVMap(p + off_.bo, s.out);
    if (final_state && T > 0) {
        final_state->h = cache.h.col(T - 1);
        final_state->c = cache.c.col(T - 1);
    }
}

void RecurrentNet::backward(const SequenceCache &cache, const Mat &d_out, Vec &grad) const {
    const NetShape &s = shape_;
    const int H = s.lstm;
    const int T = static_cast<int>(cache.h.cols());
    if (grad.size() != params_.size())
        grad.setZero(params_.size());
    const double *p = params_.data();
    double *gp = grad.data();

    MMap(gp + off_.wo, s.out, H).noalias() += d_out * cache.h.transpose();
    MVMap(gp + off_.bo, s.out) += d_out.rowwise().sum();
    Mat dh_all = CMap(p + off_.wo, s.out, H).transpose() * d_out;

    CMap wh(p + off_.wh, 4 * H, H);
    Mat dg(4 * H, T);
    Vec dh_next = Vec::Zero(H);
    Vec dc_next = Vec::Zero(H);
    for (int t = T - 1; t >= 0; --t) {
        auto gate = cache.gates.col(t);
        auto ig = gate.segment(0, H).array();
        auto fg = gate.segment(H, H).array();
        auto gg = gate.segment(2 * H, H).array();
        auto og = gate.segment(3 * H, H).array();
        auto tc = cache.tanh_c.col(t).array();
        Eigen::ArrayXd dh = dh_all.col(t).array() + dh_next.array();
        Eigen::ArrayXd dc = dh * og * (1.0 - tc * tc) + dc_next.array();
        dg.col(t).segment(0, H) = (dc * gg * ig * (1.0 - ig)).matrix();
        dg.col(t).segment(H, H) = (dc * cache.c_prev.col(t).array() * fg * (1.0 - fg)).matrix();
        dg.col(t).segment(2 * H, H) = (dc * ig * (1.0 - gg * gg)).matrix();
        dg.col(t).segment(3 * H, H) = (dh * tc * og * (1.0 - og)).matrix();
        if (cache.reset[t]) {
            dh_next.setZero();
            dc_next.setZero();
        } else {
            dh_next.noalias() = wh.transpose() * dg.col(t);
            dc_next = (dc * fg).matrix();
        }
    }

    MMap(gp + off_.wh, 4 * H, H).noalias() += dg * cache.h_prev.transpose();
    MMap(gp + off_.wx, 4 * H, s.concat()).noalias() += dg * cache.u.transpose();
    MVMap(gp + off_.b, 4 * H) += dg.rowwise().sum();
    Mat du = CMap(p + off_.wx, 4 * H, s.concat()).transpose() * dg;

    Mat dz1 = du.topRows(s.obs_hidden).cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
    MMap(gp + off_.w1, s.obs_hidden, s.obs).noalias() += dz1 * cache.obs.transpose();
    MVMap(gp + off_.b1, s.obs_hidden) += dz1.rowwise().sum();
    if (s.has_fp()) {
        Mat dz2 = du.bottomRows(s.fp_hidden).cwiseProduct((cache.a2.array() > 0.0).cast<double>().matrix());
        MMap(gp + off_.w2, s.fp_hidden, s.fp).noalias() += dz2 * cache.fp.transpose();
        MVMap(gp + off_.b2, s.fp_hidden) += dz2.rowwise().sum();
    }
}

} // namespace emv::ma2c
