#pragma once

// Two-branch recurrent approximator used for both the policy and the value:
//   obs -> FC(obs_hidden) ReLU ┐
//   fp  -> FC(fp_hidden)  ReLU ┴-> concat -> LSTM(lstm) -> FC(out)
// All weights live in one flat vector; the layers are Map views into it.

#include "emv/sim/simulator.h"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace emv::ma2c {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct NetShape {
    int obs = 0;
    int fp = 0; // 0 removes the fingerprint branch
    int obs_hidden = 128;
    int fp_hidden = 64;
    int lstm = 64;
    int out = 1;

    bool has_fp() const { return fp > 0; }
    int concat() const { return obs_hidden + (has_fp() ? fp_hidden : 0); }
    int param_count() const;
    bool operator==(const NetShape &) const = default;
};

struct RecurrentState {
    Vec h;
    Vec c;
    void zero(int width) {
        h.setZero(width);
        c.setZero(width);
    }
};

/// Per-sequence activations kept for the backward pass.
struct SequenceCache {
    Mat obs, fp;
    Mat a1, a2;   // post-ReLU branch outputs
    Mat u;        // concatenated branch outputs
    Mat gates;    // i, f, g, o after their nonlinearities, stacked (4H x T)
    Mat c, tanh_c, h;
    Mat h_prev, c_prev;
    std::vector<char> reset;
};

class RecurrentNet {
public:
    RecurrentNet() = default;
    explicit RecurrentNet(NetShape shape);

    const NetShape &shape() const { return shape_; }
    Vec &params() { return params_; }
    const Vec &params() const { return params_; }

    /// Normal(0, std) weights, zero biases; the output layer is zeroed when requested.
    void init(sim::Rng &rng, double std, bool zero_output_layer);

    /// One step from `state`, which is advanced in place. `fp` may be null without a fingerprint branch.
    void step(const double *obs, const double *fp, RecurrentState &state, double *out) const;

    /// Runs columns 0..T-1. reset[t] != 0 zeroes the recurrent state before column t;
    /// column 0 otherwise starts from `initial`. Writes out (out x T) and the final state.
    void forward(const Mat &obs, const Mat &fp, const RecurrentState &initial, const std::vector<char> &reset,
                 SequenceCache &cache, Mat &out, RecurrentState *final_state = nullptr) const;

    /// Accumulates dLoss/dparams into grad given dLoss/dout (out x T). Gradients
    /// do not flow into `initial`.
    void backward(const SequenceCache &cache, const Mat &d_out, Vec &grad) const;

private:
    struct Offsets {
        int w1, b1, w2, b2, wx, wh, b, wo, bo;
    };
    void layout();

    NetShape shape_;
    Offsets off_{};
    Vec params_;
};

} // namespace emv::ma2c
