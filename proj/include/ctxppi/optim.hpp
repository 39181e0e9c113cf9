#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "ctxppi/errors.hpp"
#include "ctxppi/matrix.hpp"

namespace ctxppi::ad {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::uint64_t step = 0;
    std::vector<Matrix> m;  // first moments, one per parameter
    std::vector<Matrix> v;  // second moments

    static AdamState init(const std::vector<Matrix*>& params, double lr = 1e-3) {
        AdamState s;
        s.lr = lr;
        for (const Matrix* p : params) {
            s.m.emplace_back(p->rows, p->cols);
            s.v.emplace_back(p->rows, p->cols);
        }
        return s;
    }
};

// Bias-corrected Adam update, in place.
inline void adam_step(const std::vector<Matrix*>& params, const std::vector<const Matrix*>& grads,
                      AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adam_step: parameter/gradient/state count mismatch");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (std::size_t p = 0; p < params.size(); ++p) {
        Matrix& w = *params[p];
        const Matrix& g = *grads[p];
        if (!w.same_shape(g) || !w.same_shape(state.m[p]))
            throw ShapeError("adam_step: shape mismatch " + w.shape_str() + " vs " + g.shape_str());
        Matrix& m = state.m[p];
        Matrix& v = state.v[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g.data[i] * g.data[i];
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            w.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

}  // namespace ctxppi::ad
