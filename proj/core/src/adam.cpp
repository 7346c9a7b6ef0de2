#include "atl/adam.hpp"

#include "atl/errors.hpp"
#include "atl/network.hpp"

#include <cmath>

namespace atl {

namespace {

void update(const AdamOptions& o, std::int64_t t, Tensor& p, const Tensor& g, Tensor& m, Tensor& v) {
    const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
}

}  // namespace

AdamState make_adam_state(const AdamOptions& options, const std::vector<Tensor>& params) {
    AdamState s;
    s.options = options;
    for (const auto& p : params) {
        s.first_moment.emplace_back(p.shape());
        s.second_moment.emplace_back(p.shape());
    }
    return s;
}

void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads) {
    if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        require_same_shape(params[i], grads[i], "adam_step gradient");
        require_same_shape(params[i], state.first_moment[i], "adam_step state");
    }
    ++state.step;
    for (std::size_t i = 0; i < params.size(); ++i) {
        update(state.options, state.step, params[i], grads[i], state.first_moment[i], state.second_moment[i]);
    }
}

void Adam::step(std::vector<Parameter>& params) {
    if (m_.empty()) {
        for (const auto& p : params) {
            m_.emplace_back(p.value.shape());
            v_.emplace_back(p.value.shape());
        }
    }
    if (m_.size() != params.size()) throw ShapeError("Adam: parameter list changed between steps");
    ++step_;
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.trainable) continue;
        require_same_shape(p.value, m_[i], "Adam state");
        require_same_shape(p.value, p.grad, "Adam gradient");
        update(options_, step_, p.value, p.grad, m_[i], v_[i]);
    }
}

}  // namespace atl
