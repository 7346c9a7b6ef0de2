#pragma once

#include "atl/tensor.hpp"

#include <cstdint>
#include <vector>

namespace atl {

struct Parameter;

struct AdamOptions {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators for a fixed list of parameter tensors.
struct AdamState {
    AdamOptions options;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    std::int64_t step = 0;
};

AdamState make_adam_state(const AdamOptions& options, const std::vector<Tensor>& params);

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads);

/// Adam over a network's parameters. Non-trainable parameters are skipped
/// entirely so their values stay bitwise unchanged.
class Adam {
public:
    explicit Adam(AdamOptions options = {}) : options_(options) {}

    void step(std::vector<Parameter>& params);
    std::int64_t steps() const noexcept { return step_; }
    const AdamOptions& options() const noexcept { return options_; }

private:
    AdamOptions options_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::int64_t step_ = 0;
};

}  // namespace atl
