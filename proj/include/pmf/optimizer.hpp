#pragma once

#include <vector>

#include "pmf/tensor.hpp"

namespace pmf {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Adam with bias correction. Holds first/second moment buffers per
/// parameter; parameters are updated in place through their shared buffers.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig config);

    /// One update from the gradients currently stored on the parameters.
    /// Parameters with no gradient buffer are treated as zero-gradient.
    void step();

    void zero_grad();

    std::size_t step_count() const { return step_; }

private:
    std::vector<Tensor> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamConfig config_;
    std::size_t step_ = 0;
};

}  // namespace pmf
