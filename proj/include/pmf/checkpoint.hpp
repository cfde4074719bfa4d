#pragma once

#include <string>
#include <utility>
#include <vector>

#include "pmf/tensor.hpp"

namespace pmf {

/// Ordered named-tensor container with an optional single-line metadata
/// string (conventionally JSON). Serialized as versioned text with full
/// double precision, so saving and loading round-trips values bitwise.
struct Checkpoint {
    std::string meta;
    std::vector<std::pair<std::string, Tensor>> tensors;

    void add(const std::string& name, const Tensor& t);
    bool has(const std::string& name) const;
    const Tensor& get(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace pmf
