#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gram/tensor.hpp"

namespace gram {

enum class Init { Zeros, Ones, Normal002, Normal1, Uniform005, XavierIn };

// Ordered registry of named trainable tensors. Each parameter is initialized
// from an RNG stream keyed by (seed, name), so values depend only on the name
// and seed, never on registration order; models with overlapping parameter
// sets can therefore be compared weight-for-weight.
class ParamRegistry {
public:
    explicit ParamRegistry(uint64_t seed) : seed_(seed) {}

    Tensor create(const std::string& name, const Shape& shape, Init init);

    const std::vector<std::pair<std::string, Tensor>>& params() const { return items_; }
    Tensor* find(const std::string& name);
    const Tensor* find(const std::string& name) const;

    // Number of scalar values across all parameters (optionally name-filtered).
    int64_t scalar_count() const;
    int64_t scalar_count_matching(const std::string& prefix) const;

    void zero_grads();
    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::vector<std::pair<std::string, Tensor>> items_;
    std::unordered_map<std::string, size_t> index_;
};

}  // namespace gram
