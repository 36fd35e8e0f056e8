#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "qnrl/vector_ops.hpp"

namespace qnrl {

enum class Activation { relu };

/// Dense feed-forward network shape: input dim, hidden dims..., action count.
/// Hidden layers use `activation`; the output layer is affine.
struct NetworkSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;

    /// Throws InvalidInput unless there are at least two layers, all >= 1.
    void validate() const;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t action_count() const { return layer_sizes.back(); }
    std::size_t layer_count() const { return layer_sizes.size() - 1; }
};

using QValues = std::vector<double>;

/// Sum over layers of (fan_in + 1) * fan_out.
std::size_t num_params(const NetworkSpec& spec);

/// Offset of layer `l`'s block inside a ParamVector. Each block is the
/// fan_out x fan_in weight matrix in row-major order followed by fan_out biases.
std::size_t layer_offset(const NetworkSpec& spec, std::size_t l);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
ParamVector init_weights(const NetworkSpec& spec, std::uint64_t seed);

QValues forward(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features);

/// Reverse-mode gradient of output `action` with respect to every parameter.
/// The ReLU derivative at exactly zero is taken as zero.
ParamVector grad_q(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features,
                   std::size_t action);

/// One forward/backward pass: returns Q(s, action; w) and adds
/// weight_of(Q) * grad Q into `grad_out`.
double value_and_accumulate_grad(const NetworkSpec& spec, std::span<const double> w,
                                 std::span<const double> features, std::size_t action,
                                 const std::function<double(double)>& weight_of, std::span<double> grad_out);

}  // namespace qnrl
