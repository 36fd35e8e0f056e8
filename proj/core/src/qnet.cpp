#include "qnrl/qnet.hpp"

#include <cmath>
#include <string>

#include "qnrl/errors.hpp"
#include "qnrl/rng.hpp"

namespace qnrl {

void NetworkSpec::validate() const {
    if (layer_sizes.size() < 2) throw InvalidInput("NetworkSpec: need at least an input and an output layer");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw InvalidInput("NetworkSpec: layer sizes must be positive");
}

std::size_t num_params(const NetworkSpec& spec) {
    spec.validate();
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l)
        n += (spec.layer_sizes[l] + 1) * spec.layer_sizes[l + 1];
    return n;
}

std::size_t layer_offset(const NetworkSpec& spec, std::size_t l) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < l; ++i) off += (spec.layer_sizes[i] + 1) * spec.layer_sizes[i + 1];
    return off;
}

ParamVector init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    ParamVector w(num_params(spec), 0.0);
    Rng rng(seed);
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (std::size_t k = 0; k < fan_in * fan_out; ++k) w[off + k] = uniform(rng, -bound, bound);
        off += (fan_in + 1) * fan_out;  // biases stay zero
    }
    return w;
}

namespace {

void check_inputs(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features) {
    spec.validate();
    if (w.size() != num_params(spec))
        throw InvalidInput("qnet: parameter vector has length " + std::to_string(w.size()) + ", expected " +
                           std::to_string(num_params(spec)));
    if (features.size() != spec.input_dim())
        throw InvalidInput("qnet: feature vector has length " + std::to_string(features.size()) + ", expected " +
                           std::to_string(spec.input_dim()));
}

// activations[l] is the input to layer l; activations.back() is the output.
// pre[l] holds the pre-activation of layer l.
struct Trace {
    std::vector<std::vector<double>> activations;
    std::vector<std::vector<double>> pre;
};

Trace run_forward(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features) {
    Trace t;
    const std::size_t layers = spec.layer_count();
    t.activations.reserve(layers + 1);
    t.pre.reserve(layers);
    t.activations.emplace_back(features.begin(), features.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const double* weights = w.data() + off;
        const double* bias = weights + fan_in * fan_out;
        const auto& in = t.activations.back();
        std::vector<double> z(fan_out);
        for (std::size_t j = 0; j < fan_out; ++j) {
            double acc = bias[j];
            const double* row = weights + j * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i) acc += row[i] * in[i];
            z[j] = acc;
        }
        std::vector<double> a = z;
        if (l + 1 < layers)
            for (double& v : a) v = v > 0.0 ? v : 0.0;
        t.pre.push_back(std::move(z));
        t.activations.push_back(std::move(a));
        off += (fan_in + 1) * fan_out;
    }
    return t;
}

}  // namespace

QValues forward(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features) {
    check_inputs(spec, w, features);
    return std::move(run_forward(spec, w, features).activations.back());
}

double value_and_accumulate_grad(const NetworkSpec& spec, std::span<const double> w,
                                 std::span<const double> features, std::size_t action,
                                 const std::function<double(double)>& weight_of, std::span<double> grad_out) {
    check_inputs(spec, w, features);
    if (action >= spec.action_count())
        throw InvalidInput("qnet: action index " + std::to_string(action) + " out of range");
    require_same_size(grad_out.size(), w.size(), "qnet gradient buffer");

    Trace t = run_forward(spec, w, features);
    const std::size_t layers = spec.layer_count();

    const double value = t.activations.back()[action];
    std::vector<double> delta(spec.action_count(), 0.0);
    delta[action] = weight_of(value);
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const std::size_t off = layer_offset(spec, l);
        const double* weights = w.data() + off;
        double* g_weights = grad_out.data() + off;
        double* g_bias = g_weights + fan_in * fan_out;
        const auto& in = t.activations[l];
        for (std::size_t j = 0; j < fan_out; ++j) {
            const double d = delta[j];
            if (d == 0.0) continue;
            double* g_row = g_weights + j * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i) g_row[i] += d * in[i];
            g_bias[j] += d;
        }
        if (l == 0) break;
        std::vector<double> prev(fan_in, 0.0);
        for (std::size_t j = 0; j < fan_out; ++j) {
            const double d = delta[j];
            if (d == 0.0) continue;
            const double* row = weights + j * fan_in;
            for (std::size_t i = 0; i < fan_in; ++i) prev[i] += row[i] * d;
        }
        const auto& z = t.pre[l - 1];
        for (std::size_t i = 0; i < fan_in; ++i)
            if (!(z[i] > 0.0)) prev[i] = 0.0;
        delta = std::move(prev);
    }
    return value;
}

ParamVector grad_q(const NetworkSpec& spec, std::span<const double> w, std::span<const double> features,
                   std::size_t action) {
    ParamVector g(w.size(), 0.0);
    value_and_accumulate_grad(spec, w, features, action, [](double) { return 1.0; }, g);
    return g;
}

}  // namespace qnrl
