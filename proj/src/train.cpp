// Copyright 2026 The npcov Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "npcov/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "npcov/rng.hpp"

namespace npcov {
namespace {

std::size_t flat_size(const std::vector<std::size_t>& shape) {
    return Tensor::checked_size(shape);
}

std::vector<Layer> init_layers(const std::vector<std::size_t>& input_shape,
                               const std::vector<LayerSpec>& specs,
                               std::mt19937_64& rng) {
    std::vector<Layer> layers;
    std::vector<std::size_t> shape = input_shape;
    for (const LayerSpec& spec : specs) {
        switch (spec.kind) {
            case LayerKind::Dense: {
                require(shape.size() == 1, ErrorKind::Config,
                        "make_model: Dense needs a flat input, got " + shape_string(shape));
                require(spec.units > 0, ErrorKind::Config, "make_model: Dense units must be > 0");
                const std::size_t in = shape[0];
                Tensor w({spec.units, in});
                const double std_dev = std::sqrt(2.0 / static_cast<double>(in));
                for (double& v : w.values()) v = gaussian(rng) * std_dev;
                layers.push_back(Layer::dense(std::move(w), Tensor({spec.units})));
                shape = {spec.units};
                break;
            }
            case LayerKind::Conv2d: {
                require(shape.size() == 3, ErrorKind::Config,
                        "make_model: Conv2d needs [C,H,W] input, got " + shape_string(shape));
                require(spec.channels > 0 && spec.kernel > 0, ErrorKind::Config,
                        "make_model: Conv2d channels and kernel must be > 0");
                const std::size_t k = static_cast<std::size_t>(spec.kernel);
                Tensor w({spec.channels, shape[0], k, k});
                const double fan_in = static_cast<double>(shape[0] * k * k);
                const double std_dev = std::sqrt(2.0 / fan_in);
                for (double& v : w.values()) v = gaussian(rng) * std_dev;
                layers.push_back(Layer::conv2d(std::move(w), Tensor({spec.channels}),
                                               spec.stride, spec.padding));
                const std::size_t oh = static_cast<std::size_t>(
                    (static_cast<long>(shape[1]) + 2 * spec.padding - spec.kernel) /
                        spec.stride + 1);
                const std::size_t ow = static_cast<std::size_t>(
                    (static_cast<long>(shape[2]) + 2 * spec.padding - spec.kernel) /
                        spec.stride + 1);
                shape = {spec.channels, oh, ow};
                break;
            }
            case LayerKind::Relu:
                layers.push_back(Layer::relu());
                break;
            case LayerKind::Flatten:
                layers.push_back(Layer::flatten());
                shape = {flat_size(shape)};
                break;
            case LayerKind::MaxPool2d: {
                require(shape.size() == 3, ErrorKind::Config,
                        "make_model: MaxPool2d needs [C,H,W] input");
                layers.push_back(Layer::max_pool2d(spec.kernel, spec.stride));
                const std::size_t oh = static_cast<std::size_t>(
                    (static_cast<long>(shape[1]) - spec.kernel) / spec.stride + 1);
                const std::size_t ow = static_cast<std::size_t>(
                    (static_cast<long>(shape[2]) - spec.kernel) / spec.stride + 1);
                shape = {shape[0], oh, ow};
                break;
            }
        }
    }
    return layers;
}

}  // namespace

LayerSpec LayerSpec::dense(std::size_t units, bool bias) {
    LayerSpec s;
    s.kind = LayerKind::Dense;
    s.units = units;
    s.bias = bias;
    return s;
}

LayerSpec LayerSpec::conv2d(std::size_t channels, int kernel, int stride, int padding,
                            bool bias) {
    LayerSpec s;
    s.kind = LayerKind::Conv2d;
    s.channels = channels;
    s.kernel = kernel;
    s.stride = stride;
    s.padding = padding;
    s.bias = bias;
    return s;
}

LayerSpec LayerSpec::max_pool2d(int kernel, int stride) {
    LayerSpec s;
    s.kind = LayerKind::MaxPool2d;
    s.kernel = kernel;
    s.stride = stride;
    return s;
}

Model make_model(const std::vector<std::size_t>& input_shape,
                 const std::vector<LayerSpec>& specs, std::size_t num_classes,
                 std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return Model(input_shape, init_layers(input_shape, specs, rng), num_classes);
}

TrainResult train_dense(const LabeledDataset& train,
                        const std::vector<std::size_t>& input_shape,
                        const std::vector<LayerSpec>& specs, std::size_t num_classes,
                        std::size_t epochs, double learning_rate, std::uint64_t seed) {
    require(train.size() > 0, ErrorKind::Config, "train_dense: empty dataset");
    require(train.example_size() == flat_size(input_shape), ErrorKind::Config,
            "train_dense: dataset example size does not match input shape");
    train.check_labels(num_classes);
    for (const LayerSpec& spec : specs) {
        require(spec.kind == LayerKind::Dense || spec.kind == LayerKind::Relu ||
                    spec.kind == LayerKind::Flatten,
                ErrorKind::Config,
                "train_dense: only Dense/ReLU/Flatten architectures are trainable");
    }

    std::mt19937_64 rng(seed);
    std::vector<Layer> layers = init_layers(input_shape, specs, rng);

    // Dense layer index -> position in `layers`; everything else is a
    // flat-vector no-op for this restricted architecture.
    std::vector<std::size_t> dense_at;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].kind == LayerKind::Dense) dense_at.push_back(i);
    }
    require(!dense_at.empty(), ErrorKind::Config, "train_dense: no Dense layer");

    const std::size_t in_size = flat_size(input_shape);
    const double* pixels = train.images.data();

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    // Per-example work buffers, reused across the loop.
    std::vector<std::vector<double>> zs(layers.size());
    std::vector<std::vector<double>> as(layers.size() + 1);

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t n : order) {
            as[0].assign(pixels + n * in_size, pixels + (n + 1) * in_size);
            for (std::size_t i = 0; i < layers.size(); ++i) {
                const std::vector<double>& a = as[i];
                std::vector<double>& z = zs[i];
                if (layers[i].kind == LayerKind::Dense) {
                    const Layer& layer = layers[i];
                    const std::size_t out = layer.weights.extent(0);
                    const std::size_t in = layer.weights.extent(1);
                    z.assign(out, 0.0);
                    const double* w = layer.weights.data();
                    for (std::size_t j = 0; j < out; ++j) {
                        double s = layer.bias[j];
                        const double* row = w + j * in;
                        for (std::size_t k = 0; k < in; ++k) s += row[k] * a[k];
                        z[j] = s;
                    }
                } else if (layers[i].kind == LayerKind::Relu) {
                    z = a;
                    for (double& v : z) v = std::max(v, 0.0);
                } else {
                    z = a;
                }
                as[i + 1] = z;
            }

            // Softmax cross-entropy gradient at the logits.
            std::vector<double>& logits = as[layers.size()];
            const double peak = *std::max_element(logits.begin(), logits.end());
            double denom = 0.0;
            std::vector<double> grad(logits.size());
            for (std::size_t c = 0; c < logits.size(); ++c) {
                grad[c] = std::exp(logits[c] - peak);
                denom += grad[c];
            }
            for (std::size_t c = 0; c < logits.size(); ++c) grad[c] /= denom;
            grad[static_cast<std::size_t>(train.labels[n])] -= 1.0;

            for (std::size_t i = layers.size(); i-- > 0;) {
                if (layers[i].kind == LayerKind::Dense) {
                    Layer& layer = layers[i];
                    const std::size_t out = layer.weights.extent(0);
                    const std::size_t in = layer.weights.extent(1);
                    const std::vector<double>& a = as[i];
                    std::vector<double> prev(in, 0.0);
                    double* w = layer.weights.data();
                    const bool with_bias = specs[i].bias;
                    for (std::size_t j = 0; j < out; ++j) {
                        const double g = grad[j];
                        if (g == 0.0) continue;
                        double* row = w + j * in;
                        for (std::size_t k = 0; k < in; ++k) {
                            prev[k] += row[k] * g;
                            row[k] -= learning_rate * g * a[k];
                        }
                        if (with_bias) layer.bias[j] -= learning_rate * g;
                    }
                    grad = std::move(prev);
                } else if (layers[i].kind == LayerKind::Relu) {
                    const std::vector<double>& a = as[i];
                    for (std::size_t k = 0; k < grad.size(); ++k) {
                        if (a[k] <= 0.0) grad[k] = 0.0;
                    }
                }
            }
        }
    }

    Model model(input_shape, std::move(layers), num_classes);
    const double train_acc = accuracy(model, train);
    return TrainResult{std::move(model), train_acc};
}

double accuracy(const Model& model, const LabeledDataset& dataset) {
    require(dataset.size() > 0, ErrorKind::Config, "accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const ForwardTrace trace =
            forward(model, dataset.image(i).reshaped(model.input_shape()));
        if (trace.predicted_class() == dataset.labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(dataset.size());
}

}  // namespace npcov
