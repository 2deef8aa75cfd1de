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

#include "npcov/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace npcov {
namespace {

std::string layer_tag(std::size_t index, LayerKind kind) {
    std::ostringstream os;
    os << "layer " << index << " (" << to_string(kind) << ")";
    return os.str();
}

std::vector<std::size_t> shape_after(const Layer& layer, std::size_t index,
                                     const std::vector<std::size_t>& in) {
    switch (layer.kind) {
        case LayerKind::Dense: {
            require(in.size() == 1, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": expects a flat input, got " +
                        shape_string(in));
            require(layer.weights.rank() == 2, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": weights must be rank 2");
            require(layer.weights.extent(1) == in[0], ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": weight columns " +
                        std::to_string(layer.weights.extent(1)) + " != input size " +
                        std::to_string(in[0]));
            require(layer.bias.size() == layer.weights.extent(0), ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": bias length mismatch");
            return {layer.weights.extent(0)};
        }
        case LayerKind::Conv2d: {
            require(in.size() == 3, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": expects [C,H,W] input, got " +
                        shape_string(in));
            require(layer.weights.rank() == 4, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": weights must be rank 4");
            const std::size_t out_ch = layer.weights.extent(0);
            const std::size_t in_ch = layer.weights.extent(1);
            const std::size_t kh = layer.weights.extent(2);
            const std::size_t kw = layer.weights.extent(3);
            require(in_ch == in[0], ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": input channels " +
                        std::to_string(in[0]) + " != kernel channels " +
                        std::to_string(in_ch));
            require(layer.bias.size() == out_ch, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": bias length mismatch");
            require(layer.stride >= 1, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": stride must be >= 1");
            require(layer.padding >= 0, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": padding must be >= 0");
            const long h = (static_cast<long>(in[1]) + 2 * layer.padding -
                            static_cast<long>(kh)) / layer.stride + 1;
            const long w = (static_cast<long>(in[2]) + 2 * layer.padding -
                            static_cast<long>(kw)) / layer.stride + 1;
            require(h >= 1 && w >= 1, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": kernel larger than padded input");
            return {out_ch, static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
        }
        case LayerKind::Relu:
            return in;
        case LayerKind::MaxPool2d: {
            require(in.size() == 3, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": expects [C,H,W] input, got " +
                        shape_string(in));
            require(layer.kernel >= 1 && layer.stride >= 1, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": kernel and stride must be >= 1");
            const long h = (static_cast<long>(in[1]) - layer.kernel) / layer.stride + 1;
            const long w = (static_cast<long>(in[2]) - layer.kernel) / layer.stride + 1;
            require(h >= 1 && w >= 1, ErrorKind::Config,
                    layer_tag(index, layer.kind) + ": window larger than input");
            return {in[0], static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
        }
        case LayerKind::Flatten: {
            std::size_t n = 1;
            for (std::size_t e : in) n *= e;
            return {n};
        }
    }
    fail(ErrorKind::Invariant, "unreachable layer kind");
}

Tensor apply_dense(const Layer& layer, const Tensor& in) {
    const std::size_t out = layer.weights.extent(0);
    const std::size_t n = layer.weights.extent(1);
    Tensor result({out});
    const double* w = layer.weights.data();
    const double* a = in.data();
    for (std::size_t j = 0; j < out; ++j) {
        double z = layer.bias[j];
        const double* row = w + j * n;
        for (std::size_t i = 0; i < n; ++i) z += row[i] * a[i];
        result[j] = z;
    }
    return result;
}

Tensor apply_conv2d(const Layer& layer, const Tensor& in,
                    const std::vector<std::size_t>& out_shape) {
    const std::size_t out_ch = out_shape[0], oh = out_shape[1], ow = out_shape[2];
    const std::size_t in_ch = in.extent(0), ih = in.extent(1), iw = in.extent(2);
    const std::size_t kh = layer.weights.extent(2), kw = layer.weights.extent(3);
    Tensor result(out_shape);
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double z = layer.bias[oc];
                const long base_y = static_cast<long>(oy) * layer.stride - layer.padding;
                const long base_x = static_cast<long>(ox) * layer.stride - layer.padding;
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const long y = base_y + static_cast<long>(ky);
                        if (y < 0 || y >= static_cast<long>(ih)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long x = base_x + static_cast<long>(kx);
                            if (x < 0 || x >= static_cast<long>(iw)) continue;
                            z += in.at3(ic, static_cast<std::size_t>(y),
                                        static_cast<std::size_t>(x)) *
                                 layer.weights[((oc * in_ch + ic) * kh + ky) * kw + kx];
                        }
                    }
                }
                result.at3(oc, oy, ox) = z;
            }
        }
    }
    return result;
}

Tensor apply_relu(const Tensor& in) {
    Tensor result(std::vector<std::size_t>(in.shape()));
    for (std::size_t i = 0; i < in.size(); ++i) result[i] = in[i] > 0.0 ? in[i] : 0.0;
    return result;
}

Tensor apply_maxpool(const Layer& layer, const Tensor& in,
                     const std::vector<std::size_t>& out_shape) {
    const std::size_t ch = out_shape[0], oh = out_shape[1], ow = out_shape[2];
    Tensor result(out_shape);
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                double best = -std::numeric_limits<double>::infinity();
                for (int ky = 0; ky < layer.kernel; ++ky) {
                    for (int kx = 0; kx < layer.kernel; ++kx) {
                        const double v = in.at3(c, oy * layer.stride + ky,
                                                ox * layer.stride + kx);
                        if (v > best) best = v;
                    }
                }
                result.at3(c, oy, ox) = best;
            }
        }
    }
    return result;
}

}  // namespace

const char* to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Dense: return "Dense";
        case LayerKind::Conv2d: return "Conv2d";
        case LayerKind::Relu: return "ReLU";
        case LayerKind::MaxPool2d: return "MaxPool2d";
        case LayerKind::Flatten: return "Flatten";
    }
    return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
    if (name == "Dense") return LayerKind::Dense;
    if (name == "Conv2d") return LayerKind::Conv2d;
    if (name == "ReLU") return LayerKind::Relu;
    if (name == "MaxPool2d") return LayerKind::MaxPool2d;
    if (name == "Flatten") return LayerKind::Flatten;
    fail(ErrorKind::Format, "unknown layer kind '" + name + "'");
}

Layer Layer::dense(Tensor weights, Tensor bias) {
    require(weights.rank() == 2, ErrorKind::Config, "Dense weights must be rank 2");
    require(bias.rank() == 1 && bias.size() == weights.extent(0), ErrorKind::Config,
            "Dense bias must have one entry per output unit");
    return Layer{LayerKind::Dense, std::move(weights), std::move(bias)};
}

Layer Layer::conv2d(Tensor weights, Tensor bias, int stride, int padding) {
    require(weights.rank() == 4, ErrorKind::Config, "Conv2d weights must be rank 4");
    require(bias.rank() == 1 && bias.size() == weights.extent(0), ErrorKind::Config,
            "Conv2d bias must have one entry per output channel");
    Layer layer{LayerKind::Conv2d, std::move(weights), std::move(bias)};
    layer.stride = stride;
    layer.padding = padding;
    return layer;
}

Layer Layer::max_pool2d(int kernel, int stride) {
    Layer layer{LayerKind::MaxPool2d, {}, {}};
    layer.kernel = kernel;
    layer.stride = stride;
    return layer;
}

bool NeuronSelection::empty() const {
    for (const auto& ids : per_layer) {
        if (!ids.empty()) return false;
    }
    return true;
}

std::size_t NeuronSelection::total() const {
    std::size_t n = 0;
    for (const auto& ids : per_layer) n += ids.size();
    return n;
}

NeuronSelection NeuronSelection::complement(const std::vector<CountableLayer>& layers) const {
    require(per_layer.size() <= layers.size(), ErrorKind::Config,
            "neuron selection addresses more layers than the model has");
    NeuronSelection out;
    out.per_layer.resize(layers.size());
    for (std::size_t c = 0; c < layers.size(); ++c) {
        const std::vector<int>* sel = c < per_layer.size() ? &per_layer[c] : nullptr;
        std::size_t cursor = 0;
        for (int id = 0; id < static_cast<int>(layers[c].neurons); ++id) {
            if (sel && cursor < sel->size() && (*sel)[cursor] == id) {
                ++cursor;
                continue;
            }
            out.per_layer[c].push_back(id);
        }
    }
    return out;
}

Model::Model(std::vector<std::size_t> input_shape, std::vector<Layer> layers,
             std::size_t num_classes)
    : input_shape_(std::move(input_shape)),
      layers_(std::move(layers)),
      num_classes_(num_classes) {
    validate_and_index();
}

void Model::validate_and_index() {
    require(!input_shape_.empty(), ErrorKind::Config, "model: empty input shape");
    require(!layers_.empty(), ErrorKind::Config, "model: no layers");
    require(num_classes_ >= 1, ErrorKind::Config, "model: num_classes must be >= 1");

    std::vector<std::size_t> shape = input_shape_;
    layer_shapes_.clear();
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const Layer& layer = layers_[i];
        if (!layer.weighted()) {
            require(layer.weights.size() == 0 && layer.bias.size() == 0,
                    ErrorKind::Config,
                    layer_tag(i, layer.kind) + ": carries weights but must not");
        }
        shape = shape_after(layer, i, shape);
        layer_shapes_.push_back(shape);
    }

    const Layer& last = layers_.back();
    require(last.kind == LayerKind::Dense, ErrorKind::Config,
            "model: output layer must be Dense");
    require(layer_shapes_.back() == std::vector<std::size_t>{num_classes_},
            ErrorKind::Config,
            "model: output layer produces " + shape_string(layer_shapes_.back()) +
                ", expected [" + std::to_string(num_classes_) + "]");

    // Countable layers: every weighted layer except the output layer.
    countable_.clear();
    total_countable_ = 0;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        if (!layers_[i].weighted()) continue;
        // Dense: one neuron per unit. Conv2d: one neuron per output channel.
        const std::size_t neurons = layer_shapes_[i][0];
        countable_.push_back(CountableLayer{i, neurons, total_countable_});
        total_countable_ += neurons;
    }
}

ForwardTrace::ForwardTrace(Tensor input, std::vector<Tensor> outputs,
                           std::size_t num_classes)
    : input_(std::move(input)), outputs_(std::move(outputs)) {
    const Tensor& logits = outputs_.back();
    require(logits.size() == num_classes, ErrorKind::Invariant,
            "trace: logits length mismatch");
    // Lowest class index wins ties.
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.size(); ++c) {
        if (logits[c] > logits[best]) best = c;
    }
    predicted_ = static_cast<int>(best);
}

namespace {

// Index of the tensor that carries the post-nonlinearity activations of a
// countable layer: the weighted layer's own output followed through any
// shape-compatible activation layers, stopping before the next weighted
// layer (and before Flatten for conv maps).
std::size_t activation_tensor_index(const Model& model, std::size_t layer_index) {
    const auto& layers = model.layers();
    const bool conv = layers[layer_index].kind == LayerKind::Conv2d;
    std::size_t t = layer_index;
    while (t + 1 < layers.size()) {
        const LayerKind next = layers[t + 1].kind;
        const bool follow = conv ? (next == LayerKind::Relu || next == LayerKind::MaxPool2d)
                                 : (next == LayerKind::Relu);
        if (!follow) break;
        ++t;
    }
    return t;
}

}  // namespace

double ForwardTrace::activation(const Model& model, std::size_t countable_index,
                                int neuron) const {
    const CountableLayer& cl = model.countable_layers().at(countable_index);
    require(neuron >= 0 && neuron < static_cast<int>(cl.neurons), ErrorKind::Config,
            "activation: neuron id out of range");
    const std::size_t t = activation_tensor_index(model, cl.layer_index);
    const Tensor& out = outputs_[t];
    if (model.layers()[cl.layer_index].kind == LayerKind::Dense) {
        return out[static_cast<std::size_t>(neuron)];
    }
    const std::size_t plane = out.extent(1) * out.extent(2);
    const double* base = out.data() + static_cast<std::size_t>(neuron) * plane;
    double sum = 0.0;
    for (std::size_t i = 0; i < plane; ++i) sum += base[i];
    return sum;
}

std::vector<double> ForwardTrace::activations(const Model& model,
                                              std::size_t countable_index) const {
    const CountableLayer& cl = model.countable_layers().at(countable_index);
    std::vector<double> values(cl.neurons);
    const std::size_t t = activation_tensor_index(model, cl.layer_index);
    const Tensor& out = outputs_[t];
    if (model.layers()[cl.layer_index].kind == LayerKind::Dense) {
        for (std::size_t n = 0; n < cl.neurons; ++n) values[n] = out[n];
        return values;
    }
    const std::size_t plane = out.extent(1) * out.extent(2);
    for (std::size_t n = 0; n < cl.neurons; ++n) {
        const double* base = out.data() + n * plane;
        double sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) sum += base[i];
        values[n] = sum;
    }
    return values;
}

namespace {

ForwardTrace run_forward(const Model& model, const Tensor& input,
                         const NeuronSelection* masked) {
    require(input.shape() == model.input_shape(), ErrorKind::Config,
            "forward: input shape " + shape_string(input.shape()) +
                " != model input shape " + shape_string(model.input_shape()));
    require(input.all_finite(), ErrorKind::Config, "forward: non-finite input");

    // countable index per raw layer, -1 otherwise
    std::vector<int> countable_of(model.layers().size(), -1);
    for (std::size_t c = 0; c < model.countable_layers().size(); ++c) {
        countable_of[model.countable_layers()[c].layer_index] = static_cast<int>(c);
    }
    if (masked) {
        require(masked->per_layer.size() <= model.countable_layers().size(),
                ErrorKind::Config,
                "mask: selection addresses a non-countable layer (output layers "
                "cannot be masked)");
        for (std::size_t c = 0; c < masked->per_layer.size(); ++c) {
            const auto& ids = masked->per_layer[c];
            const int limit = static_cast<int>(model.countable_layers()[c].neurons);
            for (std::size_t i = 0; i < ids.size(); ++i) {
                require(ids[i] >= 0 && ids[i] < limit, ErrorKind::Config,
                        "mask: neuron id out of range in countable layer " +
                            std::to_string(c));
                require(i == 0 || ids[i - 1] < ids[i], ErrorKind::Config,
                        "mask: neuron ids must be sorted and unique");
            }
        }
    }

    std::vector<Tensor> outputs;
    outputs.reserve(model.layers().size());
    Tensor cur = input;
    for (std::size_t i = 0; i < model.layers().size(); ++i) {
        const Layer& layer = model.layers()[i];
        switch (layer.kind) {
            case LayerKind::Dense: cur = apply_dense(layer, cur); break;
            case LayerKind::Conv2d: cur = apply_conv2d(layer, cur, model.layer_shapes()[i]); break;
            case LayerKind::Relu: cur = apply_relu(cur); break;
            case LayerKind::MaxPool2d: cur = apply_maxpool(layer, cur, model.layer_shapes()[i]); break;
            case LayerKind::Flatten: cur = cur.reshaped(model.layer_shapes()[i]); break;
        }
        if (masked && countable_of[i] >= 0 &&
            static_cast<std::size_t>(countable_of[i]) < masked->per_layer.size()) {
            const auto& ids = masked->per_layer[static_cast<std::size_t>(countable_of[i])];
            if (layer.kind == LayerKind::Dense) {
                for (int id : ids) cur[static_cast<std::size_t>(id)] = 0.0;
            } else {
                const std::size_t plane = cur.extent(1) * cur.extent(2);
                for (int id : ids) {
                    double* base = cur.data() + static_cast<std::size_t>(id) * plane;
                    std::fill(base, base + plane, 0.0);
                }
            }
        }
        require(cur.all_finite(), ErrorKind::Invariant,
                layer_tag(i, layer.kind) + ": produced a non-finite value");
        outputs.push_back(cur);
    }
    return ForwardTrace(input, std::move(outputs), model.num_classes());
}

}  // namespace

ForwardTrace forward(const Model& model, const Tensor& input) {
    return run_forward(model, input, nullptr);
}

ForwardTrace mask_forward(const Model& model, const Tensor& input,
                          const NeuronSelection& masked) {
    return run_forward(model, input, &masked);
}

}  // namespace npcov
