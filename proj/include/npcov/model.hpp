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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "npcov/tensor.hpp"

namespace npcov {

enum class LayerKind { Dense, Conv2d, Relu, MaxPool2d, Flatten };

const char* to_string(LayerKind kind);
LayerKind layer_kind_from_string(const std::string& name);

/// One layer of a feed-forward classifier.
///
/// Dense      weights [out, in], bias [out]
/// Conv2d     weights [out_ch, in_ch, kh, kw], bias [out_ch]; stride/padding
/// MaxPool2d  kernel/stride window, no weights
/// Relu, Flatten  no parameters
struct Layer {
    LayerKind kind = LayerKind::Dense;
    Tensor weights;
    Tensor bias;
    int stride = 1;
    int padding = 0;
    int kernel = 2;  // MaxPool2d window

    bool weighted() const { return kind == LayerKind::Dense || kind == LayerKind::Conv2d; }

    static Layer dense(Tensor weights, Tensor bias);
    static Layer conv2d(Tensor weights, Tensor bias, int stride = 1, int padding = 0);
    static Layer relu() { return Layer{LayerKind::Relu, {}, {}}; }
    static Layer flatten() { return Layer{LayerKind::Flatten, {}, {}}; }
    static Layer max_pool2d(int kernel, int stride);
};

/// A neuron-bearing layer as seen by the coverage analyses: a hidden Dense
/// layer (one neuron per unit) or a hidden Conv2d layer (one neuron per
/// output channel). The output layer and activation-only layers are not
/// countable.
struct CountableLayer {
    std::size_t layer_index;  // index into Model::layers
    std::size_t neurons;      // units for Dense, channels for Conv2d
    std::size_t offset;       // first global neuron id of this layer
};

/// Neuron subsets addressed per countable layer; per_layer[c] holds sorted
/// unique neuron ids within countable layer c.
struct NeuronSelection {
    std::vector<std::vector<int>> per_layer;

    bool empty() const;
    std::size_t total() const;
    /// Per-layer complement with respect to the model's countable layers.
    NeuronSelection complement(const std::vector<CountableLayer>& layers) const;
};

/// Ordered feed-forward classifier. Immutable after construction; safe to
/// share across threads.
class Model {
public:
    Model(std::vector<std::size_t> input_shape, std::vector<Layer> layers,
          std::size_t num_classes);

    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::size_t num_classes() const { return num_classes_; }

    /// Countable layers in network order; stable for identical model files.
    const std::vector<CountableLayer>& countable_layers() const { return countable_; }
    std::size_t countable_neuron_count() const { return total_countable_; }

    /// Output shape of every layer, computed once at construction.
    const std::vector<std::vector<std::size_t>>& layer_shapes() const { return layer_shapes_; }

private:
    void validate_and_index();

    std::vector<std::size_t> input_shape_;
    std::vector<Layer> layers_;
    std::size_t num_classes_ = 0;
    std::vector<CountableLayer> countable_;
    std::size_t total_countable_ = 0;
    std::vector<std::vector<std::size_t>> layer_shapes_;
};

/// Per-layer outputs of one inference pass.
class ForwardTrace {
public:
    ForwardTrace(Tensor input, std::vector<Tensor> outputs, std::size_t num_classes);

    const Tensor& input() const { return input_; }
    const Tensor& layer_output(std::size_t layer_index) const { return outputs_.at(layer_index); }
    const Tensor& logits() const { return outputs_.back(); }

    int predicted_class() const { return predicted_; }
    /// g_f(x): the logit of the predicted class.
    double predicted_logit() const { return logits()[static_cast<std::size_t>(predicted_)]; }

    /// Post-nonlinearity activation of one countable neuron: the value the
    /// next weighted layer consumes, with conv channels summed over spatial
    /// positions.
    double activation(const Model& model, std::size_t countable_index, int neuron) const;
    /// All activations of one countable layer.
    std::vector<double> activations(const Model& model, std::size_t countable_index) const;

private:
    Tensor input_;
    std::vector<Tensor> outputs_;
    int predicted_ = 0;
};

/// Runs the classifier on one input. Pure and deterministic: identical
/// inputs produce bit-identical traces.
ForwardTrace forward(const Model& model, const Tensor& input);

/// forward() with the outputs of the selected neurons forced to zero before
/// the next layer consumes them. Masking a Conv2d neuron zeroes its entire
/// channel map. Only countable (hidden) layers are maskable.
ForwardTrace mask_forward(const Model& model, const Tensor& input,
                          const NeuronSelection& masked);

}  // namespace npcov
