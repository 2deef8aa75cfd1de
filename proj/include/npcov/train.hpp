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
#include <vector>

#include "npcov/dataset.hpp"
#include "npcov/model.hpp"

namespace npcov {

/// Architecture element for model construction. Dense carries `units`,
/// Conv2d carries `channels`/`kernel`/`stride`/`padding`, MaxPool2d carries
/// `kernel`/`stride`; ReLU and Flatten carry nothing.
struct LayerSpec {
    LayerKind kind = LayerKind::Dense;
    std::size_t units = 0;
    std::size_t channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 0;
    bool bias = true;

    static LayerSpec dense(std::size_t units, bool bias = true);
    static LayerSpec conv2d(std::size_t channels, int kernel, int stride = 1,
                            int padding = 0, bool bias = true);
    static LayerSpec relu() { return LayerSpec{LayerKind::Relu}; }
    static LayerSpec flatten() { return LayerSpec{LayerKind::Flatten}; }
    static LayerSpec max_pool2d(int kernel, int stride);
};

/// Seeded He-normal initialization; biases start at zero. Deterministic
/// across toolchains (no standard-library distributions involved).
Model make_model(const std::vector<std::size_t>& input_shape,
                 const std::vector<LayerSpec>& specs, std::size_t num_classes,
                 std::uint64_t seed);

struct TrainResult {
    Model model;
    double train_accuracy = 0.0;
};

/// Softmax cross-entropy SGD for Dense/ReLU/Flatten architectures only.
/// Epoch order reshuffles each pass from the given seed; 0 epochs returns
/// the seeded initialization untouched.
TrainResult train_dense(const LabeledDataset& train,
                        const std::vector<std::size_t>& input_shape,
                        const std::vector<LayerSpec>& specs, std::size_t num_classes,
                        std::size_t epochs, double learning_rate, std::uint64_t seed);

/// Fraction of examples whose predicted class matches the label.
double accuracy(const Model& model, const LabeledDataset& dataset);

}  // namespace npcov
