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

#include "npcov/lrp.hpp"
#include "npcov/model.hpp"

namespace npcov {

/// Critical decision path of one input: per countable layer, the neurons
/// whose combined relevance strictly exceeds alpha * g_f(x).
struct Cdp {
    /// Sorted neuron ids per countable layer.
    NeuronSelection neurons;
    /// Relevance of each selected neuron, aligned with neurons.per_layer.
    std::vector<std::vector<double>> scores;
    double alpha = 0.0;
    /// Mean fraction of neurons selected per countable layer.
    double width = 0.0;
    int predicted_class = 0;
    double g_value = 0.0;
    /// g_f(x) <= 0: the threshold is unsatisfiable, the path falls back to
    /// all positive-relevance neurons per layer.
    bool degenerate = false;
};

/// Greedy per-layer extraction: neurons sorted by relevance descending
/// (ties: lower id), prefix taken until the cumulative sum strictly exceeds
/// alpha * g_f(x). When the layer's positive mass cannot exceed the
/// threshold, all positive-relevance neurons are taken.
Cdp extract_cdp(const Model& model, const RelevanceTrace& rel, double alpha);

/// |a ∩ b| / |a ∪ b| over sorted id vectors; 1.0 when both are empty.
double layer_jaccard(const std::vector<int>& a, const std::vector<int>& b);

/// Exact intersection/union sizes, for integer bucket arithmetic.
void layer_overlap(const std::vector<int>& a, const std::vector<int>& b,
                   std::size_t& intersection, std::size_t& unions);

/// Mean layer_jaccard over all countable layers.
double path_similarity(const NeuronSelection& p, const NeuronSelection& q);
double path_similarity(const Cdp& p, const Cdp& q);

/// 0/1 vector over the model's global countable-neuron index.
std::vector<std::uint8_t> cdp_to_binary_vector(const Cdp& p, const Model& model);

}  // namespace npcov
