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

#include "npcov/cdp.hpp"

#include <algorithm>
#include <numeric>

namespace npcov {

Cdp extract_cdp(const Model& model, const RelevanceTrace& rel, double alpha) {
    require(alpha > 0.0 && alpha <= 1.0, ErrorKind::Config,
            "extract_cdp: alpha must be in (0, 1]");
    const auto& countable = model.countable_layers();
    require(rel.countable_count() == countable.size(), ErrorKind::Config,
            "extract_cdp: relevance trace does not match model");

    Cdp path;
    path.alpha = alpha;
    path.predicted_class = rel.target_class();
    path.g_value = rel.seed_value();
    path.degenerate = rel.seed_value() <= 0.0;
    path.neurons.per_layer.resize(countable.size());
    path.scores.resize(countable.size());

    const double threshold = alpha * rel.seed_value();
    double width_sum = 0.0;

    for (std::size_t c = 0; c < countable.size(); ++c) {
        const std::vector<double>& r = rel.countable(c);

        std::vector<int> order;
        order.reserve(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) {
            if (r[i] > 0.0) order.push_back(static_cast<int>(i));
        }
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (r[static_cast<std::size_t>(a)] != r[static_cast<std::size_t>(b)])
                return r[static_cast<std::size_t>(a)] > r[static_cast<std::size_t>(b)];
            return a < b;
        });

        std::vector<int> selected;
        if (path.degenerate) {
            selected = order;  // threshold unsatisfiable, keep every positive neuron
        } else {
            double cumulative = 0.0;
            for (int id : order) {
                selected.push_back(id);
                cumulative += r[static_cast<std::size_t>(id)];
                if (cumulative > threshold) break;
            }
            if (cumulative <= threshold) selected = order;  // positive mass too small
        }

        std::sort(selected.begin(), selected.end());
        path.scores[c].reserve(selected.size());
        for (int id : selected) path.scores[c].push_back(r[static_cast<std::size_t>(id)]);
        width_sum += countable[c].neurons == 0
                         ? 0.0
                         : static_cast<double>(selected.size()) /
                               static_cast<double>(countable[c].neurons);
        path.neurons.per_layer[c] = std::move(selected);
    }

    path.width = countable.empty() ? 0.0 : width_sum / static_cast<double>(countable.size());
    return path;
}

void layer_overlap(const std::vector<int>& a, const std::vector<int>& b,
                   std::size_t& intersection, std::size_t& unions) {
    intersection = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            ++intersection;
            ++i;
            ++j;
        } else if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    unions = a.size() + b.size() - intersection;
}

double layer_jaccard(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t intersection = 0, unions = 0;
    layer_overlap(a, b, intersection, unions);
    if (unions == 0) return 1.0;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

double path_similarity(const NeuronSelection& p, const NeuronSelection& q) {
    require(p.per_layer.size() == q.per_layer.size(), ErrorKind::Config,
            "path_similarity: paths have different layer counts");
    if (p.per_layer.empty()) return 1.0;
    double sum = 0.0;
    for (std::size_t l = 0; l < p.per_layer.size(); ++l) {
        sum += layer_jaccard(p.per_layer[l], q.per_layer[l]);
    }
    return sum / static_cast<double>(p.per_layer.size());
}

double path_similarity(const Cdp& p, const Cdp& q) {
    return path_similarity(p.neurons, q.neurons);
}

std::vector<std::uint8_t> cdp_to_binary_vector(const Cdp& p, const Model& model) {
    const auto& countable = model.countable_layers();
    require(p.neurons.per_layer.size() == countable.size(), ErrorKind::Config,
            "cdp_to_binary_vector: path does not match model");
    std::vector<std::uint8_t> bits(model.countable_neuron_count(), 0);
    for (std::size_t c = 0; c < countable.size(); ++c) {
        for (int id : p.neurons.per_layer[c]) {
            bits[countable[c].offset + static_cast<std::size_t>(id)] = 1;
        }
    }
    return bits;
}

}  // namespace npcov
