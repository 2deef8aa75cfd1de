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

#include <cstddef>
#include <vector>

#include "npcov/model.hpp"

namespace npcov {

/// Relevance decomposition rule for weighted layers. Only the ε-stabilized
/// rule is implemented; the enum exists so z+ can be added without touching
/// call sites.
enum class LrpRule { Epsilon };

struct LrpOptions {
    LrpRule rule = LrpRule::Epsilon;
    double epsilon = 1e-6;
};

/// Per-neuron relevance at every countable layer plus the input layer,
/// produced by backward decomposition of the target logit.
class RelevanceTrace {
public:
    RelevanceTrace(std::vector<std::vector<double>> countable, Tensor input_relevance,
                   int target, double seed_value);

    /// Relevance vector of countable layer c (conv channels summed over
    /// spatial positions).
    const std::vector<double>& countable(std::size_t c) const { return countable_.at(c); }
    std::size_t countable_count() const { return countable_.size(); }

    /// Relevance distributed onto the input dimensions (pixels).
    const Tensor& input_relevance() const { return input_relevance_; }

    int target_class() const { return target_; }
    /// g_f(x): the logit value the decomposition was seeded with.
    double seed_value() const { return seed_value_; }

    /// Largest |Σ_i R_i^l − seed| across the input layer and every countable
    /// layer, relative to max(1, |seed|).
    double worst_conservation_error() const;
    bool conserves(double tol = 1e-3) const { return worst_conservation_error() <= tol; }

private:
    std::vector<std::vector<double>> countable_;
    Tensor input_relevance_;
    int target_ = 0;
    double seed_value_ = 0.0;
};

/// Layer-wise relevance propagation for the given class. The decomposition
/// is seeded with `seed_override` when given (used by the linearity checks),
/// otherwise with the target logit g_f(x).
RelevanceTrace relevance(const Model& model, const ForwardTrace& trace, int target,
                         const LrpOptions& options = {});
RelevanceTrace relevance_seeded(const Model& model, const ForwardTrace& trace, int target,
                                double seed_value, const LrpOptions& options = {});

}  // namespace npcov
