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
#include <set>
#include <string>
#include <vector>

#include "npcov/abstraction.hpp"
#include "npcov/cdp.hpp"
#include "npcov/dataset.hpp"
#include "npcov/model.hpp"

namespace npcov {

enum class Criterion { Snpc, Anpc, Nc, Kmnc, Nbc, Impartiality };

const char* to_string(Criterion c);
Criterion criterion_from_string(const std::string& name);

struct CoverageConfig {
    Criterion criterion = Criterion::Snpc;
    std::size_t buckets = 200;
    double upper_bound = 2.0;
    double nc_threshold = 0.0;
    std::size_t kmnc_sections = 1000;
    int threads = 1;
};

/// Covered-cell accumulator. Cells are packed per criterion:
/// SNPC/ANPC (class, cluster, layer, bucket); NC (neuron); KMNC
/// (neuron, section); NBC (neuron, side). States merge by set union when
/// their configurations agree.
struct CoverageState {
    Criterion criterion = Criterion::Snpc;
    std::size_t buckets = 0;
    double upper_bound = 0.0;
    double nc_threshold = 0.0;
    std::size_t kmnc_sections = 0;

    std::set<std::uint64_t> cells;
    std::size_t denominator = 0;
    /// SNPC/ANPC inputs whose predicted class has no abstract path.
    std::size_t skipped_inputs = 0;
    /// Cells no input can ever hit (missing clusters, empty abstract
    /// layers); explains coverage ceilings below 1.0.
    std::size_t unreachable_cells = 0;

    double coverage() const;
    void merge(const CoverageState& other);
};

std::uint64_t pack_cell(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d);

/// Per-layer Jaccard between the input's path and every abstract path of
/// its predicted class, bucketed in exact integer arithmetic: bucket i
/// covers J in ((i-1)/m, i/m], J = 0 folds into bucket 1.
std::vector<std::uint64_t> snpc_cells(const Cdp& x, const DecisionGraph& graph,
                                      std::size_t m);

/// Per-layer Euclidean distance to the nearest cluster member (highest
/// whole-path similarity, ties to the lowest member id) over abstract-path
/// neurons; D = 0 falls into bucket 1, D > U clamps to bucket m. Empty
/// abstract layers emit no cell.
std::vector<std::uint64_t> anpc_cells(const ForwardTrace& trace, const Cdp& x,
                                      const Model& model, const DecisionGraph& graph,
                                      std::size_t m, double upper_bound);

/// Per-neuron activation range over a reference set, for KMNC/NBC.
struct ActivationProfile {
    std::vector<double> low;
    std::vector<double> high;
};
ActivationProfile profile_activations(const Model& model, const LabeledDataset& data,
                                      int threads);

/// Unified driver. SNPC/ANPC need `graph`; KMNC/NBC need `profile`.
/// Output is independent of input order and thread count.
CoverageState coverage(const Model& model, const LabeledDataset& suite,
                       const DecisionGraph* graph, const ActivationProfile* profile,
                       const CoverageConfig& config);

/// Normalized entropy of the predicted-class distribution: 0 = one class,
/// 1 = uniform (exact at both extremes); 1.0 for single-class models.
double output_impartiality(const Model& model, const LabeledDataset& suite, int threads);

}  // namespace npcov
