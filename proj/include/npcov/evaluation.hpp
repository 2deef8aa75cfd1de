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

#include <string>
#include <vector>

#include "npcov/abstraction.hpp"
#include "npcov/coverage.hpp"
#include "npcov/dataset.hpp"
#include "npcov/model.hpp"

namespace npcov {

/// What gets masked to zero before re-running inference.
enum class MaskScope { InputCdp, InputNcdp, AbstractCdp, AbstractNcdp };
const char* to_string(MaskScope scope);

struct MaskReport {
    std::string scope;
    double rate = 0.0;
    std::size_t flipped = 0;
    std::size_t total = 0;
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t clusters = 0;
};

/// Fraction of inputs whose prediction flips under masking. Input scopes
/// mask each input's own critical path (or complement) at the given alpha.
/// Abstract scopes walk the graph's cluster members, masking every member
/// of a cluster with that cluster's abstract path (or complement); `inputs`
/// must then be the dataset the graph was built from.
MaskReport inconsistency_rate(const Model& model, const LabeledDataset& inputs,
                              MaskScope scope, double alpha, const DecisionGraph* graph,
                              int threads);

/// Splits each layer's critical neurons (sorted by relevance descending)
/// into 5 equal parts, remainder to the earlier parts. The returned
/// selections partition the path exactly.
std::vector<NeuronSelection> quintile_partition(const Cdp& cdp);

/// Masks one quintile at a time across all layers. Reports rates for
/// quintiles 1 (top relevance) through 5.
std::vector<MaskReport> quintile_mask(const Model& model, const LabeledDataset& inputs,
                                      double alpha, int threads);

struct SimilarityReport {
    double intra_class = 0.0;
    double inter_class = 0.0;
    double intra_cluster = 0.0;  // same cluster, same class
    double inter_cluster = 0.0;  // different clusters, same class
    std::size_t class_samples = 0;
    std::size_t cluster_samples = 0;
};

/// Mean pairwise path similarity within and across predicted classes on up
/// to per_class sampled inputs (lowest ids first), plus the within-class
/// cluster variants computed over graph members when a graph is given.
SimilarityReport similarity_study(const Model& model, const LabeledDataset& data,
                                  double alpha, std::size_t per_class,
                                  const DecisionGraph* graph, int threads);

struct TuneEntry {
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t clusters = 0;
    double width = 0.0;  // mean abstract-path width
    double input_inc_cdp = 0.0;
    double input_inc_ncdp = 0.0;
    double abstract_inc_cdp = 0.0;
    double abstract_inc_ncdp = 0.0;
    bool feasible = false;
};

struct TuneResult {
    std::vector<TuneEntry> entries;    // grid order: alpha, beta, k ascending
    std::vector<std::size_t> ranking;  // indices of feasible entries, best first
    double feasibility_threshold = 0.0;
};

/// Sweeps the grids, builds a graph per configuration and scores it by
/// masking. Ranking keeps configurations whose abstract-path inconsistency
/// reaches the feasibility threshold, then prefers smaller width, then
/// smaller complement inconsistency, then (alpha, beta, k) ascending.
TuneResult tune_hyperparameters(const Model& model, const LabeledDataset& train,
                                std::vector<double> alpha_grid,
                                std::vector<double> beta_grid,
                                std::vector<std::size_t> k_grid,
                                double feasibility_threshold, std::uint64_t seed,
                                int threads);

struct NcovResult {
    double base_coverage = 0.0;
    std::vector<double> coverages;  // per suite
    std::vector<double> ncov;       // per suite
    bool degenerate = false;        // all deltas equal; ncov forced to 0
};

/// Normalized coverage change against a base suite:
/// NCov(s) = (Cov(s) - Cov(s0)) / (max delta - min delta).
NcovResult normalized_coverage_change(const Model& model, const LabeledDataset& base,
                                      const std::vector<LabeledDataset>& suites,
                                      const DecisionGraph* graph,
                                      const ActivationProfile* profile,
                                      const CoverageConfig& config);
NcovResult normalize_coverage_deltas(double base_coverage,
                                     const std::vector<double>& coverages);

struct TimingEntry {
    Criterion criterion = Criterion::Snpc;
    double total_seconds = 0.0;
    double extraction_seconds = 0.0;  // critical-path extraction share
    double value = 0.0;               // the coverage scalar produced
};

/// Wall-clock per criterion over the same suite; path criteria report the
/// extraction phase separately (always less than the total).
std::vector<TimingEntry> timing(const Model& model, const LabeledDataset& suite,
                                const std::vector<Criterion>& criteria,
                                const DecisionGraph* graph,
                                const ActivationProfile* profile,
                                const CoverageConfig& config);

}  // namespace npcov
