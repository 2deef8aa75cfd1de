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
#include <random>
#include <vector>

#include "npcov/cdp.hpp"
#include "npcov/dataset.hpp"
#include "npcov/model.hpp"

namespace npcov {

/// Lloyd K-means with k-means++ seeding over dense double vectors,
/// squared-Euclidean assignment (ties to the lower centroid index), at most
/// 300 iterations, converged when no assignment changes. An emptied cluster
/// is re-seeded with the point farthest from its current centroid.
struct KmeansResult {
    std::vector<int> assignment;
    std::vector<std::vector<double>> centroids;
    std::size_t iterations = 0;
    double inertia = 0.0;
    std::vector<double> inertia_history;  // one entry per iteration
};
KmeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::mt19937_64& rng);

/// Clusters one class's binary CDP vectors. Fewer points than k yields one
/// singleton cluster per point. member_indices are positions into `vectors`,
/// ascending within each cluster.
struct ClassClusters {
    std::vector<std::vector<int>> member_indices;
    std::vector<std::vector<double>> centroids;
};
ClassClusters cluster_class(const std::vector<std::vector<std::uint8_t>>& vectors,
                            std::size_t k, std::uint64_t seed);

/// Layerwise union of member critical sets with membership-ratio weights,
/// aligned index-for-index with `neurons`.
struct MergedPath {
    std::vector<std::vector<int>> neurons;
    std::vector<std::vector<double>> weights;
};
MergedPath merge_cluster(const std::vector<const NeuronSelection*>& member_cdps,
                         std::size_t layer_count);

/// One cluster member as stored in the graph: its critical path and its
/// activations at the abstract-path neurons (aligned with the path layers).
struct GraphMember {
    int input_id = 0;
    NeuronSelection cdp;
    std::vector<std::vector<double>> activations;
};

/// Abstract critical path of one cluster: neurons whose membership weight
/// strictly exceeds beta, with those weights, plus the member snapshots.
struct AbstractPath {
    int class_id = 0;
    int cluster_index = 0;
    NeuronSelection neurons;
    std::vector<std::vector<double>> weights;
    std::vector<double> centroid;
    std::vector<GraphMember> members;

    /// Mean |s_l| / layer size over the given layer sizes.
    double width(const std::vector<std::size_t>& layer_sizes) const;
    std::size_t empty_layers() const;
};

/// Strict weight filter: keeps neurons with w > beta.
AbstractPath threshold_abstract(const MergedPath& merged, double beta);

struct DecisionGraph {
    double alpha = 0.0;
    double beta = 0.0;
    std::size_t clusters = 0;  // requested k
    std::size_t buckets = 200;
    double upper_bound = 2.0;
    std::uint64_t seed = 0;
    std::size_t num_classes = 0;
    std::vector<std::size_t> layer_sizes;  // countable layer sizes
    /// per_class[y] holds that class's abstract paths; fewer than k when the
    /// class had fewer predicted members, empty when it had none.
    std::vector<std::vector<AbstractPath>> per_class;

    std::size_t total_paths() const;
    /// Rejects violations of structural invariants (weight bounds, layer
    /// counts, alignment); used after load and in tests.
    void check() const;
};

struct GraphBuildOptions {
    double alpha = 0.9;
    double beta = 0.7;
    std::size_t clusters = 4;
    std::size_t buckets = 200;
    double upper_bound = 2.0;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Per-input pipeline results for one alpha: predicted class, critical
/// path, and the full countable-layer activations. Shared by graph
/// building, tuning and the masking studies.
struct ExtractedPaths {
    double alpha = 0.0;
    std::vector<int> predicted;
    std::vector<Cdp> cdps;
    std::vector<std::vector<std::vector<double>>> activations;  // [input][layer]
};
ExtractedPaths extract_paths(const Model& model, const LabeledDataset& data, double alpha,
                             int threads);

/// Full pipeline: per-input forward + relevance + path extraction
/// (parallel), grouping by predicted class, per-class clustering, merging
/// and thresholding. Member activation snapshots are restricted to the
/// abstract-path neurons.
DecisionGraph build_decision_graph(const Model& model, const LabeledDataset& train,
                                   const GraphBuildOptions& options);
DecisionGraph build_decision_graph(const Model& model, const ExtractedPaths& extracted,
                                   const GraphBuildOptions& options);

}  // namespace npcov
