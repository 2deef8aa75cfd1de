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

#include "npcov/abstraction.hpp"

#include <algorithm>
#include <map>

#include "npcov/lrp.hpp"
#include "npcov/parallel.hpp"
#include "npcov/rng.hpp"

namespace npcov {
namespace {

constexpr std::size_t kMaxKmeansIterations = 300;

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum;
}

std::vector<std::vector<double>> kmeanspp_init(const std::vector<std::vector<double>>& points,
                                               std::size_t k, std::mt19937_64& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.reserve(k);
    centroids.push_back(points[uniform_index(rng, points.size())]);

    std::vector<double> dist2(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        dist2[i] = squared_distance(points[i], centroids[0]);
    }
    while (centroids.size() < k) {
        double total = 0.0;
        for (double d : dist2) total += d;
        std::size_t pick;
        if (total <= 0.0) {
            pick = uniform_index(rng, points.size());
        } else {
            const double r = uniform01(rng) * total;
            double cumulative = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                cumulative += dist2[i];
                if (cumulative > r) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick]);
        for (std::size_t i = 0; i < points.size(); ++i) {
            dist2[i] = std::min(dist2[i], squared_distance(points[i], centroids.back()));
        }
    }
    return centroids;
}

}  // namespace

KmeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k,
                    std::mt19937_64& rng) {
    require(!points.empty(), ErrorKind::Config, "kmeans: no points");
    require(k >= 1 && k <= points.size(), ErrorKind::Config,
            "kmeans: k must be in [1, point count]");
    const std::size_t dim = points[0].size();
    for (const auto& p : points) {
        require(p.size() == dim, ErrorKind::Config, "kmeans: ragged point dimensions");
    }

    KmeansResult result;
    result.centroids = kmeanspp_init(points, k, rng);
    result.assignment.assign(points.size(), -1);

    std::vector<std::size_t> counts(k);
    for (std::size_t iter = 0; iter < kMaxKmeansIterations; ++iter) {
        result.iterations = iter + 1;
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            int best = 0;
            double best_d = squared_distance(points[i], result.centroids[0]);
            for (std::size_t j = 1; j < k; ++j) {
                const double d = squared_distance(points[i], result.centroids[j]);
                if (d < best_d) {
                    best_d = d;
                    best = static_cast<int>(j);
                }
            }
            inertia += best_d;
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        result.inertia = inertia;
        result.inertia_history.push_back(inertia);

        if (!changed) break;

        std::fill(counts.begin(), counts.end(), 0);
        for (auto& c : result.centroids) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto j = static_cast<std::size_t>(result.assignment[i]);
            ++counts[j];
            for (std::size_t d = 0; d < dim; ++d) result.centroids[j][d] += points[i][d];
        }
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] == 0) continue;
            for (double& v : result.centroids[j]) v /= static_cast<double>(counts[j]);
        }

        // Re-seed each emptied cluster with the point farthest from its own
        // centroid, stealing at most one point per empty cluster.
        std::vector<bool> stolen(points.size(), false);
        for (std::size_t j = 0; j < k; ++j) {
            if (counts[j] != 0) continue;
            std::size_t farthest = points.size();
            double far_d = -1.0;
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (stolen[i]) continue;
                const auto owner = static_cast<std::size_t>(result.assignment[i]);
                if (counts[owner] <= 1) continue;
                const double d = squared_distance(points[i], result.centroids[owner]);
                if (d > far_d) {
                    far_d = d;
                    farthest = i;
                }
            }
            if (farthest == points.size()) break;
            stolen[farthest] = true;
            result.centroids[j] = points[farthest];
        }
    }
    return result;
}

ClassClusters cluster_class(const std::vector<std::vector<std::uint8_t>>& vectors,
                            std::size_t k, std::uint64_t seed) {
    require(!vectors.empty(), ErrorKind::Config, "cluster_class: no paths to cluster");
    require(k >= 1, ErrorKind::Config, "cluster_class: k must be >= 1");

    ClassClusters out;
    if (vectors.size() <= k) {
        for (std::size_t i = 0; i < vectors.size(); ++i) {
            out.member_indices.push_back({static_cast<int>(i)});
            out.centroids.emplace_back(vectors[i].begin(), vectors[i].end());
        }
        return out;
    }

    std::vector<std::vector<double>> points;
    points.reserve(vectors.size());
    for (const auto& v : vectors) points.emplace_back(v.begin(), v.end());

    std::mt19937_64 rng(seed);
    const KmeansResult km = kmeans(points, k, rng);

    std::vector<std::vector<int>> members(k);
    for (std::size_t i = 0; i < points.size(); ++i) {
        members[static_cast<std::size_t>(km.assignment[i])].push_back(static_cast<int>(i));
    }
    for (std::size_t j = 0; j < k; ++j) {
        if (members[j].empty()) continue;  // degenerate duplicate-heavy classes
        out.member_indices.push_back(std::move(members[j]));
        out.centroids.push_back(km.centroids[j]);
    }
    return out;
}

MergedPath merge_cluster(const std::vector<const NeuronSelection*>& member_cdps,
                         std::size_t layer_count) {
    require(!member_cdps.empty(), ErrorKind::Config, "merge_cluster: empty cluster");
    MergedPath merged;
    merged.neurons.resize(layer_count);
    merged.weights.resize(layer_count);
    const double total = static_cast<double>(member_cdps.size());
    for (std::size_t l = 0; l < layer_count; ++l) {
        std::map<int, int> counts;
        for (const NeuronSelection* cdp : member_cdps) {
            require(cdp->per_layer.size() == layer_count, ErrorKind::Config,
                    "merge_cluster: member path layer count mismatch");
            for (int id : cdp->per_layer[l]) ++counts[id];
        }
        merged.neurons[l].reserve(counts.size());
        merged.weights[l].reserve(counts.size());
        for (const auto& [id, count] : counts) {
            merged.neurons[l].push_back(id);
            merged.weights[l].push_back(static_cast<double>(count) / total);
        }
    }
    return merged;
}

AbstractPath threshold_abstract(const MergedPath& merged, double beta) {
    require(beta >= 0.0 && beta < 1.0, ErrorKind::Config,
            "threshold_abstract: beta must be in [0, 1)");
    AbstractPath path;
    path.neurons.per_layer.resize(merged.neurons.size());
    path.weights.resize(merged.neurons.size());
    for (std::size_t l = 0; l < merged.neurons.size(); ++l) {
        for (std::size_t i = 0; i < merged.neurons[l].size(); ++i) {
            if (merged.weights[l][i] > beta) {
                path.neurons.per_layer[l].push_back(merged.neurons[l][i]);
                path.weights[l].push_back(merged.weights[l][i]);
            }
        }
    }
    return path;
}

double AbstractPath::width(const std::vector<std::size_t>& layer_sizes) const {
    if (layer_sizes.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t l = 0; l < neurons.per_layer.size(); ++l) {
        sum += static_cast<double>(neurons.per_layer[l].size()) /
               static_cast<double>(layer_sizes[l]);
    }
    return sum / static_cast<double>(layer_sizes.size());
}

std::size_t AbstractPath::empty_layers() const {
    std::size_t n = 0;
    for (const auto& layer : neurons.per_layer) {
        if (layer.empty()) ++n;
    }
    return n;
}

std::size_t DecisionGraph::total_paths() const {
    std::size_t n = 0;
    for (const auto& paths : per_class) n += paths.size();
    return n;
}

void DecisionGraph::check() const {
    require(alpha > 0.0 && alpha <= 1.0, ErrorKind::Invariant,
            "decision graph: alpha out of (0, 1]");
    require(beta >= 0.0 && beta < 1.0, ErrorKind::Invariant,
            "decision graph: beta out of [0, 1)");
    require(clusters >= 1, ErrorKind::Invariant, "decision graph: clusters must be >= 1");
    require(buckets >= 1, ErrorKind::Invariant, "decision graph: buckets must be >= 1");
    require(upper_bound > 0.0, ErrorKind::Invariant,
            "decision graph: upper bound must be > 0");
    require(per_class.size() == num_classes, ErrorKind::Invariant,
            "decision graph: class count mismatch");
    require(!layer_sizes.empty(), ErrorKind::Invariant, "decision graph: no layers");

    std::size_t total_neurons = 0;
    for (std::size_t s : layer_sizes) total_neurons += s;

    for (std::size_t y = 0; y < per_class.size(); ++y) {
        require(per_class[y].size() <= clusters, ErrorKind::Invariant,
                "decision graph: more paths than clusters for class " + std::to_string(y));
        for (const AbstractPath& path : per_class[y]) {
            require(path.class_id == static_cast<int>(y), ErrorKind::Invariant,
                    "decision graph: path filed under the wrong class");
            require(path.neurons.per_layer.size() == layer_sizes.size(),
                    ErrorKind::Invariant, "decision graph: path layer count mismatch");
            require(path.weights.size() == layer_sizes.size(), ErrorKind::Invariant,
                    "decision graph: weight layer count mismatch");
            require(path.centroid.size() == total_neurons, ErrorKind::Invariant,
                    "decision graph: centroid length mismatch");
            require(!path.members.empty(), ErrorKind::Invariant,
                    "decision graph: cluster without members");
            for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
                const auto& ids = path.neurons.per_layer[l];
                require(ids.size() == path.weights[l].size(), ErrorKind::Invariant,
                        "decision graph: neuron/weight misalignment");
                for (std::size_t i = 0; i < ids.size(); ++i) {
                    require(ids[i] >= 0 &&
                                ids[i] < static_cast<int>(layer_sizes[l]),
                            ErrorKind::Invariant, "decision graph: neuron id out of range");
                    require(i == 0 || ids[i] > ids[i - 1], ErrorKind::Invariant,
                            "decision graph: neuron ids not strictly ascending");
                    require(path.weights[l][i] > 0.0 && path.weights[l][i] <= 1.0,
                            ErrorKind::Invariant,
                            "decision graph: weight outside (0, 1]");
                    require(path.weights[l][i] > beta, ErrorKind::Invariant,
                            "decision graph: weight at or below beta");
                }
            }
            int last_member = -1;
            for (const GraphMember& member : path.members) {
                require(member.input_id > last_member, ErrorKind::Invariant,
                        "decision graph: member ids not strictly ascending");
                last_member = member.input_id;
                require(member.cdp.per_layer.size() == layer_sizes.size(),
                        ErrorKind::Invariant,
                        "decision graph: member path layer count mismatch");
                require(member.activations.size() == layer_sizes.size(),
                        ErrorKind::Invariant,
                        "decision graph: member activation layer count mismatch");
                for (std::size_t l = 0; l < layer_sizes.size(); ++l) {
                    require(member.activations[l].size() ==
                                path.neurons.per_layer[l].size(),
                            ErrorKind::Invariant,
                            "decision graph: member activations misaligned with path");
                }
            }
        }
    }
}

ExtractedPaths extract_paths(const Model& model, const LabeledDataset& data, double alpha,
                             int threads) {
    require(data.size() > 0, ErrorKind::Config, "extract_paths: empty dataset");
    require(data.example_size() == Tensor::checked_size(model.input_shape()),
            ErrorKind::Config,
            "extract_paths: dataset example size does not match model input");

    const std::size_t layer_count = model.countable_layers().size();
    ExtractedPaths out;
    out.alpha = alpha;
    out.predicted.resize(data.size());
    out.cdps.resize(data.size());
    out.activations.resize(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        const ForwardTrace trace =
            forward(model, data.image(i).reshaped(model.input_shape()));
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        out.predicted[i] = trace.predicted_class();
        out.cdps[i] = extract_cdp(model, rel, alpha);
        out.activations[i].resize(layer_count);
        for (std::size_t c = 0; c < layer_count; ++c) {
            out.activations[i][c] = trace.activations(model, c);
        }
    });
    return out;
}

DecisionGraph build_decision_graph(const Model& model, const LabeledDataset& train,
                                   const GraphBuildOptions& options) {
    return build_decision_graph(model, extract_paths(model, train, options.alpha,
                                                     options.threads), options);
}

DecisionGraph build_decision_graph(const Model& model, const ExtractedPaths& extracted,
                                   const GraphBuildOptions& options) {
    require(!extracted.cdps.empty(), ErrorKind::Config,
            "build_decision_graph: nothing extracted");
    require(extracted.alpha == options.alpha, ErrorKind::Config,
            "build_decision_graph: extraction alpha differs from build alpha");
    require(options.clusters >= 1, ErrorKind::Config,
            "build_decision_graph: clusters must be >= 1");

    const auto& countable = model.countable_layers();
    const std::size_t layer_count = countable.size();

    std::vector<std::vector<int>> class_members(model.num_classes());
    for (std::size_t i = 0; i < extracted.cdps.size(); ++i) {
        class_members[static_cast<std::size_t>(extracted.predicted[i])].push_back(
            static_cast<int>(i));
    }

    DecisionGraph graph;
    graph.alpha = options.alpha;
    graph.beta = options.beta;
    graph.clusters = options.clusters;
    graph.buckets = options.buckets;
    graph.upper_bound = options.upper_bound;
    graph.seed = options.seed;
    graph.num_classes = model.num_classes();
    for (const CountableLayer& layer : countable) graph.layer_sizes.push_back(layer.neurons);
    graph.per_class.resize(model.num_classes());

    for (std::size_t y = 0; y < model.num_classes(); ++y) {
        const std::vector<int>& members = class_members[y];
        if (members.empty()) continue;

        std::vector<std::vector<std::uint8_t>> vectors;
        vectors.reserve(members.size());
        for (int id : members) {
            vectors.push_back(
                cdp_to_binary_vector(extracted.cdps[static_cast<std::size_t>(id)], model));
        }
        const ClassClusters clusters =
            cluster_class(vectors, options.clusters, mix_seed(options.seed, y));

        for (std::size_t j = 0; j < clusters.member_indices.size(); ++j) {
            std::vector<const NeuronSelection*> cluster_cdps;
            cluster_cdps.reserve(clusters.member_indices[j].size());
            for (int pos : clusters.member_indices[j]) {
                const auto id = static_cast<std::size_t>(
                    members[static_cast<std::size_t>(pos)]);
                cluster_cdps.push_back(&extracted.cdps[id].neurons);
            }
            const MergedPath merged = merge_cluster(cluster_cdps, layer_count);
            AbstractPath path = threshold_abstract(merged, options.beta);
            path.class_id = static_cast<int>(y);
            path.cluster_index = static_cast<int>(j);
            path.centroid = clusters.centroids[j];

            for (int pos : clusters.member_indices[j]) {
                const int input_id = members[static_cast<std::size_t>(pos)];
                const auto id = static_cast<std::size_t>(input_id);
                GraphMember member;
                member.input_id = input_id;
                member.cdp = extracted.cdps[id].neurons;
                member.activations.resize(layer_count);
                for (std::size_t l = 0; l < layer_count; ++l) {
                    for (int neuron : path.neurons.per_layer[l]) {
                        member.activations[l].push_back(
                            extracted.activations[id][l][static_cast<std::size_t>(neuron)]);
                    }
                }
                path.members.push_back(std::move(member));
            }
            graph.per_class[y].push_back(std::move(path));
        }
    }

    graph.check();
    return graph;
}

}  // namespace npcov
