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

#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "npcov/abstraction.hpp"
#include "support/oracles.hpp"

using namespace npcov;

namespace {

std::vector<std::vector<double>> grouped_points(std::mt19937_64& rng,
                                                std::size_t groups,
                                                std::size_t per_group,
                                                std::size_t dim) {
    std::vector<std::vector<double>> points;
    for (std::size_t g = 0; g < groups; ++g) {
        std::vector<double> center(dim);
        for (auto& v : center) v = 10.0 * double(g) + uniform01(rng);
        for (std::size_t i = 0; i < per_group; ++i) {
            auto p = center;
            for (auto& v : p) v += 0.01 * gaussian(rng);
            points.push_back(std::move(p));
        }
    }
    return points;
}

NeuronSelection selection(std::vector<std::vector<int>> per_layer) {
    return NeuronSelection{std::move(per_layer)};
}

}  // namespace

TEST_CASE("kmeans with one cluster averages all points") {
    std::mt19937_64 rng(101);
    std::vector<std::vector<double>> points = {{0.0, 0.0}, {2.0, 0.0}, {1.0, 3.0}};
    const KmeansResult result = kmeans(points, 1, rng);
    REQUIRE(result.centroids.size() == 1);
    CHECK(result.centroids[0][0] == doctest::Approx(1.0));
    CHECK(result.centroids[0][1] == doctest::Approx(1.0));
    for (int a : result.assignment) CHECK(a == 0);
}

TEST_CASE("kmeans recovers well-separated groups exactly") {
    std::mt19937_64 rng(102);
    const auto points = grouped_points(rng, 3, 8, 4);
    const KmeansResult result = kmeans(points, 3, rng);
    for (std::size_t g = 0; g < 3; ++g) {
        const int rep = result.assignment[g * 8];
        for (std::size_t i = 0; i < 8; ++i) CHECK(result.assignment[g * 8 + i] == rep);
    }
    std::set<int> used(result.assignment.begin(), result.assignment.end());
    CHECK(used.size() == 3);
}

TEST_CASE("kmeans inertia never increases between iterations") {
    std::mt19937_64 rng(103);
    for (int round = 0; round < 20; ++round) {
        std::vector<std::vector<double>> points;
        const std::size_t n = 12 + std::size_t(uniform_index(rng, 20));
        for (std::size_t i = 0; i < n; ++i) {
            points.push_back({gaussian(rng), gaussian(rng), gaussian(rng)});
        }
        const KmeansResult result = kmeans(points, 4, rng);
        REQUIRE(result.inertia_history.size() == result.iterations);
        for (std::size_t i = 1; i < result.inertia_history.size(); ++i) {
            CHECK(result.inertia_history[i] <= result.inertia_history[i - 1] + 1e-12);
        }
        CHECK(result.inertia == doctest::Approx(result.inertia_history.back()));
    }
}

TEST_CASE("kmeans is deterministic for a fixed generator state") {
    const auto run = [] {
        std::mt19937_64 rng(104);
        const auto points = grouped_points(rng, 4, 6, 5);
        return kmeans(points, 4, rng);
    };
    const KmeansResult a = run();
    const KmeansResult b = run();
    CHECK(a.assignment == b.assignment);
    CHECK(a.centroids == b.centroids);
    CHECK(a.iterations == b.iterations);
}

TEST_CASE("clustering fewer points than k yields singletons") {
    std::vector<std::vector<std::uint8_t>> vectors = {{1, 0, 1}, {0, 1, 1}};
    const ClassClusters clusters = cluster_class(vectors, 4, 9);
    REQUIRE(clusters.member_indices.size() == 2);
    CHECK(clusters.member_indices[0] == std::vector<int>{0});
    CHECK(clusters.member_indices[1] == std::vector<int>{1});
}

TEST_CASE("cluster members are ascending and partition the inputs") {
    std::mt19937_64 rng(105);
    std::vector<std::vector<std::uint8_t>> vectors;
    for (int i = 0; i < 40; ++i) {
        std::vector<std::uint8_t> v(12);
        for (auto& bit : v) bit = uniform01(rng) < 0.4 ? 1 : 0;
        vectors.push_back(std::move(v));
    }
    const ClassClusters clusters = cluster_class(vectors, 5, 11);
    std::vector<int> seen;
    for (const auto& members : clusters.member_indices) {
        CHECK(std::is_sorted(members.begin(), members.end()));
        seen.insert(seen.end(), members.begin(), members.end());
    }
    std::sort(seen.begin(), seen.end());
    std::vector<int> expected(40);
    for (int i = 0; i < 40; ++i) expected[i] = i;
    CHECK(seen == expected);
}

TEST_CASE("merging a single member gives weight one everywhere") {
    const NeuronSelection only = selection({{1, 3}, {0}});
    const MergedPath merged = merge_cluster({&only}, 2);
    CHECK(merged.neurons == only.per_layer);
    for (const auto& layer : merged.weights) {
        for (double w : layer) CHECK(w == 1.0);
    }
}

TEST_CASE("merge weights are membership ratios") {
    const NeuronSelection a = selection({{0, 1}});
    const NeuronSelection b = selection({{0, 2}});
    const NeuronSelection c = selection({{0, 1}});
    const NeuronSelection d = selection({{0, 1, 2}});
    const MergedPath merged = merge_cluster({&a, &b, &c, &d}, 1);
    REQUIRE(merged.neurons[0] == std::vector<int>{0, 1, 2});
    CHECK(merged.weights[0][0] == doctest::Approx(1.0));
    CHECK(merged.weights[0][1] == doctest::Approx(0.75));
    CHECK(merged.weights[0][2] == doctest::Approx(0.5));
}

TEST_CASE("merged neuron sets are the union of the members") {
    std::mt19937_64 rng(106);
    for (int round = 0; round < 50; ++round) {
        std::vector<NeuronSelection> members;
        std::set<int> expected;
        for (int m = 0; m < 4; ++m) {
            std::vector<int> ids;
            for (int id = 0; id < 10; ++id) {
                if (uniform01(rng) < 0.4) {
                    ids.push_back(id);
                    expected.insert(id);
                }
            }
            members.push_back(selection({ids}));
        }
        std::vector<const NeuronSelection*> ptrs;
        for (const auto& m : members) ptrs.push_back(&m);
        const MergedPath merged = merge_cluster(ptrs, 1);
        CHECK(merged.neurons[0] == std::vector<int>(expected.begin(), expected.end()));
        for (double w : merged.weights[0]) {
            CHECK(w > 0.0);
            CHECK(w <= 1.0);
        }
    }
}

TEST_CASE("thresholding keeps exactly the weights strictly above beta") {
    MergedPath merged;
    merged.neurons = {{0, 1, 2, 3}};
    merged.weights = {{1.0, 0.75, 0.5, 0.25}};

    const AbstractPath all = threshold_abstract(merged, 0.0);
    CHECK(all.neurons.per_layer[0] == std::vector<int>{0, 1, 2, 3});

    const AbstractPath mid = threshold_abstract(merged, 0.5);
    CHECK(mid.neurons.per_layer[0] == std::vector<int>{0, 1});

    const AbstractPath top = threshold_abstract(merged, 0.75);
    CHECK(top.neurons.per_layer[0] == std::vector<int>{0});
    CHECK(top.weights[0] == std::vector<double>{1.0});
}

TEST_CASE("raising beta never adds neurons and never widens the path") {
    std::mt19937_64 rng(107);
    const Model model = testsupport::random_dense_model(rng, {6, 12, 10, 4});
    const LabeledDataset train = testsupport::random_suite(rng, model, 150);
    const std::vector<double> betas = {0.0, 0.3, 0.6, 0.9};
    std::vector<DecisionGraph> graphs;
    for (double beta : betas) {
        GraphBuildOptions options;
        options.beta = beta;
        options.clusters = 3;
        options.seed = 21;
        graphs.push_back(build_decision_graph(model, train, options));
    }
    for (std::size_t i = 1; i < graphs.size(); ++i) {
        REQUIRE(graphs[i].per_class.size() == graphs[i - 1].per_class.size());
        for (std::size_t y = 0; y < graphs[i].per_class.size(); ++y) {
            REQUIRE(graphs[i].per_class[y].size() == graphs[i - 1].per_class[y].size());
            for (std::size_t c = 0; c < graphs[i].per_class[y].size(); ++c) {
                const AbstractPath& tight = graphs[i].per_class[y][c];
                const AbstractPath& loose = graphs[i - 1].per_class[y][c];
                CHECK(tight.width(graphs[i].layer_sizes) <=
                      loose.width(graphs[i].layer_sizes) + 1e-12);
                for (std::size_t l = 0; l < tight.neurons.per_layer.size(); ++l) {
                    CHECK(std::includes(loose.neurons.per_layer[l].begin(),
                                        loose.neurons.per_layer[l].end(),
                                        tight.neurons.per_layer[l].begin(),
                                        tight.neurons.per_layer[l].end()));
                }
            }
        }
    }
}

TEST_CASE("k=1 beta=0 abstract path is the union of the class paths") {
    std::mt19937_64 rng(108);
    const Model model = testsupport::random_dense_model(rng, {5, 9, 7, 3});
    const LabeledDataset train = testsupport::random_suite(rng, model, 100);
    GraphBuildOptions options;
    options.clusters = 1;
    options.beta = 0.0;
    const DecisionGraph graph = build_decision_graph(model, train, options);
    const ExtractedPaths extracted = extract_paths(model, train, options.alpha, 1);

    for (std::size_t y = 0; y < graph.num_classes; ++y) {
        std::vector<std::set<int>> expected(graph.layer_sizes.size());
        bool any = false;
        for (std::size_t i = 0; i < train.size(); ++i) {
            if (extracted.predicted[i] != int(y)) continue;
            any = true;
            for (std::size_t l = 0; l < graph.layer_sizes.size(); ++l) {
                for (int id : extracted.cdps[i].neurons.per_layer[l]) {
                    expected[l].insert(id);
                }
            }
        }
        if (!any) {
            CHECK(graph.per_class[y].empty());
            continue;
        }
        REQUIRE(graph.per_class[y].size() == 1);
        const AbstractPath& path = graph.per_class[y][0];
        for (std::size_t l = 0; l < expected.size(); ++l) {
            CHECK(path.neurons.per_layer[l] ==
                  std::vector<int>(expected[l].begin(), expected[l].end()));
        }
    }
}

TEST_CASE("graph invariants hold on built graphs") {
    std::mt19937_64 rng(109);
    const Model model = testsupport::random_dense_model(rng, {6, 10, 8, 4});
    const LabeledDataset train = testsupport::random_suite(rng, model, 160);
    GraphBuildOptions options;
    options.clusters = 3;
    options.beta = 0.4;
    const DecisionGraph graph = build_decision_graph(model, train, options);
    graph.check();

    std::size_t members_total = 0;
    for (const auto& paths : graph.per_class) {
        for (const AbstractPath& path : paths) {
            members_total += path.members.size();
            REQUIRE(path.neurons.per_layer.size() == graph.layer_sizes.size());
            for (std::size_t l = 0; l < path.weights.size(); ++l) {
                REQUIRE(path.weights[l].size() == path.neurons.per_layer[l].size());
                for (std::size_t j = 0; j < path.weights[l].size(); ++j) {
                    const double w = path.weights[l][j];
                    CHECK(w > options.beta);
                    CHECK(w <= 1.0);
                    std::size_t holders = 0;
                    for (const GraphMember& member : path.members) {
                        const auto& ids = member.cdp.per_layer[l];
                        if (std::binary_search(ids.begin(), ids.end(),
                                               path.neurons.per_layer[l][j])) {
                            ++holders;
                        }
                    }
                    CHECK(w == doctest::Approx(double(holders) / double(path.members.size())));
                }
            }
            for (const GraphMember& member : path.members) {
                REQUIRE(member.activations.size() == graph.layer_sizes.size());
                for (std::size_t l = 0; l < member.activations.size(); ++l) {
                    CHECK(member.activations[l].size() == path.neurons.per_layer[l].size());
                }
            }
        }
    }
    CHECK(members_total == train.size());
}

TEST_CASE("extract_paths matches the single-input pipeline") {
    std::mt19937_64 rng(110);
    const Model model = testsupport::random_dense_model(rng, {5, 8, 6, 3});
    const LabeledDataset data = testsupport::random_suite(rng, model, 20);
    const ExtractedPaths batch = extract_paths(model, data, 0.8, 1);
    REQUIRE(batch.cdps.size() == 20);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const ForwardTrace trace = forward(model, data.image(i));
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        const Cdp expected = extract_cdp(model, rel, 0.8);
        CHECK(batch.predicted[i] == trace.predicted_class());
        CHECK(batch.cdps[i].neurons.per_layer == expected.neurons.per_layer);
        CHECK(batch.cdps[i].g_value == expected.g_value);
    }
}

TEST_CASE("extract_paths is thread-count invariant") {
    std::mt19937_64 rng(111);
    const Model model = testsupport::random_dense_model(rng, {6, 9, 7, 3});
    const LabeledDataset data = testsupport::random_suite(rng, model, 60);
    const ExtractedPaths one = extract_paths(model, data, 0.9, 1);
    const ExtractedPaths four = extract_paths(model, data, 0.9, 4);
    CHECK(one.predicted == four.predicted);
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(one.cdps[i].neurons.per_layer == four.cdps[i].neurons.per_layer);
        CHECK(one.activations[i] == four.activations[i]);
    }
}
