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
#include "npcov/coverage.hpp"
#include "support/oracles.hpp"

using namespace npcov;

namespace {

DecisionGraph single_path_graph(std::vector<std::vector<int>> neurons,
                                std::vector<std::size_t> layer_sizes) {
    DecisionGraph graph;
    graph.alpha = 0.9;
    graph.beta = 0.5;
    graph.clusters = 1;
    graph.num_classes = 1;
    graph.layer_sizes = std::move(layer_sizes);
    AbstractPath path;
    path.class_id = 0;
    path.cluster_index = 0;
    path.neurons.per_layer = neurons;
    for (const auto& layer : neurons) {
        path.weights.push_back(std::vector<double>(layer.size(), 1.0));
    }
    graph.per_class.push_back({std::move(path)});
    return graph;
}

Cdp crafted_cdp(std::vector<std::vector<int>> per_layer, int predicted = 0) {
    Cdp x;
    x.neurons.per_layer = std::move(per_layer);
    x.predicted_class = predicted;
    x.alpha = 0.9;
    return x;
}

/// Identity hidden layer feeding a 2-class readout that prefers class 0.
Model two_class_probe_model() {
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({2, 2}, {1.0, 0.0, 0.0, 1.0}), Tensor({2})));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(Tensor({2, 2}, {1.0, 1.0, 0.0, 0.0}), Tensor({2})));
    return Model({2}, std::move(layers), 2);
}

DecisionGraph probe_graph(std::vector<GraphMember> members) {
    DecisionGraph graph;
    graph.alpha = 0.9;
    graph.beta = 0.5;
    graph.clusters = 1;
    graph.num_classes = 2;
    graph.buckets = 10;
    graph.upper_bound = 2.0;
    graph.layer_sizes = {2};
    AbstractPath path;
    path.class_id = 0;
    path.cluster_index = 0;
    path.neurons.per_layer = {{0, 1}};
    path.weights = {{1.0, 1.0}};
    path.members = std::move(members);
    graph.per_class.push_back({std::move(path)});
    graph.per_class.push_back({});
    return graph;
}

GraphMember member_at(int id, std::vector<double> activations,
                      std::vector<int> cdp = {0, 1}) {
    GraphMember m;
    m.input_id = id;
    m.cdp.per_layer = {std::move(cdp)};
    m.activations = {std::move(activations)};
    return m;
}

Model identity_readout_model(std::size_t classes) {
    std::vector<double> w(classes * classes, 0.0);
    for (std::size_t i = 0; i < classes; ++i) w[i * classes + i] = 1.0;
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({classes, classes}, w), Tensor({classes})));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(Tensor({classes, classes}, std::move(w)),
                                  Tensor({classes})));
    return Model({classes}, std::move(layers), classes);
}

LabeledDataset one_hot_suite(std::size_t classes, const std::vector<int>& order) {
    std::vector<double> pixels;
    std::vector<int> labels;
    for (int cls : order) {
        for (std::size_t j = 0; j < classes; ++j) {
            pixels.push_back(j == std::size_t(cls) ? 1.0 : 0.0);
        }
        labels.push_back(cls);
    }
    return LabeledDataset{Tensor({order.size(), classes}, std::move(pixels)), labels,
                          "probe"};
}

}  // namespace

TEST_CASE("jaccard buckets hit the documented edges") {
    const DecisionGraph graph = single_path_graph({{0, 1, 2, 3}}, {4});

    SUBCASE("half overlap lands mid-scale") {
        const auto cells = snpc_cells(crafted_cdp({{0, 1}}), graph, 200);
        REQUIRE(cells.size() == 1);
        CHECK(cells[0] == pack_cell(0, 0, 0, 100));
    }
    SUBCASE("identical sets land in the top bucket") {
        const auto cells = snpc_cells(crafted_cdp({{0, 1, 2, 3}}), graph, 200);
        CHECK(cells[0] == pack_cell(0, 0, 0, 200));
    }
    SUBCASE("disjoint sets fold into the bottom bucket") {
        const auto cells = snpc_cells(crafted_cdp({{4, 5}}), graph, 200);
        CHECK(cells[0] == pack_cell(0, 0, 0, 1));
    }
    SUBCASE("empty input set against a non-empty path is disjoint") {
        const auto cells = snpc_cells(crafted_cdp({{}}), graph, 200);
        CHECK(cells[0] == pack_cell(0, 0, 0, 1));
    }
}

TEST_CASE("two empty sets count as a perfect match") {
    const DecisionGraph graph = single_path_graph({{}}, {4});
    const auto cells = snpc_cells(crafted_cdp({{}}), graph, 25);
    REQUIRE(cells.size() == 1);
    CHECK(cells[0] == pack_cell(0, 0, 0, 25));
}

TEST_CASE("bucket boundaries follow exact interval arithmetic") {
    const DecisionGraph graph = single_path_graph({{0, 1, 2}}, {8});
    // J = 1/3 with m = 3: (1/3) lies in (0/3, 1/3], bucket 1.
    auto cells = snpc_cells(crafted_cdp({{0}}), graph, 3);
    CHECK(cells[0] == pack_cell(0, 0, 0, 1));
    // J = 2/4 with m = 3: 0.5 lies in (1/3, 2/3], bucket 2.
    cells = snpc_cells(crafted_cdp({{0, 1, 3}}), graph, 3);
    CHECK(cells[0] == pack_cell(0, 0, 0, 2));
}

TEST_CASE("snpc cells agree with brute-force enumeration") {
    std::mt19937_64 rng(201);
    for (int round = 0; round < 10; ++round) {
        const Model model = testsupport::random_dense_model(rng, {6, 10, 8, 3});
        const LabeledDataset train = testsupport::random_suite(rng, model, 80);
        GraphBuildOptions options;
        options.clusters = 2;
        options.seed = std::uint64_t(round);
        const DecisionGraph graph = build_decision_graph(model, train, options);

        const LabeledDataset probe = testsupport::random_suite(rng, model, 30);
        const ExtractedPaths extracted = extract_paths(model, probe, options.alpha, 1);

        const std::set<std::uint64_t> expected =
            testsupport::brute_snpc_cells(extracted.cdps, graph, 40);

        std::set<std::uint64_t> actual;
        for (const Cdp& x : extracted.cdps) {
            const auto cells = snpc_cells(x, graph, 40);
            actual.insert(cells.begin(), cells.end());
        }
        CHECK(actual == expected);
    }
}

TEST_CASE("a single input covers one bucket per layer and cluster") {
    const Model model = two_class_probe_model();
    const LabeledDataset suite{Tensor({1, 2}, {0.6, 0.8}), {0}, "probe"};
    const DecisionGraph graph = probe_graph({member_at(0, {0.0, 0.0})});

    CoverageConfig config;
    config.criterion = Criterion::Snpc;
    config.buckets = 10;
    const CoverageState state = coverage(model, suite, &graph, nullptr, config);
    CHECK(state.denominator == 2 * 1 * 1 * 10);
    CHECK(state.cells.size() == 1);
    CHECK(state.coverage() == doctest::Approx(0.05));
    CHECK(state.skipped_inputs == 0);
}

TEST_CASE("anpc distance buckets scale to the upper bound") {
    const Model model = two_class_probe_model();
    const ForwardTrace trace = forward(model, Tensor({2}, {0.6, 0.8}));
    const Cdp x = crafted_cdp({{0, 1}});

    SUBCASE("unit distance on a [0,2] scale is the middle bucket") {
        const DecisionGraph graph = probe_graph({member_at(0, {0.0, 0.0})});
        const auto cells = anpc_cells(trace, x, model, graph, 10, 2.0);
        REQUIRE(cells.size() == 1);
        CHECK(cells[0] == pack_cell(0, 0, 0, 5));
    }
    SUBCASE("zero distance falls into the bottom bucket") {
        const DecisionGraph graph = probe_graph({member_at(0, {0.6, 0.8})});
        const auto cells = anpc_cells(trace, x, model, graph, 10, 2.0);
        CHECK(cells[0] == pack_cell(0, 0, 0, 1));
    }
    SUBCASE("distances past the upper bound clamp to the top bucket") {
        const DecisionGraph graph = probe_graph({member_at(0, {-0.9, -1.2})});
        const auto cells = anpc_cells(trace, x, model, graph, 10, 2.0);
        CHECK(cells[0] == pack_cell(0, 0, 0, 10));
    }
}

TEST_CASE("anpc compares against the most similar member") {
    const Model model = two_class_probe_model();
    const ForwardTrace trace = forward(model, Tensor({2}, {0.6, 0.8}));
    const Cdp x = crafted_cdp({{0, 1}});

    SUBCASE("higher whole-path similarity wins") {
        const DecisionGraph graph = probe_graph(
            {member_at(0, {0.0, 0.0}, {0}), member_at(1, {0.6, 0.8}, {0, 1})});
        const auto cells = anpc_cells(trace, x, model, graph, 10, 2.0);
        CHECK(cells[0] == pack_cell(0, 0, 0, 1));
    }
    SUBCASE("ties resolve to the earliest member") {
        const DecisionGraph graph =
            probe_graph({member_at(0, {0.0, 0.0}), member_at(1, {0.6, 0.8})});
        const auto cells = anpc_cells(trace, x, model, graph, 10, 2.0);
        CHECK(cells[0] == pack_cell(0, 0, 0, 5));
    }
}

TEST_CASE("an empty abstract layer emits no anpc cell") {
    const Model model = two_class_probe_model();
    const ForwardTrace trace = forward(model, Tensor({2}, {0.6, 0.8}));

    DecisionGraph graph = probe_graph({member_at(0, {0.0, 0.0})});
    graph.per_class[0][0].neurons.per_layer = {{}};
    graph.per_class[0][0].weights = {{}};
    graph.per_class[0][0].members[0].activations = {{}};
    graph.per_class[0][0].members[0].cdp.per_layer = {{}};

    const auto cells = anpc_cells(trace, crafted_cdp({{0, 1}}), model, graph, 10, 2.0);
    CHECK(cells.empty());

    CoverageConfig config;
    config.criterion = Criterion::Anpc;
    config.buckets = 10;
    const LabeledDataset suite{Tensor({1, 2}, {0.6, 0.8}), {0}, "probe"};
    const CoverageState state = coverage(model, suite, &graph, nullptr, config);
    CHECK(state.cells.empty());
    CHECK(state.unreachable_cells >= 10);
}

TEST_CASE("inputs of classes missing from the graph are skipped and counted") {
    std::mt19937_64 rng(202);
    const Model model = testsupport::random_dense_model(rng, {6, 10, 8, 3});
    const LabeledDataset pool = testsupport::random_suite(rng, model, 200);
    const ExtractedPaths extracted = extract_paths(model, pool, 0.9, 1);

    std::vector<std::size_t> class0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (extracted.predicted[i] == 0) class0.push_back(i);
    }
    REQUIRE(class0.size() >= 5);
    const LabeledDataset only0 = testsupport::subset(pool, class0);

    GraphBuildOptions options;
    options.clusters = 2;
    const DecisionGraph graph = build_decision_graph(model, only0, options);
    REQUIRE(graph.per_class[1].empty());
    REQUIRE(graph.per_class[2].empty());

    CoverageConfig config;
    config.criterion = Criterion::Snpc;
    config.buckets = 15;
    const CoverageState state = coverage(model, pool, &graph, nullptr, config);
    CHECK(state.skipped_inputs > 0);
    CHECK(state.skipped_inputs == pool.size() - class0.size());

    std::size_t missing_clusters = 0;
    for (const auto& paths : graph.per_class) {
        missing_clusters += graph.clusters - paths.size();
    }
    CHECK(state.unreachable_cells ==
          missing_clusters * graph.layer_sizes.size() * config.buckets);
    CHECK(state.coverage() > 0.0);
}

TEST_CASE("neuron coverage is zero for an all-zero network") {
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(Tensor({3, 2}), Tensor({3})));
    layers.push_back(Layer::relu());
    layers.push_back(Layer::dense(Tensor({2, 3}), Tensor({2})));
    const Model model({2}, std::move(layers), 2);
    const LabeledDataset suite{Tensor({2, 2}, {0.3, 0.9, 0.5, 0.1}), {0, 1}, "probe"};

    CoverageConfig config;
    config.criterion = Criterion::Nc;
    const CoverageState state = coverage(model, suite, nullptr, nullptr, config);
    CHECK(state.denominator == 3);
    CHECK(state.cells.empty());
    CHECK(state.coverage() == 0.0);
}

TEST_CASE("neuron coverage counts strictly positive hidden units") {
    const Model model = two_class_probe_model();
    const LabeledDataset suite{Tensor({1, 2}, {0.5, 0.0}), {0}, "probe"};
    CoverageConfig config;
    config.criterion = Criterion::Nc;
    const CoverageState state = coverage(model, suite, nullptr, nullptr, config);
    CHECK(state.denominator == 2);
    CHECK(state.cells.size() == 1);
    CHECK(state.coverage() == doctest::Approx(0.5));
}

TEST_CASE("kmnc covers one section per neuron for a single input") {
    const Model model = two_class_probe_model();
    const LabeledDataset suite{Tensor({1, 2}, {0.5, 0.25}), {0}, "probe"};
    const ActivationProfile profile = profile_activations(model, suite, 1);

    CoverageConfig config;
    config.criterion = Criterion::Kmnc;
    config.kmnc_sections = 40;
    const CoverageState state = coverage(model, suite, nullptr, &profile, config);
    CHECK(state.denominator == 2 * 40);
    CHECK(state.cells.size() == 2);
    CHECK(state.coverage() == doctest::Approx(1.0 / 40.0));
}

TEST_CASE("nbc is zero on the profiling set and fires outside it") {
    const Model model = two_class_probe_model();
    const LabeledDataset base{Tensor({2, 2}, {0.2, 0.4, 0.6, 0.1}), {0, 0}, "base"};
    const ActivationProfile profile = profile_activations(model, base, 1);

    CoverageConfig config;
    config.criterion = Criterion::Nbc;
    CHECK(coverage(model, base, nullptr, &profile, config).coverage() == 0.0);

    const LabeledDataset wild{Tensor({1, 2}, {5.0, 0.2}), {0}, "wild"};
    const CoverageState state = coverage(model, wild, nullptr, &profile, config);
    CHECK(state.denominator == 2 * 2);
    CHECK(state.cells.size() == 1);
}

TEST_CASE("output impartiality is exact at the extremes") {
    const Model model = identity_readout_model(4);
    CHECK(output_impartiality(model, one_hot_suite(4, {2, 2, 2, 2, 2}), 1) == 0.0);
    CHECK(output_impartiality(model, one_hot_suite(4, {0, 1, 2, 3}), 1) == 1.0);
    CHECK(output_impartiality(model, one_hot_suite(4, {0, 0, 1, 1}), 1) ==
          doctest::Approx(0.5));

    const Model lone = identity_readout_model(1);
    const LabeledDataset any{Tensor({1, 1}, {0.7}), {0}, "probe"};
    CHECK(output_impartiality(lone, any, 1) == 1.0);
}

TEST_CASE("coverage states merge by cell union") {
    std::mt19937_64 rng(203);
    const Model model = testsupport::random_dense_model(rng, {6, 9, 7, 3});
    const LabeledDataset train = testsupport::random_suite(rng, model, 100);
    GraphBuildOptions options;
    options.clusters = 2;
    const DecisionGraph graph = build_decision_graph(model, train, options);

    const LabeledDataset whole = testsupport::random_suite(rng, model, 60);
    std::vector<std::size_t> front, back;
    for (std::size_t i = 0; i < 30; ++i) front.push_back(i);
    for (std::size_t i = 30; i < 60; ++i) back.push_back(i);

    CoverageConfig config;
    config.criterion = Criterion::Snpc;
    config.buckets = 25;
    CoverageState a = coverage(model, testsupport::subset(whole, front), &graph,
                               nullptr, config);
    const CoverageState b = coverage(model, testsupport::subset(whole, back), &graph,
                                     nullptr, config);
    const CoverageState all = coverage(model, whole, &graph, nullptr, config);
    a.merge(b);
    CHECK(a.cells == all.cells);
    CHECK(a.coverage() == all.coverage());

    CoverageState other = all;
    other.buckets = 26;
    CHECK_THROWS_AS(a.merge(other), Error);
}

TEST_CASE("coverage is idempotent, monotone, and order independent") {
    std::mt19937_64 rng(204);
    const Model model = testsupport::random_dense_model(rng, {5, 8, 6, 3});
    const LabeledDataset train = testsupport::random_suite(rng, model, 90);
    GraphBuildOptions options;
    options.clusters = 2;
    const DecisionGraph graph = build_decision_graph(model, train, options);

    const LabeledDataset suite = testsupport::random_suite(rng, model, 40);
    CoverageConfig config;
    config.criterion = Criterion::Snpc;
    config.buckets = 30;

    const CoverageState once = coverage(model, suite, &graph, nullptr, config);

    std::vector<std::size_t> doubled;
    for (std::size_t i = 0; i < suite.size(); ++i) doubled.push_back(i);
    for (std::size_t i = 0; i < suite.size(); ++i) doubled.push_back(i);
    const CoverageState twice =
        coverage(model, testsupport::subset(suite, doubled), &graph, nullptr, config);
    CHECK(twice.cells == once.cells);

    std::vector<std::size_t> perm;
    for (std::size_t i = 0; i < suite.size(); ++i) perm.push_back(i);
    shuffle(perm, rng);
    const CoverageState shuffled =
        coverage(model, testsupport::subset(suite, perm), &graph, nullptr, config);
    CHECK(shuffled.cells == once.cells);

    std::vector<std::size_t> prefix;
    for (std::size_t i = 0; i < 20; ++i) prefix.push_back(i);
    const CoverageState partial =
        coverage(model, testsupport::subset(suite, prefix), &graph, nullptr, config);
    CHECK(std::includes(once.cells.begin(), once.cells.end(), partial.cells.begin(),
                        partial.cells.end()));
    CHECK(partial.coverage() <= once.coverage());
}

TEST_CASE("coverage is independent of the thread count") {
    std::mt19937_64 rng(205);
    const Model model = testsupport::random_dense_model(rng, {6, 9, 7, 3});
    const LabeledDataset train = testsupport::random_suite(rng, model, 100);
    GraphBuildOptions options;
    options.clusters = 2;
    const DecisionGraph graph = build_decision_graph(model, train, options);
    const LabeledDataset suite = testsupport::random_suite(rng, model, 50);

    for (Criterion criterion : {Criterion::Snpc, Criterion::Anpc, Criterion::Nc}) {
        CoverageConfig config;
        config.criterion = criterion;
        config.buckets = 20;
        config.threads = 1;
        const CoverageState serial = coverage(model, suite, &graph, nullptr, config);
        config.threads = 4;
        const CoverageState parallel = coverage(model, suite, &graph, nullptr, config);
        CHECK(serial.cells == parallel.cells);
        CHECK(serial.skipped_inputs == parallel.skipped_inputs);
    }
}

TEST_CASE("a training set scores positive coverage on its own graph") {
    std::mt19937_64 rng(206);
    const Model model = testsupport::random_dense_model(rng, {6, 10, 8, 4});
    const LabeledDataset train = testsupport::random_suite(rng, model, 120);
    GraphBuildOptions options;
    options.clusters = 2;
    const DecisionGraph graph = build_decision_graph(model, train, options);

    for (Criterion criterion : {Criterion::Snpc, Criterion::Anpc}) {
        CoverageConfig config;
        config.criterion = criterion;
        const CoverageState state = coverage(model, train, &graph, nullptr, config);
        CHECK(state.coverage() > 0.0);
        CHECK(state.coverage() <= 1.0);
    }
}
