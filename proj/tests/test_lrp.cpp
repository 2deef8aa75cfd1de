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

#include <cmath>
#include <random>

#include "npcov/lrp.hpp"
#include "support/oracles.hpp"

using namespace npcov;

TEST_CASE("single identity dense layer routes relevance to the active input") {
    Tensor w({2, 2}, {1.0, 0.0, 0.0, 1.0});
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(std::move(w), Tensor({2})));
    const Model model({2}, std::move(layers), 2);
    const ForwardTrace trace = forward(model, Tensor({2}, {0.3, 0.7}));
    const RelevanceTrace rel = relevance(model, trace, 1);
    CHECK(rel.seed_value() == 0.7);
    CHECK(rel.input_relevance()[0] == 0.0);
    // The epsilon stabilizer damps each step by z/(z + eps).
    CHECK(rel.input_relevance()[1] == doctest::Approx(0.7).epsilon(1e-5));
    CHECK(rel.countable_count() == 0);
}

TEST_CASE("seed equals the predicted logit exactly") {
    std::mt19937_64 rng(31);
    const Model model = testsupport::random_dense_model(rng, {5, 7, 6, 3});
    for (int round = 0; round < 10; ++round) {
        const ForwardTrace trace = forward(model, testsupport::random_input(rng, {5}));
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        CHECK(rel.seed_value() == trace.predicted_logit());
    }
}

TEST_CASE("bias-free networks conserve relevance almost exactly") {
    std::mt19937_64 rng(32);
    for (int round = 0; round < 30; ++round) {
        const Model model = testsupport::random_dense_model(rng, {6, 9, 7, 4}, false);
        const ForwardTrace trace = forward(model, testsupport::random_input(rng, {6}));
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        CHECK(rel.worst_conservation_error() < 1e-4);
    }
}

TEST_CASE("linearity in the seed value") {
    std::mt19937_64 rng(33);
    const Model model = testsupport::random_dense_model(rng, {6, 8, 5, 3});
    for (int round = 0; round < 10; ++round) {
        const ForwardTrace trace = forward(model, testsupport::random_input(rng, {6}));
        const int target = trace.predicted_class();
        const RelevanceTrace base = relevance(model, trace, target);
        const double c = 2.5;
        const RelevanceTrace scaled =
            relevance_seeded(model, trace, target, c * base.seed_value());
        for (std::size_t l = 0; l < base.countable_count(); ++l) {
            for (std::size_t i = 0; i < base.countable(l).size(); ++i) {
                CHECK(std::abs(scaled.countable(l)[i] - c * base.countable(l)[i]) < 1e-9);
            }
        }
        for (std::size_t i = 0; i < base.input_relevance().size(); ++i) {
            CHECK(std::abs(scaled.input_relevance()[i] -
                           c * base.input_relevance()[i]) < 1e-9);
        }
    }
}

TEST_CASE("zero input to a bias-free network yields zero relevance everywhere") {
    std::mt19937_64 rng(34);
    const Model model = testsupport::random_dense_model(rng, {5, 6, 4}, false);
    const ForwardTrace trace = forward(model, Tensor({5}));
    const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
    for (std::size_t l = 0; l < rel.countable_count(); ++l) {
        for (double r : rel.countable(l)) CHECK(r == 0.0);
    }
    for (std::size_t i = 0; i < rel.input_relevance().size(); ++i) {
        CHECK(rel.input_relevance()[i] == 0.0);
    }
}

TEST_CASE("an exactly zero pre-activation contributes no relevance") {
    Tensor w({1, 2}, {1.0, -1.0});
    std::vector<Layer> layers;
    layers.push_back(Layer::dense(std::move(w), Tensor({1})));
    const Model model({2}, std::move(layers), 1);
    const ForwardTrace trace = forward(model, Tensor({2}, {0.5, 0.5}));
    CHECK(trace.logits()[0] == 0.0);
    const RelevanceTrace rel = relevance(model, trace, 0);
    CHECK(rel.input_relevance()[0] == 0.0);
    CHECK(rel.input_relevance()[1] == 0.0);
}

TEST_CASE("max pooling splits relevance equally among tied winners") {
    std::vector<Layer> layers;
    layers.push_back(Layer::max_pool2d(2, 2));
    layers.push_back(Layer::flatten());
    layers.push_back(Layer::dense(Tensor({1, 1}, {1.0}), Tensor({1})));
    const Model model({1, 2, 2}, std::move(layers), 1);
    const ForwardTrace trace = forward(model, Tensor({1, 2, 2}, {0.6, 0.6, 0.6, 0.6}));
    const RelevanceTrace rel = relevance(model, trace, 0);
    const double g = trace.predicted_logit();
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rel.input_relevance()[i] == doctest::Approx(g / 4.0).epsilon(1e-5));
    }
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) total += rel.input_relevance()[i];
    CHECK(total == doctest::Approx(g).epsilon(1e-5));
}

TEST_CASE("relevance validates the target class") {
    std::mt19937_64 rng(35);
    const Model model = testsupport::random_dense_model(rng, {4, 5, 3});
    const ForwardTrace trace = forward(model, testsupport::random_input(rng, {4}));
    CHECK_THROWS_AS(relevance(model, trace, 3), Error);
    CHECK_THROWS_AS(relevance(model, trace, -1), Error);
}

TEST_CASE("relevance matches the naive reference on random dense models") {
    std::mt19937_64 rng(36);
    for (int round = 0; round < 25; ++round) {
        const Model model = testsupport::random_dense_model(rng, {6, 10, 8, 4});
        const Tensor x = testsupport::random_input(rng, {6});
        const ForwardTrace trace = forward(model, x);
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        const auto naive_t = testsupport::naive_forward(model, x.values(), x.shape());
        const auto naive_r = testsupport::naive_lrp(model, naive_t, trace.predicted_class());

        REQUIRE(rel.countable_count() == naive_r.countable.size());
        for (std::size_t l = 0; l < rel.countable_count(); ++l) {
            REQUIRE(rel.countable(l).size() == naive_r.countable[l].size());
            for (std::size_t i = 0; i < rel.countable(l).size(); ++i) {
                CHECK(std::abs(rel.countable(l)[i] - naive_r.countable[l][i]) < 1e-9);
            }
        }
        for (std::size_t i = 0; i < rel.input_relevance().size(); ++i) {
            CHECK(std::abs(rel.input_relevance()[i] - naive_r.input[i]) < 1e-9);
        }
    }
}

TEST_CASE("relevance matches the naive reference on random conv models") {
    std::mt19937_64 rng(37);
    for (int round = 0; round < 10; ++round) {
        const Model model = testsupport::random_conv_model(rng, 6, 3, 4);
        const Tensor x = testsupport::random_input(rng, {1, 6, 6});
        const ForwardTrace trace = forward(model, x);
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        const auto naive_t = testsupport::naive_forward(model, x.values(), x.shape());
        const auto naive_r = testsupport::naive_lrp(model, naive_t, trace.predicted_class());

        REQUIRE(rel.countable_count() == naive_r.countable.size());
        for (std::size_t l = 0; l < rel.countable_count(); ++l) {
            for (std::size_t i = 0; i < rel.countable(l).size(); ++i) {
                CHECK(std::abs(rel.countable(l)[i] - naive_r.countable[l][i]) < 1e-9);
            }
        }
        for (std::size_t i = 0; i < rel.input_relevance().size(); ++i) {
            CHECK(std::abs(rel.input_relevance()[i] - naive_r.input[i]) < 1e-9);
        }
    }
}
