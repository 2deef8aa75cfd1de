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

// Generates the committed fixtures: a synthetic 8x8 digit dataset
// (train/test IDX pairs), a small trained multilayer perceptron and a
// seeded untrained convolutional model.

#include <algorithm>
#include <array>
#include <filesystem>
#include <random>
#include <iostream>
#include <string>
#include <vector>

#include "npcov/dataset.hpp"
#include "npcov/model_io.hpp"
#include "npcov/rng.hpp"
#include "npcov/train.hpp"

namespace {

constexpr std::size_t kSide = 8;
constexpr std::size_t kClasses = 10;

const std::array<std::array<const char*, kSide>, kClasses> kGlyphs = {{
    {"........",
     "..####..",
     ".#....#.",
     ".#....#.",
     ".#....#.",
     ".#....#.",
     "..####..",
     "........"},
    {"........",
     "...##...",
     "..###...",
     "...##...",
     "...##...",
     "...##...",
     "..####..",
     "........"},
    {"........",
     "..####..",
     ".#....#.",
     ".....#..",
     "....#...",
     "..##....",
     ".######.",
     "........"},
    {"........",
     "..####..",
     "......#.",
     "...###..",
     "......#.",
     ".#....#.",
     "..####..",
     "........"},
    {"........",
     "....##..",
     "...#.#..",
     "..#..#..",
     ".######.",
     ".....#..",
     ".....#..",
     "........"},
    {"........",
     ".#####..",
     ".#......",
     ".####...",
     "......#.",
     ".#....#.",
     "..####..",
     "........"},
    {"........",
     "..####..",
     ".#......",
     ".#####..",
     ".#....#.",
     ".#....#.",
     "..####..",
     "........"},
    {"........",
     ".######.",
     "......#.",
     ".....#..",
     "....#...",
     "...#....",
     "...#....",
     "........"},
    {"........",
     "..####..",
     ".#....#.",
     "..####..",
     ".#....#.",
     ".#....#.",
     "..####..",
     "........"},
    {"........",
     "..####..",
     ".#....#.",
     ".#....#.",
     "..#####.",
     "......#.",
     "..####..",
     "........"},
}};

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

void render_digit(int digit, std::mt19937_64& rng, double* out) {
    const int dx = static_cast<int>(npcov::uniform_index(rng, 3)) - 1;
    const int dy = static_cast<int>(npcov::uniform_index(rng, 3)) - 1;
    const double intensity = 0.75 + 0.25 * npcov::uniform01(rng);
    const bool hard = npcov::uniform01(rng) < 0.10;
    const double sigma = hard ? 0.55 : 0.18;

    for (std::size_t r = 0; r < kSide; ++r) {
        for (std::size_t c = 0; c < kSide; ++c) {
            const int sr = static_cast<int>(r) - dy;
            const int sc = static_cast<int>(c) - dx;
            double v = 0.0;
            if (sr >= 0 && sr < static_cast<int>(kSide) && sc >= 0 &&
                sc < static_cast<int>(kSide) &&
                kGlyphs[digit][static_cast<std::size_t>(sr)][sc] == '#') {
                v = intensity;
            }
            v += sigma * npcov::gaussian(rng);
            out[r * kSide + c] = clamp01(v);
        }
    }
}

npcov::LabeledDataset make_split(std::size_t count, std::uint64_t seed,
                                 const std::string& name) {
    std::mt19937_64 rng(seed);
    npcov::Tensor images({count, kSide, kSide});
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int digit = static_cast<int>(npcov::uniform_index(rng, kClasses));
        labels[i] = digit;
        render_digit(digit, rng, images.data() + i * kSide * kSide);
    }
    return npcov::LabeledDataset{std::move(images), std::move(labels), name};
}

}  // namespace

int main(int argc, char** argv) {
    const std::string out_dir = argc > 1 ? argv[1] : "fixtures";
    std::filesystem::create_directories(out_dir);

    const npcov::LabeledDataset train = make_split(6000, 0x5eed0001, "train");
    const npcov::LabeledDataset test = make_split(4000, 0x5eed0002, "test");
    npcov::save_dataset(train, out_dir + "/train-images.idx", out_dir + "/train-labels.idx");
    npcov::save_dataset(test, out_dir + "/test-images.idx", out_dir + "/test-labels.idx");

    const std::vector<std::size_t> input_shape{kSide, kSide};
    const std::vector<npcov::LayerSpec> mlp_specs{
        npcov::LayerSpec::flatten(),
        npcov::LayerSpec::dense(48, false),
        npcov::LayerSpec::relu(),
        npcov::LayerSpec::dense(32, false),
        npcov::LayerSpec::relu(),
        npcov::LayerSpec::dense(kClasses, false),
    };
    const npcov::TrainResult trained =
        npcov::train_dense(train, input_shape, mlp_specs, kClasses, 30, 0.05, 0x5eed0003);
    npcov::save_model(trained.model, out_dir + "/mlp.manifest", out_dir + "/mlp.bin");

    const std::vector<npcov::LayerSpec> conv_specs{
        npcov::LayerSpec::conv2d(6, 3, 1, 1, false),
        npcov::LayerSpec::relu(),
        npcov::LayerSpec::max_pool2d(2, 2),
        npcov::LayerSpec::conv2d(8, 3, 1, 1, false),
        npcov::LayerSpec::relu(),
        npcov::LayerSpec::max_pool2d(2, 2),
        npcov::LayerSpec::flatten(),
        npcov::LayerSpec::dense(kClasses, false),
    };
    const npcov::Model conv =
        npcov::make_model({1, kSide, kSide}, conv_specs, kClasses, 0x5eed0004);
    npcov::save_model(conv, out_dir + "/conv.manifest", out_dir + "/conv.bin");

    const double train_acc = npcov::accuracy(trained.model, train);
    const double test_acc = npcov::accuracy(trained.model, test);
    std::cout << "train accuracy " << train_acc << "\n"
              << "test accuracy " << test_acc << "\n"
              << "test errors " << static_cast<std::size_t>((1.0 - test_acc) * 4000)
              << "\n";
    return 0;
}
