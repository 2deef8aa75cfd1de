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

#include "npcov/lrp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace npcov {
namespace {

double stabilized(double z, double epsilon) {
    if (z > 0.0) return z + epsilon;
    if (z < 0.0) return z - epsilon;
    return 0.0;  // exact zero stays zero; the path contributes no relevance
}

// R_i = Σ_j (a_i w_ij / (z_j + ε sign z_j)) R_j
Tensor backward_dense(const Layer& layer, const Tensor& in, const Tensor& z,
                      const Tensor& rel_out, double epsilon) {
    const std::size_t out = layer.weights.extent(0);
    const std::size_t n = layer.weights.extent(1);
    Tensor rel_in(in.shape());
    const double* w = layer.weights.data();
    const double* a = in.data();
    for (std::size_t j = 0; j < out; ++j) {
        if (rel_out[j] == 0.0) continue;
        const double denom = stabilized(z[j], epsilon);
        if (denom == 0.0) continue;
        const double f = rel_out[j] / denom;
        const double* row = w + j * n;
        for (std::size_t i = 0; i < n; ++i) rel_in[i] += a[i] * row[i] * f;
    }
    return rel_in;
}

Tensor backward_conv2d(const Layer& layer, const Tensor& in, const Tensor& z,
                       const Tensor& rel_out, double epsilon) {
    const std::size_t out_ch = z.extent(0), oh = z.extent(1), ow = z.extent(2);
    const std::size_t in_ch = in.extent(0), ih = in.extent(1), iw = in.extent(2);
    const std::size_t kh = layer.weights.extent(2), kw = layer.weights.extent(3);
    Tensor rel_in(in.shape());
    for (std::size_t oc = 0; oc < out_ch; ++oc) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double r = rel_out.at3(oc, oy, ox);
                if (r == 0.0) continue;
                const double denom = stabilized(z.at3(oc, oy, ox), epsilon);
                if (denom == 0.0) continue;
                const double f = r / denom;
                const long base_y = static_cast<long>(oy) * layer.stride - layer.padding;
                const long base_x = static_cast<long>(ox) * layer.stride - layer.padding;
                for (std::size_t ic = 0; ic < in_ch; ++ic) {
                    for (std::size_t ky = 0; ky < kh; ++ky) {
                        const long y = base_y + static_cast<long>(ky);
                        if (y < 0 || y >= static_cast<long>(ih)) continue;
                        for (std::size_t kx = 0; kx < kw; ++kx) {
                            const long x = base_x + static_cast<long>(kx);
                            if (x < 0 || x >= static_cast<long>(iw)) continue;
                            rel_in.at3(ic, static_cast<std::size_t>(y),
                                       static_cast<std::size_t>(x)) +=
                                in.at3(ic, static_cast<std::size_t>(y),
                                       static_cast<std::size_t>(x)) *
                                layer.weights[((oc * in_ch + ic) * kh + ky) * kw + kx] * f;
                        }
                    }
                }
            }
        }
    }
    return rel_in;
}

// Winner-takes-all routing; ties split equally for determinism.
Tensor backward_maxpool(const Layer& layer, const Tensor& in, const Tensor& rel_out) {
    const std::size_t ch = rel_out.extent(0), oh = rel_out.extent(1), ow = rel_out.extent(2);
    Tensor rel_in(in.shape());
    for (std::size_t c = 0; c < ch; ++c) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const double r = rel_out.at3(c, oy, ox);
                if (r == 0.0) continue;
                double best = -std::numeric_limits<double>::infinity();
                int ties = 0;
                for (int ky = 0; ky < layer.kernel; ++ky) {
                    for (int kx = 0; kx < layer.kernel; ++kx) {
                        const double v = in.at3(c, oy * layer.stride + ky,
                                                ox * layer.stride + kx);
                        if (v > best) {
                            best = v;
                            ties = 1;
                        } else if (v == best) {
                            ++ties;
                        }
                    }
                }
                const double share = r / ties;
                for (int ky = 0; ky < layer.kernel; ++ky) {
                    for (int kx = 0; kx < layer.kernel; ++kx) {
                        if (in.at3(c, oy * layer.stride + ky, ox * layer.stride + kx) == best) {
                            rel_in.at3(c, oy * layer.stride + ky, ox * layer.stride + kx) +=
                                share;
                        }
                    }
                }
            }
        }
    }
    return rel_in;
}

std::vector<double> aggregate_countable(const Layer& layer, const Tensor& rel) {
    if (layer.kind == LayerKind::Dense) return rel.values();
    const std::size_t ch = rel.extent(0);
    const std::size_t plane = rel.extent(1) * rel.extent(2);
    std::vector<double> sums(ch, 0.0);
    for (std::size_t c = 0; c < ch; ++c) {
        const double* base = rel.data() + c * plane;
        double s = 0.0;
        for (std::size_t i = 0; i < plane; ++i) s += base[i];
        sums[c] = s;
    }
    return sums;
}

}  // namespace

RelevanceTrace::RelevanceTrace(std::vector<std::vector<double>> countable,
                               Tensor input_relevance, int target, double seed_value)
    : countable_(std::move(countable)),
      input_relevance_(std::move(input_relevance)),
      target_(target),
      seed_value_(seed_value) {}

double RelevanceTrace::worst_conservation_error() const {
    const double scale = std::max(1.0, std::abs(seed_value_));
    double worst = 0.0;
    auto check = [&](double sum) {
        worst = std::max(worst, std::abs(sum - seed_value_) / scale);
    };
    for (const auto& layer : countable_) {
        double sum = 0.0;
        for (double r : layer) sum += r;
        check(sum);
    }
    double sum = 0.0;
    for (double r : input_relevance_.values()) sum += r;
    check(sum);
    return worst;
}

RelevanceTrace relevance(const Model& model, const ForwardTrace& trace, int target,
                         const LrpOptions& options) {
    require(target >= 0 && target < static_cast<int>(model.num_classes()),
            ErrorKind::Config, "relevance: target class out of range");
    return relevance_seeded(model, trace, target,
                            trace.logits()[static_cast<std::size_t>(target)], options);
}

RelevanceTrace relevance_seeded(const Model& model, const ForwardTrace& trace,
                                int target, double seed_value,
                                const LrpOptions& options) {
    require(target >= 0 && target < static_cast<int>(model.num_classes()),
            ErrorKind::Config, "relevance: target class out of range");
    const auto& layers = model.layers();

    Tensor rel(std::vector<std::size_t>{model.num_classes()});
    rel[static_cast<std::size_t>(target)] = seed_value;

    std::vector<std::vector<double>> countable(model.countable_layers().size());
    std::vector<int> countable_of(layers.size(), -1);
    for (std::size_t c = 0; c < model.countable_layers().size(); ++c) {
        countable_of[model.countable_layers()[c].layer_index] = static_cast<int>(c);
    }

    for (std::size_t i = layers.size(); i-- > 0;) {
        // `rel` holds the relevance of layer i's output here.
        if (countable_of[i] >= 0) {
            countable[static_cast<std::size_t>(countable_of[i])] =
                aggregate_countable(layers[i], rel);
        }
        const Tensor& in = i == 0 ? trace.input() : trace.layer_output(i - 1);
        switch (layers[i].kind) {
            case LayerKind::Dense:
                rel = backward_dense(layers[i], in, trace.layer_output(i), rel,
                                     options.epsilon);
                break;
            case LayerKind::Conv2d:
                rel = backward_conv2d(layers[i], in, trace.layer_output(i), rel,
                                      options.epsilon);
                break;
            case LayerKind::Relu:
                break;  // relevance passes through unchanged
            case LayerKind::MaxPool2d:
                rel = backward_maxpool(layers[i], in, rel);
                break;
            case LayerKind::Flatten:
                rel = rel.reshaped(std::vector<std::size_t>(in.shape()));
                break;
        }
    }

    return RelevanceTrace(std::move(countable), std::move(rel), target, seed_value);
}

}  // namespace npcov
