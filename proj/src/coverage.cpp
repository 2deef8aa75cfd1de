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

#include "npcov/coverage.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npcov/lrp.hpp"
#include "npcov/parallel.hpp"

namespace npcov {
namespace {

constexpr std::uint64_t kFieldBits = 16;
constexpr std::uint64_t kFieldMask = (1ull << kFieldBits) - 1;

std::size_t jaccard_bucket(std::size_t intersection, std::size_t unions, std::size_t m) {
    if (unions == 0) return m;          // both sets empty: J = 1
    if (intersection == 0) return 1;    // J = 0 folds into the first bucket
    return (intersection * m + unions - 1) / unions;  // ceil(J * m), exact
}

std::size_t distance_bucket(double d, std::size_t m, double upper_bound) {
    if (d <= 0.0) return 1;
    const auto raw = static_cast<long long>(
        std::ceil(d * static_cast<double>(m) / upper_bound));
    if (raw < 1) return 1;
    return std::min<std::size_t>(static_cast<std::size_t>(raw), m);
}

/// Cells a graph can never produce, given the configured denominator.
std::size_t count_unreachable(const DecisionGraph& graph, Criterion criterion,
                              std::size_t m) {
    const std::size_t layers = graph.layer_sizes.size();
    std::size_t unreachable = 0;
    for (const auto& paths : graph.per_class) {
        unreachable += (graph.clusters - paths.size()) * layers * m;
        if (criterion == Criterion::Anpc) {
            for (const AbstractPath& path : paths) {
                unreachable += path.empty_layers() * m;
            }
        }
    }
    return unreachable;
}

}  // namespace

const char* to_string(Criterion c) {
    switch (c) {
        case Criterion::Snpc: return "snpc";
        case Criterion::Anpc: return "anpc";
        case Criterion::Nc: return "nc";
        case Criterion::Kmnc: return "kmnc";
        case Criterion::Nbc: return "nbc";
        case Criterion::Impartiality: return "impartiality";
    }
    return "?";
}

Criterion criterion_from_string(const std::string& name) {
    if (name == "snpc") return Criterion::Snpc;
    if (name == "anpc") return Criterion::Anpc;
    if (name == "nc") return Criterion::Nc;
    if (name == "kmnc") return Criterion::Kmnc;
    if (name == "nbc") return Criterion::Nbc;
    if (name == "impartiality") return Criterion::Impartiality;
    fail(ErrorKind::Config, "unknown criterion '" + name + "'");
}

std::uint64_t pack_cell(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                        std::uint64_t d) {
    require(a <= kFieldMask && b <= kFieldMask && c <= kFieldMask && d <= kFieldMask,
            ErrorKind::Invariant, "coverage cell field overflow");
    return (a << (3 * kFieldBits)) | (b << (2 * kFieldBits)) | (c << kFieldBits) | d;
}

double CoverageState::coverage() const {
    if (denominator == 0) return 0.0;
    return static_cast<double>(cells.size()) / static_cast<double>(denominator);
}

void CoverageState::merge(const CoverageState& other) {
    require(criterion == other.criterion && buckets == other.buckets &&
                upper_bound == other.upper_bound && nc_threshold == other.nc_threshold &&
                kmnc_sections == other.kmnc_sections &&
                denominator == other.denominator,
            ErrorKind::Config, "coverage merge: configurations differ");
    cells.insert(other.cells.begin(), other.cells.end());
    skipped_inputs += other.skipped_inputs;
}

std::vector<std::uint64_t> snpc_cells(const Cdp& x, const DecisionGraph& graph,
                                      std::size_t m) {
    require(m >= 1, ErrorKind::Config, "snpc_cells: bucket count must be >= 1");
    const auto y = static_cast<std::size_t>(x.predicted_class);
    require(y < graph.per_class.size(), ErrorKind::Config,
            "snpc_cells: predicted class outside graph");
    std::vector<std::uint64_t> out;
    for (const AbstractPath& path : graph.per_class[y]) {
        for (std::size_t l = 0; l < graph.layer_sizes.size(); ++l) {
            std::size_t intersection = 0, unions = 0;
            layer_overlap(x.neurons.per_layer[l], path.neurons.per_layer[l],
                          intersection, unions);
            out.push_back(pack_cell(y, static_cast<std::uint64_t>(path.cluster_index), l,
                                    jaccard_bucket(intersection, unions, m)));
        }
    }
    return out;
}

std::vector<std::uint64_t> anpc_cells(const ForwardTrace& trace, const Cdp& x,
                                      const Model& model, const DecisionGraph& graph,
                                      std::size_t m, double upper_bound) {
    require(m >= 1, ErrorKind::Config, "anpc_cells: bucket count must be >= 1");
    require(upper_bound > 0.0, ErrorKind::Config, "anpc_cells: upper bound must be > 0");
    const auto y = static_cast<std::size_t>(x.predicted_class);
    require(y < graph.per_class.size(), ErrorKind::Config,
            "anpc_cells: predicted class outside graph");

    std::vector<std::uint64_t> out;
    for (const AbstractPath& path : graph.per_class[y]) {
        const GraphMember* nearest = nullptr;
        double best = -1.0;
        for (const GraphMember& member : path.members) {
            const double sim = path_similarity(x.neurons, member.cdp);
            if (sim > best) {
                best = sim;
                nearest = &member;
            }
        }
        require(nearest != nullptr, ErrorKind::Invariant,
                "anpc_cells: abstract path without members");

        for (std::size_t l = 0; l < graph.layer_sizes.size(); ++l) {
            const auto& neurons = path.neurons.per_layer[l];
            if (neurons.empty()) continue;
            double sum = 0.0;
            for (std::size_t i = 0; i < neurons.size(); ++i) {
                const double a = trace.activation(
                    model, l, neurons[i]);
                const double d = a - nearest->activations[l][i];
                sum += d * d;
            }
            out.push_back(pack_cell(y, static_cast<std::uint64_t>(path.cluster_index), l,
                                    distance_bucket(std::sqrt(sum), m, upper_bound)));
        }
    }
    return out;
}

ActivationProfile profile_activations(const Model& model, const LabeledDataset& data,
                                      int threads) {
    require(data.size() > 0, ErrorKind::Config, "profile_activations: empty dataset");
    const std::size_t total = model.countable_neuron_count();
    const auto& countable = model.countable_layers();

    std::vector<ActivationProfile> partial(
        static_cast<std::size_t>(std::max(threads, 1)),
        ActivationProfile{std::vector<double>(total, std::numeric_limits<double>::infinity()),
                          std::vector<double>(total, -std::numeric_limits<double>::infinity())});

    const std::size_t workers = partial.size();
    parallel_for(workers, static_cast<int>(workers), [&](std::size_t w) {
        ActivationProfile& p = partial[w];
        const std::size_t begin = data.size() * w / workers;
        const std::size_t end = data.size() * (w + 1) / workers;
        for (std::size_t i = begin; i < end; ++i) {
            const ForwardTrace trace =
                forward(model, data.image(i).reshaped(model.input_shape()));
            for (std::size_t c = 0; c < countable.size(); ++c) {
                const std::vector<double> acts = trace.activations(model, c);
                for (std::size_t nrn = 0; nrn < acts.size(); ++nrn) {
                    const std::size_t g = countable[c].offset + nrn;
                    p.low[g] = std::min(p.low[g], acts[nrn]);
                    p.high[g] = std::max(p.high[g], acts[nrn]);
                }
            }
        }
    });

    ActivationProfile profile = std::move(partial[0]);
    for (std::size_t w = 1; w < partial.size(); ++w) {
        for (std::size_t g = 0; g < total; ++g) {
            profile.low[g] = std::min(profile.low[g], partial[w].low[g]);
            profile.high[g] = std::max(profile.high[g], partial[w].high[g]);
        }
    }
    return profile;
}

CoverageState coverage(const Model& model, const LabeledDataset& suite,
                       const DecisionGraph* graph, const ActivationProfile* profile,
                       const CoverageConfig& config) {
    require(config.criterion != Criterion::Impartiality, ErrorKind::Config,
            "coverage: impartiality is computed by output_impartiality");
    if (suite.size() > 0) {
        require(suite.example_size() == Tensor::checked_size(model.input_shape()),
                ErrorKind::Config, "coverage: suite example size does not match model input");
    }

    CoverageState state;
    state.criterion = config.criterion;
    state.buckets = config.buckets;
    state.upper_bound = config.upper_bound;
    state.nc_threshold = config.nc_threshold;
    state.kmnc_sections = config.kmnc_sections;

    const std::size_t total_neurons = model.countable_neuron_count();
    const std::size_t layer_count = model.countable_layers().size();

    const bool path_based =
        config.criterion == Criterion::Snpc || config.criterion == Criterion::Anpc;
    if (path_based) {
        require(graph != nullptr, ErrorKind::Config,
                "coverage: SNPC/ANPC need a decision graph");
        require(graph->layer_sizes.size() == layer_count, ErrorKind::Config,
                "coverage: graph was built for a different model");
        require(graph->num_classes == model.num_classes(), ErrorKind::Config,
                "coverage: graph class count does not match model");
        state.denominator = graph->num_classes * graph->clusters * layer_count *
                            config.buckets;
        state.unreachable_cells =
            count_unreachable(*graph, config.criterion, config.buckets);
    } else if (config.criterion == Criterion::Nc) {
        state.denominator = total_neurons;
    } else {
        require(profile != nullptr, ErrorKind::Config,
                "coverage: KMNC/NBC need an activation profile");
        require(profile->low.size() == total_neurons, ErrorKind::Config,
                "coverage: profile was built for a different model");
        state.denominator = config.criterion == Criterion::Kmnc
                                ? total_neurons * config.kmnc_sections
                                : total_neurons * 2;
    }

    struct PerInput {
        std::vector<std::uint64_t> cells;
        bool skipped = false;
    };
    std::vector<PerInput> per_input(suite.size());
    const auto& countable = model.countable_layers();

    parallel_for(suite.size(), config.threads, [&](std::size_t i) {
        const ForwardTrace trace =
            forward(model, suite.image(i).reshaped(model.input_shape()));
        PerInput& slot = per_input[i];
        switch (config.criterion) {
            case Criterion::Snpc:
            case Criterion::Anpc: {
                const auto y = static_cast<std::size_t>(trace.predicted_class());
                if (graph->per_class[y].empty()) {
                    slot.skipped = true;
                    return;
                }
                const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
                const Cdp x = extract_cdp(model, rel, graph->alpha);
                slot.cells = config.criterion == Criterion::Snpc
                                 ? snpc_cells(x, *graph, config.buckets)
                                 : anpc_cells(trace, x, model, *graph, config.buckets,
                                              config.upper_bound);
                break;
            }
            case Criterion::Nc: {
                for (std::size_t c = 0; c < countable.size(); ++c) {
                    const std::vector<double> acts = trace.activations(model, c);
                    for (std::size_t nrn = 0; nrn < acts.size(); ++nrn) {
                        if (acts[nrn] > config.nc_threshold) {
                            slot.cells.push_back(countable[c].offset + nrn);
                        }
                    }
                }
                break;
            }
            case Criterion::Kmnc: {
                for (std::size_t c = 0; c < countable.size(); ++c) {
                    const std::vector<double> acts = trace.activations(model, c);
                    for (std::size_t nrn = 0; nrn < acts.size(); ++nrn) {
                        const std::size_t g = countable[c].offset + nrn;
                        const double lo = profile->low[g], hi = profile->high[g];
                        const double v = acts[nrn];
                        if (v < lo || v > hi) continue;
                        std::size_t section;
                        if (v >= hi) {
                            section = config.kmnc_sections - 1;
                        } else {
                            section = static_cast<std::size_t>(
                                (v - lo) / (hi - lo) * static_cast<double>(
                                                           config.kmnc_sections));
                            section = std::min(section, config.kmnc_sections - 1);
                        }
                        slot.cells.push_back(g * config.kmnc_sections + section);
                    }
                }
                break;
            }
            case Criterion::Nbc: {
                for (std::size_t c = 0; c < countable.size(); ++c) {
                    const std::vector<double> acts = trace.activations(model, c);
                    for (std::size_t nrn = 0; nrn < acts.size(); ++nrn) {
                        const std::size_t g = countable[c].offset + nrn;
                        if (acts[nrn] < profile->low[g]) slot.cells.push_back(g * 2);
                        if (acts[nrn] > profile->high[g]) slot.cells.push_back(g * 2 + 1);
                    }
                }
                break;
            }
            case Criterion::Impartiality:
                break;
        }
    });

    for (const PerInput& slot : per_input) {
        if (slot.skipped) ++state.skipped_inputs;
        state.cells.insert(slot.cells.begin(), slot.cells.end());
    }
    return state;
}

double output_impartiality(const Model& model, const LabeledDataset& suite, int threads) {
    require(suite.size() > 0, ErrorKind::Config, "output_impartiality: empty suite");
    if (model.num_classes() == 1) return 1.0;

    std::vector<int> predicted(suite.size());
    parallel_for(suite.size(), threads, [&](std::size_t i) {
        predicted[i] = forward(model, suite.image(i).reshaped(model.input_shape()))
                           .predicted_class();
    });

    std::vector<std::size_t> counts(model.num_classes(), 0);
    for (int y : predicted) ++counts[static_cast<std::size_t>(y)];

    std::size_t nonzero = 0;
    bool uniform = true;
    for (std::size_t c : counts) {
        if (c > 0) {
            ++nonzero;
            if (c != counts[0]) uniform = false;
        } else {
            uniform = false;
        }
    }
    if (nonzero == 1) return 0.0;
    if (uniform) return 1.0;

    const double n = static_cast<double>(suite.size());
    double entropy = 0.0;
    for (std::size_t c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        entropy -= p * std::log(p);
    }
    const double scaled = entropy / std::log(static_cast<double>(model.num_classes()));
    return std::clamp(scaled, 0.0, 1.0);
}

}  // namespace npcov
