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

#include "npcov/evaluation.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>

#include "npcov/lrp.hpp"
#include "npcov/parallel.hpp"

namespace npcov {
namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Relevance-descending order (ties: lower id) of one critical layer,
/// reconstructed from the ascending storage order.
std::vector<std::size_t> relevance_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scores[a] > scores[b];
    });
    return order;
}

}  // namespace

const char* to_string(MaskScope scope) {
    switch (scope) {
        case MaskScope::InputCdp: return "cdp";
        case MaskScope::InputNcdp: return "ncdp";
        case MaskScope::AbstractCdp: return "abstract-cdp";
        case MaskScope::AbstractNcdp: return "abstract-ncdp";
    }
    return "?";
}

MaskReport inconsistency_rate(const Model& model, const LabeledDataset& inputs,
                              MaskScope scope, double alpha, const DecisionGraph* graph,
                              int threads) {
    MaskReport report;
    report.scope = to_string(scope);

    if (scope == MaskScope::InputCdp || scope == MaskScope::InputNcdp) {
        report.alpha = alpha;
        std::vector<std::uint8_t> flips(inputs.size(), 0);
        parallel_for(inputs.size(), threads, [&](std::size_t i) {
            const Tensor image = inputs.image(i).reshaped(model.input_shape());
            const ForwardTrace trace = forward(model, image);
            const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
            const Cdp cdp = extract_cdp(model, rel, alpha);
            const NeuronSelection mask =
                scope == MaskScope::InputCdp
                    ? cdp.neurons
                    : cdp.neurons.complement(model.countable_layers());
            const ForwardTrace masked = mask_forward(model, image, mask);
            flips[i] = masked.predicted_class() != trace.predicted_class() ? 1 : 0;
        });
        report.total = inputs.size();
        for (std::uint8_t f : flips) report.flipped += f;
    } else {
        require(graph != nullptr, ErrorKind::Config,
                "inconsistency_rate: abstract scopes need a decision graph");
        report.alpha = graph->alpha;
        report.beta = graph->beta;
        report.clusters = graph->clusters;

        struct Job {
            const AbstractPath* path;
            int input_id;
            int expected;
        };
        std::vector<Job> jobs;
        for (const auto& paths : graph->per_class) {
            for (const AbstractPath& path : paths) {
                for (const GraphMember& member : path.members) {
                    jobs.push_back(Job{&path, member.input_id, path.class_id});
                }
            }
        }
        std::vector<std::uint8_t> flips(jobs.size(), 0);
        parallel_for(jobs.size(), threads, [&](std::size_t j) {
            const Job& job = jobs[j];
            const NeuronSelection mask =
                scope == MaskScope::AbstractCdp
                    ? job.path->neurons
                    : job.path->neurons.complement(model.countable_layers());
            const Tensor image =
                inputs.image(static_cast<std::size_t>(job.input_id))
                    .reshaped(model.input_shape());
            const ForwardTrace masked = mask_forward(model, image, mask);
            flips[j] = masked.predicted_class() != job.expected ? 1 : 0;
        });
        report.total = jobs.size();
        for (std::uint8_t f : flips) report.flipped += f;
    }

    report.rate = report.total == 0
                      ? 0.0
                      : static_cast<double>(report.flipped) /
                            static_cast<double>(report.total);
    return report;
}

std::vector<NeuronSelection> quintile_partition(const Cdp& cdp) {
    constexpr std::size_t kParts = 5;
    // Per layer: relevance-sorted ids chopped into kParts contiguous
    // slices, remainder neurons going to the earlier slices.
    std::vector<NeuronSelection> masks(kParts);
    for (auto& m : masks) m.per_layer.resize(cdp.neurons.per_layer.size());
    for (std::size_t l = 0; l < cdp.neurons.per_layer.size(); ++l) {
        const auto& ids = cdp.neurons.per_layer[l];
        const auto order = relevance_order(cdp.scores[l]);
        const std::size_t base = order.size() / kParts;
        const std::size_t remainder = order.size() % kParts;
        std::size_t cursor = 0;
        for (std::size_t q = 0; q < kParts; ++q) {
            const std::size_t take = base + (q < remainder ? 1 : 0);
            auto& slice = masks[q].per_layer[l];
            for (std::size_t t = 0; t < take; ++t) {
                slice.push_back(ids[order[cursor++]]);
            }
            std::sort(slice.begin(), slice.end());
        }
    }
    return masks;
}

std::vector<MaskReport> quintile_mask(const Model& model, const LabeledDataset& inputs,
                                      double alpha, int threads) {
    constexpr std::size_t kParts = 5;
    std::vector<std::array<std::uint8_t, kParts>> flips(
        inputs.size(), std::array<std::uint8_t, kParts>{});

    parallel_for(inputs.size(), threads, [&](std::size_t i) {
        const Tensor image = inputs.image(i).reshaped(model.input_shape());
        const ForwardTrace trace = forward(model, image);
        const RelevanceTrace rel = relevance(model, trace, trace.predicted_class());
        const Cdp cdp = extract_cdp(model, rel, alpha);
        const std::vector<NeuronSelection> masks = quintile_partition(cdp);
        for (std::size_t q = 0; q < kParts; ++q) {
            const ForwardTrace masked = mask_forward(model, image, masks[q]);
            flips[i][q] = masked.predicted_class() != trace.predicted_class() ? 1 : 0;
        }
    });

    std::vector<MaskReport> reports(kParts);
    for (std::size_t q = 0; q < kParts; ++q) {
        reports[q].scope = "quintile-" + std::to_string(q + 1);
        reports[q].alpha = alpha;
        reports[q].total = inputs.size();
        for (std::size_t i = 0; i < inputs.size(); ++i) reports[q].flipped += flips[i][q];
        reports[q].rate = reports[q].total == 0
                              ? 0.0
                              : static_cast<double>(reports[q].flipped) /
                                    static_cast<double>(reports[q].total);
    }
    return reports;
}

SimilarityReport similarity_study(const Model& model, const LabeledDataset& data,
                                  double alpha, std::size_t per_class,
                                  const DecisionGraph* graph, int threads) {
    require(per_class >= 2, ErrorKind::Config,
            "similarity_study: need at least 2 samples per class");
    const ExtractedPaths extracted = extract_paths(model, data, alpha, threads);

    std::vector<std::vector<std::size_t>> sampled(model.num_classes());
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& bucket = sampled[static_cast<std::size_t>(extracted.predicted[i])];
        if (bucket.size() < per_class) bucket.push_back(i);
    }

    SimilarityReport report;
    double intra_sum = 0.0, inter_sum = 0.0;
    std::size_t intra_pairs = 0, inter_pairs = 0;
    std::vector<std::size_t> pool;
    std::vector<int> pool_class;
    for (std::size_t y = 0; y < sampled.size(); ++y) {
        for (std::size_t id : sampled[y]) {
            pool.push_back(id);
            pool_class.push_back(static_cast<int>(y));
            ++report.class_samples;
        }
    }
    for (std::size_t a = 0; a < pool.size(); ++a) {
        for (std::size_t b = a + 1; b < pool.size(); ++b) {
            const double sim =
                path_similarity(extracted.cdps[pool[a]], extracted.cdps[pool[b]]);
            if (pool_class[a] == pool_class[b]) {
                intra_sum += sim;
                ++intra_pairs;
            } else {
                inter_sum += sim;
                ++inter_pairs;
            }
        }
    }
    require(intra_pairs > 0 && inter_pairs > 0, ErrorKind::Config,
            "similarity_study: need two classes with two samples each");
    report.intra_class = intra_sum / static_cast<double>(intra_pairs);
    report.inter_class = inter_sum / static_cast<double>(inter_pairs);

    if (graph != nullptr) {
        double clus_intra_sum = 0.0, clus_inter_sum = 0.0;
        std::size_t clus_intra_pairs = 0, clus_inter_pairs = 0;
        for (const auto& paths : graph->per_class) {
            // Round-robin cap keeps every cluster represented.
            std::vector<std::pair<const NeuronSelection*, int>> picked;
            for (std::size_t round = 0; picked.size() < per_class; ++round) {
                bool any = false;
                for (std::size_t j = 0; j < paths.size() && picked.size() < per_class;
                     ++j) {
                    if (round < paths[j].members.size()) {
                        picked.emplace_back(&paths[j].members[round].cdp,
                                            static_cast<int>(j));
                        any = true;
                    }
                }
                if (!any) break;
            }
            report.cluster_samples += picked.size();
            for (std::size_t a = 0; a < picked.size(); ++a) {
                for (std::size_t b = a + 1; b < picked.size(); ++b) {
                    const double sim =
                        path_similarity(*picked[a].first, *picked[b].first);
                    if (picked[a].second == picked[b].second) {
                        clus_intra_sum += sim;
                        ++clus_intra_pairs;
                    } else {
                        clus_inter_sum += sim;
                        ++clus_inter_pairs;
                    }
                }
            }
        }
        if (clus_intra_pairs > 0) {
            report.intra_cluster = clus_intra_sum / static_cast<double>(clus_intra_pairs);
        }
        if (clus_inter_pairs > 0) {
            report.inter_cluster = clus_inter_sum / static_cast<double>(clus_inter_pairs);
        }
    }
    return report;
}

TuneResult tune_hyperparameters(const Model& model, const LabeledDataset& train,
                                std::vector<double> alpha_grid,
                                std::vector<double> beta_grid,
                                std::vector<std::size_t> k_grid,
                                double feasibility_threshold, std::uint64_t seed,
                                int threads) {
    require(!alpha_grid.empty() && !beta_grid.empty() && !k_grid.empty(),
            ErrorKind::Config, "tune_hyperparameters: empty grid");
    std::sort(alpha_grid.begin(), alpha_grid.end());
    std::sort(beta_grid.begin(), beta_grid.end());
    std::sort(k_grid.begin(), k_grid.end());

    TuneResult result;
    result.feasibility_threshold = feasibility_threshold;

    for (double alpha : alpha_grid) {
        const ExtractedPaths extracted = extract_paths(model, train, alpha, threads);
        const MaskReport input_cdp = inconsistency_rate(
            model, train, MaskScope::InputCdp, alpha, nullptr, threads);
        const MaskReport input_ncdp = inconsistency_rate(
            model, train, MaskScope::InputNcdp, alpha, nullptr, threads);

        for (double beta : beta_grid) {
            for (std::size_t k : k_grid) {
                GraphBuildOptions options;
                options.alpha = alpha;
                options.beta = beta;
                options.clusters = k;
                options.seed = seed;
                options.threads = threads;
                const DecisionGraph graph = build_decision_graph(model, extracted, options);

                TuneEntry entry;
                entry.alpha = alpha;
                entry.beta = beta;
                entry.clusters = k;
                entry.input_inc_cdp = input_cdp.rate;
                entry.input_inc_ncdp = input_ncdp.rate;

                double width_sum = 0.0;
                std::size_t paths = 0;
                for (const auto& class_paths : graph.per_class) {
                    for (const AbstractPath& path : class_paths) {
                        width_sum += path.width(graph.layer_sizes);
                        ++paths;
                    }
                }
                entry.width = paths == 0 ? 0.0 : width_sum / static_cast<double>(paths);

                entry.abstract_inc_cdp =
                    inconsistency_rate(model, train, MaskScope::AbstractCdp, alpha,
                                       &graph, threads).rate;
                entry.abstract_inc_ncdp =
                    inconsistency_rate(model, train, MaskScope::AbstractNcdp, alpha,
                                       &graph, threads).rate;
                entry.feasible = entry.abstract_inc_cdp >= feasibility_threshold;
                result.entries.push_back(entry);
            }
        }
    }

    for (std::size_t i = 0; i < result.entries.size(); ++i) {
        if (result.entries[i].feasible) result.ranking.push_back(i);
    }
    std::sort(result.ranking.begin(), result.ranking.end(),
              [&](std::size_t a, std::size_t b) {
                  const TuneEntry& ea = result.entries[a];
                  const TuneEntry& eb = result.entries[b];
                  if (ea.width != eb.width) return ea.width < eb.width;
                  if (ea.abstract_inc_ncdp != eb.abstract_inc_ncdp)
                      return ea.abstract_inc_ncdp < eb.abstract_inc_ncdp;
                  if (ea.alpha != eb.alpha) return ea.alpha < eb.alpha;
                  if (ea.beta != eb.beta) return ea.beta < eb.beta;
                  return ea.clusters < eb.clusters;
              });
    return result;
}

NcovResult normalize_coverage_deltas(double base_coverage,
                                     const std::vector<double>& coverages) {
    require(coverages.size() >= 2, ErrorKind::Config,
            "normalized_coverage_change: need at least 2 suites");
    NcovResult result;
    result.base_coverage = base_coverage;
    result.coverages = coverages;

    double min_delta = coverages[0] - base_coverage;
    double max_delta = min_delta;
    for (double cov : coverages) {
        const double delta = cov - base_coverage;
        min_delta = std::min(min_delta, delta);
        max_delta = std::max(max_delta, delta);
    }
    const double range = max_delta - min_delta;
    result.degenerate = range == 0.0;
    result.ncov.reserve(coverages.size());
    for (double cov : coverages) {
        result.ncov.push_back(result.degenerate ? 0.0 : (cov - base_coverage) / range);
    }
    return result;
}

NcovResult normalized_coverage_change(const Model& model, const LabeledDataset& base,
                                      const std::vector<LabeledDataset>& suites,
                                      const DecisionGraph* graph,
                                      const ActivationProfile* profile,
                                      const CoverageConfig& config) {
    for (const LabeledDataset& suite : suites) {
        require(suite.size() == base.size(), ErrorKind::Config,
                "normalized_coverage_change: suites must match the base suite size");
    }
    const double base_cov = coverage(model, base, graph, profile, config).coverage();
    std::vector<double> coverages;
    coverages.reserve(suites.size());
    for (const LabeledDataset& suite : suites) {
        coverages.push_back(coverage(model, suite, graph, profile, config).coverage());
    }
    return normalize_coverage_deltas(base_cov, coverages);
}

std::vector<TimingEntry> timing(const Model& model, const LabeledDataset& suite,
                                const std::vector<Criterion>& criteria,
                                const DecisionGraph* graph,
                                const ActivationProfile* profile,
                                const CoverageConfig& config) {
    std::vector<TimingEntry> entries;
    for (Criterion criterion : criteria) {
        CoverageConfig local = config;
        local.criterion = criterion;
        TimingEntry entry;
        entry.criterion = criterion;
        const auto start = std::chrono::steady_clock::now();
        if (criterion == Criterion::Snpc || criterion == Criterion::Anpc) {
            require(graph != nullptr, ErrorKind::Config, "timing: path criteria need a graph");
            // Extraction phase measured on its own, then the cell phase.
            const ExtractedPaths extracted = suite.size() == 0
                                                 ? ExtractedPaths{}
                                                 : extract_paths(model, suite,
                                                                 graph->alpha,
                                                                 config.threads);
            entry.extraction_seconds = seconds_since(start);
            std::set<std::uint64_t> cells;
            for (std::size_t i = 0; i < extracted.cdps.size(); ++i) {
                const auto y = static_cast<std::size_t>(extracted.predicted[i]);
                if (graph->per_class[y].empty()) continue;
                std::vector<std::uint64_t> input_cells;
                if (criterion == Criterion::Snpc) {
                    input_cells = snpc_cells(extracted.cdps[i], *graph, config.buckets);
                } else {
                    const ForwardTrace trace = forward(
                        model, suite.image(i).reshaped(model.input_shape()));
                    input_cells = anpc_cells(trace, extracted.cdps[i], model, *graph,
                                             config.buckets, config.upper_bound);
                }
                cells.insert(input_cells.begin(), input_cells.end());
            }
            const std::size_t denominator = graph->num_classes * graph->clusters *
                                            graph->layer_sizes.size() * config.buckets;
            entry.value = denominator == 0 ? 0.0
                                           : static_cast<double>(cells.size()) /
                                                 static_cast<double>(denominator);
        } else if (criterion == Criterion::Impartiality) {
            entry.value =
                suite.size() == 0 ? 0.0 : output_impartiality(model, suite, config.threads);
        } else {
            entry.value = coverage(model, suite, graph, profile, local).coverage();
        }
        entry.total_seconds = seconds_since(start);
        entries.push_back(entry);
    }
    return entries;
}

}  // namespace npcov
