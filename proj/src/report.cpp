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

#include "npcov/report.hpp"

#include <algorithm>
#include <sstream>

namespace npcov {
namespace {

std::string scalar_text(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void render_into(const json& doc, std::ostringstream& out, int indent) {
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    for (const auto& [key, value] : doc.items()) {
        if (value.is_object()) {
            out << pad << key << ":\n";
            render_into(value, out, indent + 1);
        } else if (value.is_array() && !value.empty() && value.front().is_object()) {
            out << pad << key << ":\n";
            std::vector<std::string> columns;
            for (const auto& [col, cell] : value.front().items()) {
                (void)cell;
                columns.push_back(col);
            }
            std::vector<std::size_t> widths;
            for (const std::string& col : columns) widths.push_back(col.size());
            std::vector<std::vector<std::string>> rows;
            for (const json& row : value) {
                std::vector<std::string> cells;
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    cells.push_back(row.contains(columns[c])
                                        ? scalar_text(row[columns[c]])
                                        : "");
                    widths[c] = std::max(widths[c], cells.back().size());
                }
                rows.push_back(std::move(cells));
            }
            out << pad << "  ";
            for (std::size_t c = 0; c < columns.size(); ++c) {
                out << (c ? "  " : "");
                out << columns[c] << std::string(widths[c] - columns[c].size(), ' ');
            }
            out << '\n';
            for (const auto& cells : rows) {
                out << pad << "  ";
                for (std::size_t c = 0; c < columns.size(); ++c) {
                    out << (c ? "  " : "");
                    out << cells[c] << std::string(widths[c] - cells[c].size(), ' ');
                }
                out << '\n';
            }
        } else {
            out << pad << key << ": " << scalar_text(value) << '\n';
        }
    }
}

}  // namespace

json coverage_report(const CoverageState& state) {
    json doc;
    doc["criterion"] = to_string(state.criterion);
    doc["coverage"] = state.coverage();
    doc["covered_cells"] = state.cells.size();
    doc["denominator"] = state.denominator;
    if (state.criterion == Criterion::Snpc || state.criterion == Criterion::Anpc) {
        doc["skipped_inputs"] = state.skipped_inputs;
        doc["unreachable_cells"] = state.unreachable_cells;
        doc["buckets"] = state.buckets;
        if (state.criterion == Criterion::Anpc) doc["upper_bound"] = state.upper_bound;
    } else if (state.criterion == Criterion::Nc) {
        doc["threshold"] = state.nc_threshold;
    } else if (state.criterion == Criterion::Kmnc) {
        doc["sections"] = state.kmnc_sections;
    }
    return doc;
}

json mask_report_json(const std::vector<MaskReport>& reports) {
    json rows = json::array();
    for (const MaskReport& r : reports) {
        json row;
        row["scope"] = r.scope;
        row["rate"] = r.rate;
        row["flipped"] = r.flipped;
        row["total"] = r.total;
        row["alpha"] = r.alpha;
        if (r.clusters > 0) {
            row["beta"] = r.beta;
            row["clusters"] = r.clusters;
        }
        rows.push_back(std::move(row));
    }
    json doc;
    doc["masking"] = std::move(rows);
    return doc;
}

json similarity_report_json(const SimilarityReport& report) {
    json doc;
    doc["intra_class"] = report.intra_class;
    doc["inter_class"] = report.inter_class;
    doc["intra_cluster"] = report.intra_cluster;
    doc["inter_cluster"] = report.inter_cluster;
    doc["class_samples"] = report.class_samples;
    doc["cluster_samples"] = report.cluster_samples;
    return doc;
}

json tune_report_json(const TuneResult& result) {
    json doc;
    doc["feasibility_threshold"] = result.feasibility_threshold;
    json rows = json::array();
    for (const TuneEntry& e : result.entries) {
        json row;
        row["alpha"] = e.alpha;
        row["beta"] = e.beta;
        row["clusters"] = e.clusters;
        row["width"] = e.width;
        row["inc_cdp"] = e.input_inc_cdp;
        row["inc_ncdp"] = e.input_inc_ncdp;
        row["abstract_inc_cdp"] = e.abstract_inc_cdp;
        row["abstract_inc_ncdp"] = e.abstract_inc_ncdp;
        row["feasible"] = e.feasible;
        rows.push_back(std::move(row));
    }
    doc["configs"] = std::move(rows);
    json ranked = json::array();
    for (std::size_t index : result.ranking) {
        const TuneEntry& e = result.entries[index];
        json row;
        row["rank"] = ranked.size() + 1;
        row["alpha"] = e.alpha;
        row["beta"] = e.beta;
        row["clusters"] = e.clusters;
        row["width"] = e.width;
        row["abstract_inc_cdp"] = e.abstract_inc_cdp;
        row["abstract_inc_ncdp"] = e.abstract_inc_ncdp;
        ranked.push_back(std::move(row));
    }
    doc["ranking"] = std::move(ranked);
    return doc;
}

json ncov_report_json(const NcovResult& result) {
    json doc;
    doc["base_coverage"] = result.base_coverage;
    doc["degenerate"] = result.degenerate;
    json rows = json::array();
    for (std::size_t i = 0; i < result.coverages.size(); ++i) {
        json row;
        row["suite"] = i;
        row["coverage"] = result.coverages[i];
        row["ncov"] = result.ncov[i];
        rows.push_back(std::move(row));
    }
    doc["suites"] = std::move(rows);
    return doc;
}

json timing_report_json(const std::vector<TimingEntry>& entries) {
    json rows = json::array();
    for (const TimingEntry& e : entries) {
        json row;
        row["criterion"] = to_string(e.criterion);
        row["value"] = e.value;
        row["total_seconds"] = e.total_seconds;
        row["extraction_seconds"] = e.extraction_seconds;
        rows.push_back(std::move(row));
    }
    json doc;
    doc["timing"] = std::move(rows);
    return doc;
}

json graph_build_report(const DecisionGraph& graph) {
    json doc;
    doc["alpha"] = graph.alpha;
    doc["beta"] = graph.beta;
    doc["clusters"] = graph.clusters;
    doc["seed"] = graph.seed;
    doc["classes"] = graph.num_classes;
    doc["abstract_paths"] = graph.total_paths();

    json rows = json::array();
    std::size_t empty_total = 0;
    for (std::size_t y = 0; y < graph.per_class.size(); ++y) {
        std::size_t members = 0;
        for (const AbstractPath& path : graph.per_class[y]) {
            json row;
            row["class"] = y;
            row["cluster"] = path.cluster_index;
            row["members"] = path.members.size();
            row["width"] = path.width(graph.layer_sizes);
            row["empty_layers"] = path.empty_layers();
            empty_total += path.empty_layers();
            members += path.members.size();
            rows.push_back(std::move(row));
        }
        (void)members;
    }
    doc["empty_abstract_layers"] = empty_total;
    doc["paths"] = std::move(rows);
    return doc;
}

std::string render_text(const json& doc) {
    std::ostringstream out;
    render_into(doc, out, 0);
    return out.str();
}

std::string render_report(const json& doc, bool as_json) {
    if (as_json) return doc.dump(2) + "\n";
    return render_text(doc);
}

}  // namespace npcov
